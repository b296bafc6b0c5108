from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adcsizer.spec_model import (
    ASSIGN,
    LOWER,
    UPPER,
    BinOp,
    Call,
    DomainError,
    DslSyntaxError,
    DuplicateAssign,
    DuplicateDeclaration,
    MissingBinding,
    Neg,
    Num,
    Relation,
    SelfReference,
    UndeclaredVariable,
    Var,
    check_relation,
    eval_expr,
    format_expr,
    format_library,
    log_margin,
    operator_count,
    parse_expr,
    parse_library,
    variables,
)

HEADER = "var x : derived\nvar y : measured\nvar z : system_spec = 2\n"


# -- parsing ---------------------------------------------------------------

def test_noise_floor_relation_parses_to_lower_bound(lib):
    rel = lib.by_tag("noise_floor")
    assert rel.lhs == "C_L" and rel.kind == LOWER
    assert operator_count(rel.rhs) == 11
    assert set(rel.rhs_variables) == {"N", "k", "T_abs", "V_fs"}


def test_preamp_gain_relation_references_offset_and_resolution(lib):
    rel = lib.by_tag("preamp_gain")
    assert rel.lhs == "A_V" and rel.kind == LOWER
    assert set(rel.rhs_variables) == {"V_os", "N"}


def test_self_reference_rejected():
    with pytest.raises(SelfReference) as exc:
        parse_library("var x : derived\nx = x + 1\n")
    assert exc.value.name == "x"


def test_undeclared_variable_reports_line():
    with pytest.raises(UndeclaredVariable) as exc:
        parse_library("var x : derived\n\nx = q * 2\n")
    assert exc.value.name == "q" and exc.value.line == 3


def test_duplicate_assign_rejected():
    with pytest.raises(DuplicateAssign):
        parse_library(HEADER + "x = z\nx = 2*z\n")


def test_assign_and_bounds_coexist():
    lib = parse_library(HEADER + "x = z\nx >= 1\nx <= 3\n")
    assert [r.kind for r in lib.relations] == [ASSIGN, LOWER, UPPER]


def test_duplicate_declaration_rejected():
    with pytest.raises(DuplicateDeclaration):
        parse_library("var x : derived\nvar x : measured\n")


def test_empirical_requires_interval():
    with pytest.raises(Exception):
        parse_library("var D : empirical\n")
    lib = parse_library("var D : empirical in [1, 3]\n")
    assert (lib.variables["D"].lower, lib.variables["D"].upper) == (1.0, 3.0)


@pytest.mark.parametrize("text", ["x = ", "x >= (z", "x = z +* 2", "x => z", "x = max(z,", "var x derived"])
def test_syntax_errors_carry_position(text):
    with pytest.raises(DslSyntaxError) as exc:
        parse_library(HEADER + text + "\n")
    assert exc.value.line == 4 and exc.value.col >= 1 and exc.value.expected


def test_relations_carry_source_line_and_default_tag():
    lib = parse_library(HEADER + "# note\n\nx = z @ mytag\ny >= 1\n")
    a, b = lib.relations
    assert (a.line, a.tag) == (6, "mytag")
    assert (b.line, b.tag) == (7, "L7")


def test_comments_and_blank_lines_ignored():
    lib = parse_library("# c\n\nvar x : derived   # trailing\n")
    assert list(lib.variables) == ["x"]


def test_identifier_with_comma_and_dot():
    lib = parse_library('var R_on,TG : system_spec = 150 unit "Ohm"\nvar a.b : derived\na.b = R_on,TG + 1\n')
    rel = lib.relations[0]
    assert rel.lhs == "a.b" and rel.rhs_variables == ["R_on,TG"]
    assert eval_expr(rel.rhs, {"R_on,TG": 150.0}) == 151.0


def test_comma_inside_call_separates_arguments():
    e = parse_expr("max(a,b)")
    assert isinstance(e, Call) and e.func == "max" and len(e.args) == 2


def test_power_is_right_associative_and_binds_tighter_than_minus():
    assert eval_expr(parse_expr("2^3^2"), {}) == 512.0
    assert eval_expr(parse_expr("-2^2"), {}) == -4.0
    assert eval_expr(parse_expr("2^-1"), {}) == 0.5
    assert eval_expr(parse_expr("1 - 2 - 3"), {}) == -4.0
    assert eval_expr(parse_expr("8 / 4 / 2"), {}) == 1.0


def test_scientific_literals():
    assert eval_expr(parse_expr("1.5e-3 + 2E2 + .5"), {}) == pytest.approx(200.5015)


# -- evaluation ------------------------------------------------------------

def test_eval_noise_floor_example(lib):
    b = {"N": 12, "T_abs": 300.0, "V_fs": 0.9, "k": 1.380649e-23}
    assert eval_expr(lib.by_tag("noise_floor").rhs, b) == pytest.approx(4.97e-13, rel=2e-3)


def test_eval_preamp_gain_example(lib):
    v = eval_expr(lib.by_tag("preamp_gain").rhs, {"V_os": 5e-3, "N": 12})
    assert v == pytest.approx(20 * math.log10(0.005 * 8192), rel=1e-12)
    assert round(v, 2) == 32.25


def test_eval_literal_with_empty_binding():
    assert eval_expr(parse_expr("42"), {}) == 42.0


def test_eval_functions():
    b = {"a": 4.0, "b": -3.0}
    cases = {
        "ln(a)": math.log(4), "log10(a)": math.log10(4), "log2(a)": 2.0, "sqrt(a)": 2.0,
        "exp(b)": math.exp(-3), "max(a, b)": 4.0, "min(a, b)": -3.0, "abs(b)": 3.0,
    }
    for text, want in cases.items():
        assert eval_expr(parse_expr(text), b) == pytest.approx(want, rel=1e-15), text


def test_eval_missing_binding():
    with pytest.raises(MissingBinding) as exc:
        eval_expr(parse_expr("a + b"), {"a": 1.0})
    assert exc.value.name == "b"


@pytest.mark.parametrize("text", ["1/0", "ln(0)", "log10(-1)", "log2(0)", "sqrt(-1)"])
def test_eval_domain_errors(text):
    with pytest.raises(DomainError):
        eval_expr(parse_expr(text), {})


def test_unknown_function_is_a_syntax_error():
    with pytest.raises(DslSyntaxError):
        parse_expr("foo(1)")


# -- margins ---------------------------------------------------------------

def _bound(kind, rhs="y"):
    return Relation("x", kind, parse_expr(rhs))


def test_bandwidth_margin_example():
    out = check_relation(_bound(LOWER), {"x": 10e6, "y": 100e6})
    assert not out.satisfied
    assert out.signed_log_margin == pytest.approx(-1.0, abs=1e-12)


def test_equal_values_satisfy_with_zero_margin():
    out = check_relation(_bound(LOWER), {"x": 3.3, "y": 3.3})
    assert out.satisfied and out.signed_log_margin == 0.0


def test_upper_bound_margin_example():
    out = check_relation(_bound(UPPER), {"x": 10e-9, "y": 15.4e-9})
    assert out.satisfied
    assert out.signed_log_margin == pytest.approx(0.1875, abs=5e-4)


def test_assign_tolerance():
    rel = Relation("x", ASSIGN, parse_expr("y"))
    assert check_relation(rel, {"x": 1.0, "y": 1.0 + 5e-10}).satisfied
    out = check_relation(rel, {"x": 1.0, "y": 1.0 + 1e-8})
    assert not out.satisfied and out.signed_log_margin < 0


@pytest.mark.parametrize("x,y", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_non_positive_comparison_is_an_error(x, y):
    with pytest.raises(DomainError):
        check_relation(_bound(LOWER), {"x": x, "y": y})


positive = st.floats(min_value=1e-30, max_value=1e30, allow_nan=False, allow_infinity=False)


@given(positive, positive)
def test_margin_antisymmetry(a, b):
    lo = check_relation(_bound(LOWER), {"x": a, "y": b})
    up = check_relation(_bound(UPPER), {"x": a, "y": b})
    assert lo.signed_log_margin == -up.signed_log_margin


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_margin_scale_invariance(a, b, s):
    base = check_relation(_bound(LOWER), {"x": a, "y": b})
    scaled = check_relation(_bound(LOWER), {"x": a * s, "y": b * s})
    assert scaled.signed_log_margin == pytest.approx(base.signed_log_margin, abs=1e-12)
    if abs(base.signed_log_margin) > 1e-12:
        assert scaled.satisfied == base.satisfied


def test_log_margin_rejects_assign_kind():
    with pytest.raises(ValueError):
        log_margin(1.0, 1.0, ASSIGN)


# -- printing --------------------------------------------------------------

NAMES = ["a", "b_1", "V_fs", "T.x"]
FUNCS = {"ln": 1, "log10": 1, "log2": 1, "sqrt": 1, "exp": 1, "abs": 1, "max": 2, "min": 2}

leaves = st.one_of(
    st.floats(min_value=0, max_value=1e12, allow_nan=False).map(Num),
    st.sampled_from(NAMES).map(Var),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.sampled_from(sorted(FUNCS)).flatmap(
            lambda f: st.lists(children, min_size=FUNCS[f], max_size=FUNCS[f]).map(lambda a: Call(f, tuple(a)))
        ),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300)
@given(exprs)
def test_format_parse_round_trip(e):
    assert parse_expr(format_expr(e)) == e


def test_library_round_trip(lib):
    again = parse_library(format_library(lib))
    assert again.variables == lib.variables
    assert again.relations == lib.relations


def test_evaluation_is_deterministic(lib):
    b = {"N": 12, "T_abs": 300.0, "V_fs": 0.9, "k": 1.380649e-23}
    e = lib.by_tag("noise_floor").rhs
    assert eval_expr(e, b) == eval_expr(e, b)


def test_variables_in_first_seen_order():
    assert variables(parse_expr("b + a*b + c")) == ["b", "a", "c"]
