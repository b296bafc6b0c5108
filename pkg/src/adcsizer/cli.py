"""Command-line front end: run, graph, verify, report.

Exit codes: 0 converged / all checks pass, 1 usage or configuration error,
2 not converged or failing checks, 3 dependency-graph check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
from datetime import datetime, timezone
from importlib.resources import files
from pathlib import Path
from typing import Any, Mapping, Sequence

import jsonschema

from . import __version__
from .behavioral_sim import (
    AdcDesign,
    BehavioralSimulator,
    ModelCard,
    enob_from_sndr,
    fom_schreier,
    fom_walden,
)
from .depgraph import ConstraintReport, CycleError, build_graph
from .sizing_flow import SUBCIRCUITS, FlowConfig, FlowResult, SystemSpec, run_flow, verify_design
from .spec_model import RelationError, RelationLibrary, load_default_library, parse_library

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_CYCLE = 0, 1, 2, 3
PARALLEL_ENV = "ADCSIZER_PARALLEL"


class UsageError(Exception):
    pass


# -- schemas and file I/O --------------------------------------------------

def load_schema(name: str) -> dict:
    return json.loads(files("adcsizer.data").joinpath(f"{name}.schema.json").read_text())


def schema_errors(doc: Any, name: str) -> list[str]:
    """Validation messages prefixed with the JSON pointer of the failing node."""
    validator = jsonschema.Draft202012Validator(load_schema(name))
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        out.append(f"{pointer}: {err.message}")
    return out


def dumps(doc: Any) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_json(path: str | Path, what: str) -> Any:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} is not valid JSON: {exc}") from None


def load_spec(path: str | Path) -> tuple[dict, SystemSpec]:
    doc = read_json(path, "spec file")
    errs = schema_errors(doc, "spec")
    if errs:
        raise UsageError("invalid spec:\n  " + "\n  ".join(errs))
    full = {"vdd_v": 0.9, "ron_tg_ohm": 150.0, "t_abs_k": 300.0, **doc}
    try:
        spec = SystemSpec(full["N"], full["fs_hz"], full["vfs_v"], full["vdd_v"], full["ron_tg_ohm"], full["t_abs_k"])
    except ValueError as exc:
        raise UsageError(f"invalid spec: {exc}") from None
    return full, spec


def load_library(path: str | None) -> tuple[RelationLibrary, str]:
    if path is None:
        lib = load_default_library()
        return lib, files("adcsizer.data").joinpath("sar_adc.rel").read_text()
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"library not found: {p}")
    text = p.read_text()
    return parse_library(text), text


def load_card(path: str | None) -> ModelCard:
    if path is None:
        return ModelCard()
    try:
        return ModelCard.load(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"bad model card: {exc}") from None


# -- report assembly -------------------------------------------------------

def _num(x: float | None) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)


def constraint_rows(report: ConstraintReport, lib: RelationLibrary) -> list[dict[str, Any]]:
    """One row per library relation, in library order."""
    by_rel = {id(e.relation): e for e in report.entries}
    rows = []
    for rel in lib.relations:
        e = by_rel.get(id(rel))
        row: dict[str, Any] = {"tag": rel.tag, "relation": str(rel), "kind": rel.kind}
        if e is None:
            row.update(lhs_value=None, bound_value=None, margin=None, status="pending")
        else:
            o = e.outcome
            row.update(lhs_value=_num(o.lhs_value), bound_value=_num(o.rhs_value),
                       margin=_num(o.signed_log_margin), status="pass" if o.satisfied else "fail")
        rows.append(row)
    return rows


def metrics_dict(m) -> dict[str, Any] | None:
    if m is None:
        return None
    return {
        "SNDR_dB": m.SNDR, "ENOB": m.ENOB, "P_W": m.P, "FOM_S_dB": m.FOM_S, "FOM_W_J": m.FOM_W,
        "power_breakdown_W": dict(m.power_breakdown),
    }


def report_dict(result: FlowResult, lib: RelationLibrary, spec_doc: Mapping[str, Any]) -> dict[str, Any]:
    return {
        "tool_version": __version__,
        "converged": result.converged,
        "system_iterations": result.system_iterations,
        "evaluations": result.evaluations,
        "total_violation": _num(result.report.total_violation),
        "spec": dict(spec_doc),
        "empirical": result.empirical.as_dict() if result.empirical else None,
        "metrics": metrics_dict(result.metrics),
        "constraints": constraint_rows(result.report, lib),
        "runtime": {k: {"seconds": float(v["seconds"]), "iterations": int(v["iterations"])}
                    for k, v in result.runtime.items()},
    }


def _fmt(x: Any) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.5g}"
    return str(x)


def table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    out = [line, "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(row.rstrip() for row in out)


def render_constraints(rows: Sequence[Mapping[str, Any]]) -> str:
    return table(["tag", "status", "lhs", "bound", "margin", "relation"],
                 [[r["tag"], r["status"], r["lhs_value"], r["bound_value"], r["margin"], r["relation"]] for r in rows])


def render_report(doc: Mapping[str, Any]) -> str:
    parts = [f"converged: {doc['converged']}   system iterations: {doc['system_iterations']}   "
             f"evaluations: {doc['evaluations']}"]
    m = doc.get("metrics")
    if m:
        parts.append(table(["metric", "value", "unit"], [
            ["SNDR", m["SNDR_dB"], "dB"], ["ENOB", m["ENOB"], "bit"], ["P", m["P_W"], "W"],
            ["FOM_S", m["FOM_S_dB"], "dB"], ["FOM_W", m["FOM_W_J"], "J/step"],
        ]))
    parts.append(render_constraints(doc["constraints"]))
    parts.append(table(["stage", "seconds", "iterations"],
                       [[k, v["seconds"], v["iterations"]] for k, v in doc["runtime"].items()]))
    return "\n\n".join(parts) + "\n"


# -- run directory ---------------------------------------------------------

def write_run_dir(
    out: Path,
    result: FlowResult,
    spec_doc: Mapping[str, Any],
    lib: RelationLibrary,
    lib_text: str,
    seed: int,
    normalize: bool = False,
) -> dict[str, Any]:
    out.mkdir(parents=True, exist_ok=True)
    (out / "trials").mkdir(exist_ok=True)
    (out / "spec.json").write_text(dumps(dict(spec_doc)))
    (out / "library.rel").write_text(lib_text)
    (out / "graph.dot").write_text(build_graph(lib, check=False).to_dot())
    for sub in SUBCIRCUITS:
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in result.sub_logs.get(sub, []))
        (out / "trials" / f"{sub}.jsonl").write_text(text)
    (out / "system.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in result.system_log))
    if result.design is not None:
        (out / "design.json").write_text(dumps(result.design.to_dict()))
    report = report_dict(result, lib, spec_doc)
    (out / "report.json").write_text(dumps(report))
    manifest = {
        "tool_version": __version__,
        "spec_hash": sha256_file(out / "spec.json"),
        "library_hash": sha256_file(out / "library.rel"),
        "seed": seed,
        "created": None if normalize else datetime.now(timezone.utc).isoformat(),
        "host": None if normalize else {"python": platform.python_version(), "platform": platform.platform()},
        "files": _file_hashes(out),
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return report


def _file_hashes(run: Path) -> dict[str, str]:
    return {p.relative_to(run).as_posix(): sha256_file(p)
            for p in sorted(run.rglob("*")) if p.is_file() and p.name != "manifest.json"}


def check_manifest(run: Path) -> list[str]:
    """Files whose content no longer matches the manifest."""
    manifest = read_json(run / "manifest.json", "manifest")
    recorded: dict[str, str] = manifest.get("files", {})
    current = _file_hashes(run)
    bad = [name for name, h in recorded.items() if current.get(name) != h]
    if manifest.get("spec_hash") != current.get("spec.json"):
        bad.append("spec.json")
    if manifest.get("library_hash") != current.get("library.rel"):
        bad.append("library.rel")
    return sorted(set(bad))


# -- subcommands -----------------------------------------------------------

def _parallelism(arg: int) -> int:
    env = os.environ.get(PARALLEL_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{PARALLEL_ENV} must be an integer, got {env!r}") from None
    return arg


def cmd_run(args: argparse.Namespace) -> int:
    spec_doc, spec = load_spec(args.spec)
    lib, lib_text = load_library(args.library)
    card = load_card(args.model_card)
    out = Path(args.out)
    try:
        cfg = FlowConfig(
            total_budget=args.budget,
            parallelism=_parallelism(args.parallel),
            max_system_iters=args.max_system_iters,
            seed=args.seed,
            n=args.extra_cycles,
            n_fft=args.n_fft,
            record_wall_time=not args.normalize,
            empirical_fixed=dict(spec_doc.get("empirical_overrides", {})),
            waveform_path=str(out / "waveform.csv") if args.waveform else None,
        )
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    if args.waveform:
        out.mkdir(parents=True, exist_ok=True)
    result = run_flow(spec, cfg, lib, BehavioralSimulator(card))
    report = write_run_dir(out, result, spec_doc, lib, lib_text, args.seed, args.normalize)
    print(render_report(report), end="")
    print(f"run directory: {out}")
    return EXIT_OK if result.converged else EXIT_FAIL


def cmd_graph(args: argparse.Namespace) -> int:
    lib, _ = load_library(args.library)
    if args.check:
        try:
            g = build_graph(lib)
        except CycleError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CYCLE
    else:
        g = build_graph(lib, check=False)
    text = g.to_dot() if args.format == "dot" else g.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    doc = read_json(args.design, "design file")
    errs = schema_errors(doc, "design")
    if errs:
        raise UsageError("invalid design:\n  " + "\n  ".join(errs))
    try:
        design = AdcDesign.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid design: {exc}") from None
    lib, _ = load_library(args.library)
    card = load_card(args.model_card)
    try:
        metrics, report, _ = verify_design(design, lib=lib, sim=BehavioralSimulator(card))
    except (RelationError, ValueError, KeyError) as exc:
        raise UsageError(f"design cannot be evaluated: {exc}") from None
    rows = constraint_rows(report, lib)
    print(render_constraints(rows))
    print(f"\nSNDR {metrics.SNDR:.2f} dB  ENOB {metrics.ENOB:.2f}  P {metrics.P:.4g} W")
    failing = [r["tag"] for r in rows if r["status"] != "pass"]
    if failing:
        print("failing: " + ", ".join(failing))
        return EXIT_FAIL
    return EXIT_OK


def parse_fom_args(text: str) -> dict[str, float]:
    vals: dict[str, float] = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"expected KEY=VALUE, got {item!r}")
        try:
            vals[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"not a number: {value!r}") from None
    missing = {"SNDR", "fs", "P"} - set(vals)
    if missing:
        raise UsageError(f"--fom needs SNDR, fs and P (missing {sorted(missing)})")
    if vals["fs"] <= 0 or vals["P"] <= 0:
        raise UsageError("fs and P must be positive")
    return vals


def cmd_report(args: argparse.Namespace) -> int:
    if args.fom:
        v = parse_fom_args(args.fom)
        enob = enob_from_sndr(v["SNDR"])
        print(table(["metric", "value", "unit"], [
            ["SNDR", v["SNDR"], "dB"],
            ["ENOB", enob, "bit"],
            ["FOM_S", fom_schreier(v["SNDR"], v["fs"], v["P"]), "dB"],
            ["FOM_W", fom_walden(v["P"], v["fs"], enob), "J/step"],
        ]))
        return EXIT_OK
    if not args.run_dir:
        raise UsageError("give a run directory or --fom")
    run = Path(args.run_dir)
    if not run.is_dir():
        raise UsageError(f"run directory not found: {run}")
    bad = check_manifest(run)
    if bad:
        raise UsageError("run directory does not match its manifest: " + ", ".join(bad))
    doc = read_json(run / "report.json", "report")
    errs = schema_errors(doc, "report")
    if errs:
        raise UsageError("invalid report:\n  " + "\n  ".join(errs))
    if args.json:
        sys.stdout.write(dumps(doc))
    else:
        sys.stdout.write(render_report(doc))
    return EXIT_OK if doc["converged"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adcsizer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="size a converter from a spec file")
    r.add_argument("--spec", required=True)
    r.add_argument("--budget", type=int, default=5000, help="total behavioral evaluations")
    r.add_argument("--parallel", type=int, default=20, help=f"concurrent evaluations (env {PARALLEL_ENV} wins)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default="run")
    r.add_argument("--max-system-iters", type=int, default=5)
    r.add_argument("--extra-cycles", type=int, default=1, help="clock cycles per conversion beyond N")
    r.add_argument("--n-fft", type=int, default=4096)
    r.add_argument("--library")
    r.add_argument("--model-card")
    r.add_argument("--normalize", action="store_true", help="zero wall times and omit timestamps")
    r.add_argument("--waveform", action="store_true", help="dump the final conversion as waveform.csv")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("graph", help="export the variable dependency graph")
    g.add_argument("--library")
    g.add_argument("--format", choices=("dot", "json"), default="dot")
    g.add_argument("--out")
    g.add_argument("--check", action="store_true", help="exit 3 if the graph has a cycle")
    g.set_defaults(func=cmd_graph)

    v = sub.add_parser("verify", help="re-simulate a design and check every relation")
    v.add_argument("--design", required=True)
    v.add_argument("--library")
    v.add_argument("--model-card")
    v.set_defaults(func=cmd_verify)

    rep = sub.add_parser("report", help="render a run's report, or compute FOMs")
    rep.add_argument("run_dir", nargs="?")
    rep.add_argument("--fom", help="SNDR=<dB>,fs=<Hz>,P=<W>")
    rep.add_argument("--json", action="store_true")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RelationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
