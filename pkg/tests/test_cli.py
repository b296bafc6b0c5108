from __future__ import annotations

import json
import re
import subprocess
import sys

import jsonschema
import pytest

from adcsizer.cli import EXIT_CYCLE, EXIT_FAIL, EXIT_OK, EXIT_USAGE, load_schema, main

N10 = {"N": 10, "fs_hz": 1e6, "vfs_v": 0.9}


@pytest.fixture(scope="module")
def spec_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("spec") / "n10.json"
    p.write_text(json.dumps(N10))
    return p


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, spec_file):
    out = tmp_path_factory.mktemp("runs") / "run1"
    code = main(["run", "--spec", str(spec_file), "--budget", "5000", "--parallel", "1", "--seed", "0",
                 "--out", str(out), "--normalize"])
    assert code == EXIT_OK
    return out


def run_cli(*args):
    return main([str(a) for a in args])


# -- run -------------------------------------------------------------------

def test_run_writes_run_directory(run_dir):
    for name in ("spec.json", "library.rel", "graph.dot", "system.jsonl", "design.json", "report.json",
                 "manifest.json", "trials/unit_cap.jsonl", "trials/bootstrap.jsonl",
                 "trials/comparator.jsonl", "trials/preamp.jsonl"):
        assert (run_dir / name).is_file(), name


def test_report_validates_against_schema(run_dir, lib):
    doc = json.loads((run_dir / "report.json").read_text())
    jsonschema.validate(doc, load_schema("report"))
    assert sorted(r["tag"] for r in doc["constraints"]) == sorted(r.tag for r in lib.relations)
    assert doc["converged"] and doc["total_violation"] == 0.0


def test_design_validates_against_schema(run_dir):
    jsonschema.validate(json.loads((run_dir / "design.json").read_text()), load_schema("design"))


def test_trial_log_records(run_dir):
    rec = json.loads((run_dir / "trials" / "comparator.jsonl").read_text().splitlines()[0])
    assert set(rec) >= {"id", "params", "objective", "status", "wall_time_s", "seed", "space_hash"}


def test_floats_round_trip(run_dir):
    doc = json.loads((run_dir / "design.json").read_text())
    text = (run_dir / "design.json").read_text()
    assert repr(doc["C_u"]) in text


def test_normalized_runs_are_byte_identical(run_dir, spec_file, tmp_path):
    out = tmp_path / "again"
    assert run_cli("run", "--spec", spec_file, "--parallel", "1", "--seed", "0", "--out", out, "--normalize") == 0
    for p in sorted(run_dir.rglob("*")):
        if p.is_file():
            assert (out / p.relative_to(run_dir)).read_bytes() == p.read_bytes(), p.name


def test_missing_spec(tmp_path, capsys):
    assert run_cli("run", "--spec", tmp_path / "nope.json", "--out", tmp_path / "r") == EXIT_USAGE
    assert "not found" in capsys.readouterr().err


def test_zero_budget(spec_file, tmp_path, capsys):
    assert run_cli("run", "--spec", spec_file, "--budget", 0, "--out", tmp_path / "r") == EXIT_USAGE
    assert "total_budget" in capsys.readouterr().err


def test_schema_errors_use_json_pointers(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"N": "ten", "fs_hz": 1e6}))
    assert run_cli("run", "--spec", p, "--out", tmp_path / "r") == EXIT_USAGE
    err = capsys.readouterr().err
    assert "/N" in err and "vfs_v" in err


def test_invalid_spec_values(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({**N10, "vfs_v": 2.0}))
    assert run_cli("run", "--spec", p, "--out", tmp_path / "r") == EXIT_USAGE


def test_unconverged_run_exits_2(tmp_path):
    p = tmp_path / "n14.json"
    p.write_text(json.dumps({"N": 14, "fs_hz": 5e5, "vfs_v": 0.9}))
    out = tmp_path / "r"
    assert run_cli("run", "--spec", p, "--budget", 60, "--parallel", 1, "--out", out) == EXIT_FAIL
    doc = json.loads((out / "report.json").read_text())
    jsonschema.validate(doc, load_schema("report"))
    assert not doc["converged"]


def test_parallel_env_override(spec_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ADCSIZER_PARALLEL", "x")
    assert run_cli("run", "--spec", spec_file, "--out", tmp_path / "r") == EXIT_USAGE
    assert "ADCSIZER_PARALLEL" in capsys.readouterr().err
    monkeypatch.setenv("ADCSIZER_PARALLEL", "0")
    assert run_cli("run", "--spec", spec_file, "--out", tmp_path / "r") == EXIT_USAGE
    monkeypatch.setenv("ADCSIZER_PARALLEL", "1")
    out = tmp_path / "ok"
    assert run_cli("run", "--spec", spec_file, "--parallel", 0, "--out", out, "--normalize") == EXIT_OK


def test_empirical_overrides(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({**N10, "empirical_overrides": {"D": 1.0}}))
    out = tmp_path / "r"
    assert run_cli("run", "--spec", p, "--parallel", 1, "--out", out) == EXIT_OK
    assert json.loads((out / "report.json").read_text())["empirical"]["D"] == 1.0


def test_waveform_dump(spec_file, tmp_path):
    out = tmp_path / "r"
    assert run_cli("run", "--spec", spec_file, "--parallel", 1, "--out", out, "--waveform") == EXIT_OK
    assert (out / "waveform.csv").read_text().startswith("index,held_v,code")


# -- graph -----------------------------------------------------------------

def test_graph_dot(capsys):
    assert run_cli("graph") == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("digraph") and re.search(r'"A_V" -> "V_os"', out)


def test_graph_json(tmp_path):
    out = tmp_path / "g.json"
    assert run_cli("graph", "--format", "json", "--out", out) == EXIT_OK
    adj = json.loads(out.read_text())
    assert "V_os" in adj["A_V"] and "T_comp" in adj["f_3dB"]


def test_graph_cycle_check(tmp_path, capsys):
    lib = tmp_path / "cyc.rel"
    lib.write_text("var a : derived\nvar b : derived\na = b + 1\nb = 2*a\n")
    assert run_cli("graph", "--library", lib, "--check") == EXIT_CYCLE
    err = capsys.readouterr().err
    assert "a -> b -> a" in err or "b -> a -> b" in err
    assert run_cli("graph", "--library", lib) == EXIT_OK


def test_graph_parse_error(tmp_path, capsys):
    lib = tmp_path / "bad.rel"
    lib.write_text("var a : derived\na = (1 +\n")
    assert run_cli("graph", "--library", lib) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err


# -- verify ----------------------------------------------------------------

def test_verify_converged_design(run_dir, capsys):
    assert run_cli("verify", "--design", run_dir / "design.json") == EXIT_OK
    assert "noise_floor" in capsys.readouterr().out


def _edited(run_dir, tmp_path, **changes):
    doc = json.loads((run_dir / "design.json").read_text())
    for k, f in changes.items():
        doc[k] = f(doc[k])
    p = tmp_path / "design.json"
    p.write_text(json.dumps(doc))
    return p


def test_verify_small_unit_cap(run_dir, tmp_path, capsys):
    p = _edited(run_dir, tmp_path, C_u=lambda c: c / 100)
    assert run_cli("verify", "--design", p) == EXIT_FAIL
    failing = capsys.readouterr().out.split("failing:")[1]
    assert "noise_floor" in failing and "mismatch" in failing


def test_verify_fast_clock(run_dir, tmp_path, capsys):
    p = _edited(run_dir, tmp_path, f_s=lambda f: f * 100)
    assert run_cli("verify", "--design", p) == EXIT_FAIL
    assert "dac_settling" in capsys.readouterr().out.split("failing:")[1]


def test_verify_missing_subcircuit(run_dir, tmp_path, capsys):
    p = _edited(run_dir, tmp_path, params=lambda d: {k: v for k, v in d.items() if k != "preamp"})
    assert run_cli("verify", "--design", p) == EXIT_USAGE
    assert "/params" in capsys.readouterr().err


def test_verify_malformed_json(tmp_path):
    p = tmp_path / "design.json"
    p.write_text("{not json")
    assert run_cli("verify", "--design", p) == EXIT_USAGE


# -- report ----------------------------------------------------------------

def _fom_table(capsys, arg):
    assert run_cli("report", "--fom", arg) == EXIT_OK
    rows = {}
    for line in capsys.readouterr().out.splitlines()[2:]:
        name, value, _ = line.split()
        rows[name] = float(value)
    return rows


def test_fom_examples(capsys):
    a = _fom_table(capsys, "SNDR=70.3,fs=1e6,P=72.81e-6")
    assert a["FOM_S"] == pytest.approx(168.7, abs=0.05) and a["FOM_W"] == pytest.approx(27.3e-15, abs=0.1e-15)
    b = _fom_table(capsys, "SNDR=79.99,fs=0.5e6,P=153.6e-6")
    assert b["FOM_S"] == pytest.approx(172.1, abs=0.05) and b["FOM_W"] == pytest.approx(37.8e-15, abs=0.1e-15)
    c = _fom_table(capsys, "SNDR=1.76,fs=2,P=1")
    assert c["FOM_S"] == pytest.approx(1.76) and c["ENOB"] == 0 and c["FOM_W"] == 0.5


@pytest.mark.parametrize("arg", ["SNDR=70", "SNDR=70,fs=x,P=1", "SNDR=70,fs=0,P=1", "junk"])
def test_fom_bad_arguments(arg):
    assert run_cli("report", "--fom", arg) == EXIT_USAGE


def test_report_renders_tables(run_dir, capsys):
    assert run_cli("report", run_dir) == EXIT_OK
    out = capsys.readouterr().out
    assert "FOM_S" in out and "preamp_gain" in out and "iterations" in out


def test_report_json(run_dir, capsys):
    assert run_cli("report", run_dir, "--json") == EXIT_OK
    assert json.loads(capsys.readouterr().out) == json.loads((run_dir / "report.json").read_text())


def test_report_missing_dir(tmp_path):
    assert run_cli("report", tmp_path / "none") == EXIT_USAGE


def test_report_detects_tampering(run_dir, tmp_path, capsys):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(run_dir, copy)
    doc = json.loads((copy / "design.json").read_text())
    doc["C_u"] *= 2
    (copy / "design.json").write_text(json.dumps(doc))
    assert run_cli("report", copy) == EXIT_USAGE
    assert "design.json" in capsys.readouterr().err


def test_usage_errors():
    assert run_cli() == EXIT_USAGE
    assert run_cli("bogus") == EXIT_USAGE


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "adcsizer.cli", "report", "--fom", "SNDR=70.3,fs=1e6,P=72.81e-6"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "FOM_S" in res.stdout
