"""Command line interface: flags, config files, outputs, exit codes."""

import json

import pytest

from wimcsim.cli import main


def write_config(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def test_run_with_flags_only(tmp_path, capsys):
    out = tmp_path / "res"
    code = main([
        "run", "--arch", "4C4M:substrate", "--load", "0.05", "--seed", "3",
        "--cycles", "2000", "--warmup", "200", "--out", str(out),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "4C4M (substrate)" in text
    csv = (tmp_path / "res.csv").read_text().splitlines()
    assert csv[0].startswith("arch,fabric,")
    assert csv[1].startswith("4C4M,substrate,")
    assert (tmp_path / "res.txt").exists()


def test_fabric_flag_overrides_config(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "arch": "4C4M:substrate",
        "run": {"total_cycles": 1500, "warmup_cycles": 100},
        "traffic": {"injection_load": 0.05},
    })
    assert main(["run", cfg, "--fabric", "interposer"]) == 0
    assert "4C4M (interposer)" in capsys.readouterr().out


def test_validate_ok(tmp_path, capsys):
    cfg = write_config(tmp_path, {"arch": "8C4M:wireless", "overrides": {"cores_per_chip": 8}})
    assert main(["validate", cfg]) == 0
    assert "ok:" in capsys.readouterr().out


def test_validate_rejects_bad_arch(tmp_path, capsys):
    cfg = write_config(tmp_path, {"arch": "4x4:nope"})
    assert main(["validate", cfg]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_file_is_config_error(capsys):
    assert main(["validate", "no_such_file.json"]) == 1


def test_bad_override_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"arch": "4C4M:wireless", "overrides": {"bogus": 1}})
    assert main(["run", cfg]) == 1


def test_all_pairs_mode_deadlock_exit_code(tmp_path, capsys):
    # All-pairs shortest paths on the interposer produce a cyclic channel
    # dependency; the gate refuses with the runtime-error exit code.
    code = main([
        "run", "--arch", "4C4M:interposer", "--mode", "all-pairs",
        "--cycles", "1200", "--warmup", "100", "--load", "0.05",
    ])
    assert code == 2
    assert "runtime error" in capsys.readouterr().err


def test_experiment_fabric_compare(tmp_path):
    cfg = write_config(tmp_path, {
        "arch": "4C4M:wireless",
        "run": {"total_cycles": 1200, "warmup_cycles": 200},
        "experiment": {"type": "fabric-compare", "loads": [0.05], "seeds": [1]},
    })
    out = tmp_path / "exp"
    assert main(["experiment", cfg, "--out", str(out)]) == 0
    rows = (tmp_path / "exp.csv").read_text().splitlines()
    assert len(rows) == 1 + 3  # header + one cell per fabric
    gains = (tmp_path / "exp_gains.csv").read_text().splitlines()
    assert gains[0].startswith("experiment,label,")
    assert len(gains) == 2


def test_experiment_byte_identical_outputs(tmp_path):
    cfg = write_config(tmp_path, {
        "arch": "4C4M:wireless",
        "run": {"total_cycles": 1200, "warmup_cycles": 200},
        "experiment": {"type": "fabric-compare", "loads": [0.05], "seeds": [4]},
    })
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", cfg, "--out", str(a)]) == 0
    assert main(["experiment", cfg, "--out", str(b)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a_gains.csv").read_bytes() == (tmp_path / "b_gains.csv").read_bytes()


def test_experiment_trace_suite(tmp_path):
    trace = tmp_path / "t.trace"
    trace.write_text("0 0 1 64\n30 2 M0 64\n60 5 M3 64\n")
    cfg = write_config(tmp_path, {
        "arch": "4C4M:wireless",
        "run": {"total_cycles": 1500, "warmup_cycles": 0},
        "traffic": {"replicate_chips": True},
        "experiment": {"type": "trace-suite", "traces": [str(trace)], "seeds": [1]},
    })
    out = tmp_path / "tr"
    assert main(["experiment", cfg, "--out", str(out)]) == 0
    rows = (tmp_path / "tr.csv").read_text().splitlines()
    assert len(rows) == 1 + 2  # interposer + wireless


def test_run_with_trace_flag(tmp_path, capsys):
    trace = tmp_path / "t.trace"
    trace.write_text("0 0 1 64\n")
    code = main([
        "run", "--arch", "1C0M:interposer", "--trace", str(trace),
        "--cycles", "800", "--warmup", "0",
    ])
    assert code == 0
    assert "trace_replay" in capsys.readouterr().out
