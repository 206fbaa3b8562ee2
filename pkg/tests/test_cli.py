import csv
import json
import subprocess
import sys

import pytest

from iscc_partition.cli import main

FAST = ["--it-max", "3", "--inner-max", "10", "--samples", "100", "--elites", "10"]


@pytest.fixture()
def config(tmp_path):
    path = tmp_path / "sc.json"
    path.write_text(json.dumps({"K": 2, "truncate_layers": 5}))
    return path


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_writes_results(config, tmp_path, cov_dir, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", str(config), "--trials", "2", "--out", str(out), "--cache-dir", cov_dir, *FAST])
    assert code == 0
    assert len(_rows(out / "results.csv")) == 2 * 4
    assert len(_rows(out / "devices.csv")) == 2 * 4 * 2
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["schemes"]) == {"ProposedCE", "LocalOnly", "EdDp", "CedWdp"}
    assert "ProposedCE" in capsys.readouterr().out


def test_run_is_reproducible(config, tmp_path, cov_dir):
    args = ["run", "--config", str(config), "--trials", "1", "--scheme", "ProposedCE", "--seed", "4", "--cache-dir", cov_dir, *FAST]
    main([*args, "--out", str(tmp_path / "a")])
    main([*args, "--out", str(tmp_path / "b")])
    pick = lambda d: [(r["objective"], r["partitions"]) for r in _rows(tmp_path / d / "results.csv")]
    assert pick("a") == pick("b")


def test_sweep(config, tmp_path, cov_dir):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"parameter": "r_b", "values": [1e6, 4e6], "trials": 1, "schemes": ["CedWdp"]}))
    code = main(["sweep", str(spec), "--config", str(config), "--out", str(tmp_path / "s"), "--cache-dir", cov_dir, *FAST])
    assert code == 0
    assert len(_rows(tmp_path / "s" / "sweep.csv")) == 2


def test_compare_with_exhaustive(config, tmp_path, cov_dir):
    out = tmp_path / "c"
    assert main(["compare", "--config", str(config), "--with-exhaustive", "--out", str(out), "--cache-dir", cov_dir, *FAST]) == 0
    rows = {r["scheme"]: float(r["objective"]) for r in _rows(out / "compare.csv")}
    assert rows["Exhaustive"] == min(rows.values())


def test_beampattern_and_trace(config, tmp_path, cov_dir):
    assert main(["beampattern", "--widths", "30", "--grid-step", "5", "--out", str(tmp_path / "b")]) == 0
    assert len(_rows(tmp_path / "b" / "beampattern.csv")) == 37
    assert main(["trace", "--config", str(config), "--out", str(tmp_path / "t"), "--cache-dir", cov_dir, *FAST]) == 0
    assert (tmp_path / "t" / "ce_trace.csv").exists()


def test_missing_config_exits_2(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == 2
    assert capsys.readouterr().err.startswith("error: ConfigError")


def test_budget_exceeded_exits_2(tmp_path, cov_dir, capsys):
    cfg = tmp_path / "big.json"
    cfg.write_text(json.dumps({"K": 4}))
    code = main(["compare", "--config", str(cfg), "--with-exhaustive", "--out", str(tmp_path / "o"), "--cache-dir", cov_dir, *FAST])
    assert code == 2
    assert "budget" in capsys.readouterr().err


def test_unwritable_output_exits_1(config, tmp_path, capsys):
    blocker = tmp_path / "f"
    blocker.write_text("")
    code = main(["run", "--config", str(config), "--trials", "1", "--out", str(blocker / "x"), *FAST])
    assert code == 1
    assert "error: OSError" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "iscc_partition.cli", "run", "--config", str(tmp_path / "missing.json")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    assert "error:" in proc.stderr
