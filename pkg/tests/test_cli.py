import csv
import io
import json

import pytest
from click.testing import CliRunner

from randcover.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_version(runner):
    res = runner.invoke(main, ["--version"])
    assert res.exit_code == 0 and "0.1.0" in res.output


def test_scheme_build(runner, tmp_path):
    res = runner.invoke(main, ["scheme", "build", "--scheme", "middle:0.3333333333333333",
                               "--depth", "3"])
    assert res.exit_code == 0
    table = rows(res.output)
    assert [r["level"] for r in table] == ["0", "1", "2", "3"]
    assert float(table[2]["mass"]) == 0.25
    res = runner.invoke(main, ["scheme", "build", "--scheme", "spaced:0.4,0.8,0.7",
                               "--out", str(tmp_path / "sch")])
    assert res.exit_code == 0
    doc = json.loads((tmp_path / "sch" / "scheme.json").read_text())
    assert doc["kind"] == "spaced"


def test_scheme_build_validation_error(runner):
    res = runner.invoke(main, ["scheme", "build", "--scheme", "middle:0.7"])
    assert res.exit_code == 2
    assert "error" in res.output


def test_degenerate_spaced_scheme_exit_code(runner):
    res = runner.invoke(main, ["scheme", "build", "--scheme", "spaced:0.4,0.8,0.9"])
    assert res.exit_code == 2


def test_radii_analyze(runner):
    res = runner.invoke(main, ["radii", "analyze", "--rule", "power:2", "--K", "100000"])
    assert res.exit_code == 0
    row = rows(res.output)[0]
    assert abs(float(row["s2_hat"]) - 0.5) < 0.01
    res = runner.invoke(main, ["radii", "analyze", "--rule", "block:0.5,0.6",
                               "--scheme", "spaced:0.4,0.8,0.7"])
    assert res.exit_code == 0
    assert abs(float(rows(res.output)[0]["s2_hat"]) - 0.6) < 0.05


def test_radii_block_without_scheme(runner):
    assert runner.invoke(main, ["radii", "analyze", "--rule", "block:0.5,0.6"]).exit_code == 2


def test_simulate_and_dimension(runner, tmp_path):
    args = ["--scheme", "lebesgue", "--radii", "power:2", "--K", "100000", "--seed", "3"]
    res = runner.invoke(main, ["simulate", *args, "--n0", "100", "--m", "2",
                               "--out", str(tmp_path / "sim")])
    assert res.exit_code == 0
    assert (tmp_path / "sim" / "surrogate.csv").read_text().startswith("left,right\n")
    man = json.loads((tmp_path / "sim" / "realization.json").read_text())
    assert man["seed"] == 3 and man["K"] == 100000
    res = runner.invoke(main, ["dimension", *args])
    assert res.exit_code == 0
    assert abs(float(rows(res.output)[0]["slope"]) - 0.5) < 0.1
    res = runner.invoke(main, ["dimension", *args, "--points"])
    assert res.output.startswith("log_inv_delta,log_count\n")


def test_dimension_thread_count_does_not_change_output(runner):
    args = ["dimension", "--scheme", "middle:0.25", "--radii", "power:2.5", "--K", "100000"]
    one = runner.invoke(main, [*args, "--threads", "1"]).output
    four = runner.invoke(main, [*args, "--threads", "4"]).output
    assert one == four


def test_dimension_needs_K_for_power_radii(runner):
    res = runner.invoke(main, ["dimension", "--scheme", "lebesgue", "--radii", "power:2"])
    assert res.exit_code == 2


def test_energy(runner):
    res = runner.invoke(main, ["energy", "--scheme", "lebesgue", "--t", "0.5"])
    assert res.exit_code == 0
    assert abs(float(rows(res.output)[0]["value"]) - 8 / 3) < 1e-6
    res = runner.invoke(main, ["energy", "--scheme", "middle:0.25", "--t", "0.3",
                               "--restrict", "0", "0.5"])
    assert res.exit_code == 0
    res = runner.invoke(main, ["energy", "--scheme", "middle:0.25", "--t", "0.3",
                               "--restrict", "0.3", "0.7"])
    assert res.exit_code == 2


def test_diagnose(runner):
    res = runner.invoke(main, ["diagnose", "--scheme", "lebesgue", "--radii", "power:2",
                               "--t", "0.3", "--u", "1", "--s", "1", "--samples", "2",
                               "--horizon", "4096"])
    assert res.exit_code == 0
    assert "trend=divergent" in res.output
    res = runner.invoke(main, ["diagnose", "--scheme", "lebesgue", "--radii", "power:2",
                               "--t", "2", "--u", "1", "--s", "1"])
    assert res.exit_code == 2


def test_sweep_triangle(runner, tmp_path):
    res = runner.invoke(main, ["sweep", "triangle", "--gammas", "0.5,1.0", "--s0s", "0.3",
                               "--out", str(tmp_path / "tri.csv")])
    assert res.exit_code == 0
    table = rows((tmp_path / "tri.csv").read_text())
    assert len(table) == 2 and all(r["status"] == "ok" for r in table)


def test_sweep_partial_failure_exit_code(runner):
    res = runner.invoke(main, ["sweep", "triangle", "--gammas", "0.3,1.0", "--s0s", "0.3"])
    assert res.exit_code == 3


def _small_config(tmp_path, **extra):
    doc = {"name": "cli", "scheme": {"kind": "lebesgue", "parameters": {"a": 0.0, "b": 1.0},
                                     "depth_limit": 52},
           "radii": {"kind": "power", "parameters": {"alpha": 2.0}},
           "K": 20000, "seeds": [1, 2]} | extra
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


def test_run_and_report(runner, tmp_path):
    cfg = _small_config(tmp_path)
    out = tmp_path / "run"
    res = runner.invoke(main, ["run", str(cfg), "--out", str(out)])
    assert res.exit_code == 0
    assert (out / "manifest.json").exists()
    res = runner.invoke(main, ["report", str(out)])
    assert res.exit_code == 0
    assert rows(res.output)[0]["name"] == "cli"


def test_run_validation_error(runner, tmp_path):
    cfg = _small_config(tmp_path, seeds=[])
    assert runner.invoke(main, ["run", str(cfg), "--out", str(tmp_path / "x")]).exit_code == 2


def test_report_partial_exit_code(runner, tmp_path):
    cfg = _small_config(tmp_path)
    out = tmp_path / "run"
    runner.invoke(main, ["run", str(cfg), "--out", str(out)])
    (out / "seed1.csv").write_text("broken")
    res = runner.invoke(main, ["report", str(out)])
    assert res.exit_code == 3
    assert "warning" in res.output
