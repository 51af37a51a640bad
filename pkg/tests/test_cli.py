import csv
import json

import pytest

from conftest import DATA
from specshare import cli
from specshare.engine import SimulationError, TRACE_COLUMNS
from specshare.sweep import CSV_COLUMNS, _run_job, load_sweep_spec, rows_to_csv, run_sweep


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_run_writes_identical_reports(tmp_path):
    cfg = write(tmp_path, "c.json", {"n_nodes": 80, "horizon_t": 900.0})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["run", "--config", str(cfg), "--seed", "42", "--out", str(a)]) == 0
    assert cli.main(["run", "--config", str(cfg), "--seed", "42", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert report["seed"] == 42
    for key in ("R_BL", "eta_sys", "eta_s", "c_e", "interference_mhz"):
        assert key in report["metrics"]["aggregate"]
        assert key in report["metrics"]["providers"][0]


def test_correlation_diagonal_error(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"n_providers": 2, "rate_correlation": [[2, 0], [0, 1]]})
    assert cli.main(["run", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "rate_correlation" in err and "diagonal" in err


def test_distinct_diagnostics(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    missing = capsys.readouterr().err
    cfg = write(tmp_path, "c.json", {"n_providers": 3,
                                     "rate_correlation": [[1, .9, -.9], [.9, 1, .9], [-.9, .9, 1]]})
    assert cli.main(["run", "--config", str(cfg)]) == 1
    psd = capsys.readouterr().err
    cfg = write(tmp_path, "d.json", {"n_nodes": "many"})
    assert cli.main(["run", "--config", str(cfg)]) == 1
    schema = capsys.readouterr().err
    assert "not found" in missing
    assert "positive semi-definite" in psd
    assert "n_nodes" in schema
    assert len({missing, psd, schema}) == 3


def test_zero_rate_report(tmp_path):
    cfg = write(tmp_path, "c.json", {"mean_rates": [0, 0, 0, 0, 0]})
    out = tmp_path / "r.json"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    agg = json.loads(out.read_text())["metrics"]["aggregate"]
    assert agg["processed_calls"] == agg["blocked_calls"] == agg["accepted_calls"] == 0


def test_run_csv_and_traces(tmp_path):
    cfg = write(tmp_path, "c.json", {"n_nodes": 150, "horizon_t": 900.0})
    out, trace, msgs = tmp_path / "r.csv", tmp_path / "t.csv", tmp_path / "m.csv"
    assert cli.main(["run", "--config", str(cfg), "--format", "csv", "--out", str(out),
                     "--trace", str(trace), "--messages", str(msgs)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["scope"] == "aggregate" and len(rows) == 6
    with trace.open() as fh:
        assert tuple(next(csv.reader(fh))) == TRACE_COLUMNS
    with msgs.open() as fh:
        header = next(csv.reader(fh))
        assert header == ["time", "msg_type", "src", "dst", "request_id", "entry_count"]
        assert sum(1 for _ in fh) > 0


def test_invariant_violation_exit_code(tmp_path, monkeypatch, capsys):
    cfg = write(tmp_path, "c.json", {})

    def boom(*a, **k):
        raise SimulationError("synthetic", 7, 1.5)

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["run", "--config", str(cfg)]) == 2
    assert "event #7" in capsys.readouterr().err


def small_spec(tmp_path, reps=2):
    return write(tmp_path, "s.json", {
        "parameter": "n_nodes", "values": [20, 60], "provider_groups": [1, 3], "replications": reps,
        "base_config": {"horizon_t": 600.0, "seed": 10},
    })


def test_sweep_row_count_and_schema(tmp_path):
    out = tmp_path / "out.csv"
    assert cli.main(["sweep", "--spec", str(small_spec(tmp_path, 3)), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 2 * 3
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert [int(r["seed"]) for r in rows[:3]] == [10, 11, 12]
    assert (tmp_path / "out_summary.csv").exists()


def test_node_sweep_row_arithmetic():
    spec = load_sweep_spec(DATA / "node_sweep.json")
    assert len(spec.jobs()) == 5 * 3 * 30


def test_sweep_order_independent(tmp_path):
    spec = load_sweep_spec(small_spec(tmp_path))
    forward = run_sweep(spec)
    reverse = [_run_job(j) for j in reversed(spec.jobs())]
    rows = [row for _, row in sorted(reverse, key=lambda kr: kr[0])]
    assert rows_to_csv(rows) == rows_to_csv(forward)


def test_sweep_over_providers_and_scale(tmp_path):
    base = {"horizon_t": 300.0}
    spec = load_sweep_spec(write(tmp_path, "p.json", {"parameter": "n_providers", "values": [1, 2],
                                                      "base_config": base}))
    rows = run_sweep(spec)
    assert [r["provider_group"] for r in rows] == [1, 2]
    spec = load_sweep_spec(write(tmp_path, "q.json", {"parameter": "mean_rate_scale", "values": [0.5, 2.0],
                                                      "base_config": base, "provider_groups": [2]}))
    rows = run_sweep(spec)
    assert rows[1]["traffic_load"] > rows[0]["traffic_load"]


@pytest.mark.parametrize("bad", [
    {"parameter": "n_cells", "values": [1]},
    {"parameter": "n_nodes", "values": []},
    {"parameter": "n_nodes", "values": [1], "replications": 0},
    {"parameter": "n_nodes", "values": [1], "provider_groups": [7]},
])
def test_sweep_spec_validation(tmp_path, bad):
    assert cli.main(["sweep", "--spec", str(write(tmp_path, "s.json", bad))]) == 1


def test_compare_zero_traffic(tmp_path):
    cfg = write(tmp_path, "c.json", {"mean_rates": [0, 0, 0, 0, 0], "horizon_t": 300.0})
    out = tmp_path / "cmp.json"
    assert cli.main(["compare", "--config", str(cfg), "--reps", "3", "--out", str(out)]) == 0
    summary = json.loads(out.read_text())["summary"]
    assert summary["R_BL_diff_mean"] == 0.0 and summary["eta_s_diff_mean"] == 0.0
    assert summary["ties"] == 3


def test_compare_deterministic_and_sharing_helps(tmp_path):
    cfg = DATA / "asymmetric_scenario.json"
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert cli.main(["compare", "--config", str(cfg), "--reps", "4", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    s = json.loads(a.read_text())["summary"]
    assert s["R_BL_on_mean"] <= s["R_BL_off_mean"]
    csv_out = tmp_path / "c.csv"
    assert cli.main(["compare", "--config", str(cfg), "--reps", "1", "--format", "csv",
                     "--out", str(csv_out)]) == 0
    assert len(csv_out.read_text().splitlines()) == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    cfg = write(tmp_path, "c.json", {"horizon_t": 100.0})
    proc = subprocess.run([sys.executable, "-m", "specshare", "run", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["seed"] == 0
