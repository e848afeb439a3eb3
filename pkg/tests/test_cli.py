import csv
import io
import json
import subprocess
import sys
from datetime import datetime, timedelta

import numpy as np
import pytest

from dtsf.cli import main, parse_duration

from conftest import sinusoid, wind_like, write_csv

SMALL_GRID = ["--grid-windows", "48", "--grid-degrees", "1", "--grid-matches", "5"]


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv_with_comments(text):
    lines = text.splitlines()
    meta = [json.loads(l[2:]) for l in lines if l.startswith("# ")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return meta, rows


@pytest.fixture
def periodic_csv(tmp_path):
    return write_csv(tmp_path / "periodic.csv", 6 + 2 * sinusoid(48 * 30, period=48))


def test_stats(wind_csv, capsys):
    code, out, _ = run(["stats", "--input", wind_csv], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["length"] == 48 * 60 and data["step_seconds"] == 1800
    assert data["min"] <= data["mean"] <= data["max"]


def test_stats_with_aggregation(wind_csv, capsys):
    code, out, _ = run(["stats", "--input", wind_csv, "--aggregate", "2", "--format", "csv"],
                       capsys)
    assert code == 0
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert row["length"] == str(48 * 30) and row["step_seconds"] == "3600.0"


def test_scan_single_perfect_match(periodic_csv, capsys):
    code, out, _ = run(["scan", "--input", periodic_csv, "--window", 48, "--matches", 1],
                       capsys)
    assert code == 0
    data = json.loads(out)
    assert len(data["matches"]) == 1
    assert data["matches"][0]["r2"] == pytest.approx(1.0, abs=1e-9)


def test_scan_fifteen_matches_with_ages(wind_csv, capsys):
    code, out, _ = run(["scan", "--input", wind_csv, "--matches", 15, "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 15
    n = 48 * 60
    for r in rows:
        assert int(r["age_steps"]) == n - int(r["start"])
        assert float(r["age_days"]) == pytest.approx(int(r["age_steps"]) / 48)
        assert {"b0", "b1"} <= set(r)
    r2 = [float(r["r2"]) for r in rows]
    assert r2 == sorted(r2, reverse=True)


def test_unreadable_input(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code, _, err = run(["scan", "--input", missing], capsys)
    assert code == 2
    assert str(missing) in err


def test_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,v\n2020-01-01T00:00:00,1\n2020-01-01T00:30:00,oops\n")
    code, _, err = run(["stats", "--input", bad], capsys)
    assert code == 2 and "line 3" in err


@pytest.mark.parametrize("args", [
    ["scan", "--input", "x.csv", "--window", "abc"],
    ["scan", "--input", "x.csv", "--bogus"],
    ["scan"],
    ["frobnicate"],
])
def test_invalid_arguments(args, capsys):
    assert run(args, capsys)[0] == 3


def test_invalid_parameter_values(wind_csv, capsys):
    assert run(["forecast", "--input", wind_csv, "--degree", 7], capsys)[0] == 3
    assert run(["forecast", "--input", wind_csv, "--window", 10, "--horizon", 20], capsys)[0] == 3
    assert run(["forecast", "--input", wind_csv, "--format", "xml"], capsys)[0] == 3
    assert run(["backtest", "--input", wind_csv], capsys)[0] == 3


def test_algorithm_error(wind_csv, capsys):
    code, _, err = run(["forecast", "--input", wind_csv, "--window", 2000], capsys)
    assert code == 1 and "InsufficientData" in err
    code, _, err = run(["forecast", "--input", wind_csv, "--matches", 500], capsys)
    assert code == 1 and "TooFewMatches" in err


def test_forecast_records(wind_csv, capsys):
    code, out, _ = run(["forecast", "--input", wind_csv, "--window", 72, "--horizon", 48,
                        "--matches", 7], capsys)
    assert code == 0
    data = json.loads(out)
    assert len(data["forecast"]) == 48
    first = data["forecast"][0]
    assert first["step"] == 1
    assert first["timestamp"] == (datetime(2015, 1, 1) + 48 * 60 * timedelta(minutes=30)).isoformat()
    assert set(first) == {"step", "timestamp", "point", "q1", "median", "q3", "lo", "hi"}
    matches = data["metadata"]["matches"]
    assert len(matches) == 7
    assert [m["r2"] for m in matches] == sorted((m["r2"] for m in matches), reverse=True)
    assert "projections" not in data


def test_forecast_json_csv_parity(wind_csv, tmp_path, capsys):
    base = ["forecast", "--input", wind_csv, "--matches", 9, "--degree", 2, "--all-projections"]
    run(base + ["--output", tmp_path / "f.json"], capsys)
    run(base + ["--format", "csv", "--output", tmp_path / "f.csv"], capsys)
    run(base + ["--format", "tidy", "--output", tmp_path / "f.tidy.csv"], capsys)
    data = json.loads((tmp_path / "f.json").read_text())
    meta, rows = read_csv_with_comments((tmp_path / "f.csv").read_text())
    assert meta == [data["metadata"]]
    proj = np.array(data["projections"])
    assert proj.shape == (9, 48)
    for rec, row in zip(data["forecast"], rows):
        for key in ("point", "q1", "median", "q3", "lo", "hi"):
            assert float(row[key]) == rec[key]
        assert row["timestamp"] == rec["timestamp"]
    for k in range(9):
        assert [float(r[f"match_{k + 1}"]) for r in rows] == list(proj[k])
    tidy = list(csv.DictReader(open(tmp_path / "f.tidy.csv")))
    assert len(tidy) == 48 * 6 + 9 * 48
    lookup = {(int(r["step"]), r["series"]): float(r["value"]) for r in tidy}
    assert lookup[(3, "q3")] == data["forecast"][2]["q3"]
    assert lookup[(5, "match_2")] == proj[1, 4]


def test_forecast_clamp(tmp_path, capsys):
    path = write_csv(tmp_path / "neg.csv", sinusoid(600, period=48, amplitude=3.0))
    code, out, _ = run(["forecast", "--input", path, "--matches", 3, "--clamp-floor", 0], capsys)
    assert code == 0
    recs = json.loads(out)["forecast"]
    assert min(r["lo"] for r in recs) == 0.0
    assert all(r["point"] >= 0 for r in recs)


def test_config_file_and_precedence(wind_csv, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": str(wind_csv), "window": 96, "matches": 4,
                               "min-sep": 10, "format": "json"}))
    code, out, _ = run(["forecast", "--config", cfg], capsys)
    assert code == 0
    params = json.loads(out)["metadata"]["params"]
    assert (params["w"], params["m"], params["min_separation"]) == (96, 4, 10)
    code, out, _ = run(["forecast", "--config", cfg, "--matches", 6], capsys)
    assert json.loads(out)["metadata"]["params"]["m"] == 6
    cfg.write_text(json.dumps({"input": str(wind_csv), "nonsense": 1}))
    assert run(["forecast", "--config", cfg], capsys)[0] == 3


def test_select_command(wind_csv, capsys):
    code, out, _ = run(["select", "--input", wind_csv, "--grid-windows", "48,96",
                        "--grid-degrees", "1,2", "--grid-matches", "5,10"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["horizon"] == 48 and len(data["table"]) == 8
    assert sum(r["selected"] for r in data["table"]) == 1


def test_backtest_row_arithmetic(tmp_path, capsys):
    vals = wind_like(48 * 80, seed=12)
    path = write_csv(tmp_path / "w.csv", vals)
    idx = ",".join(str(48 * (40 + 2 * i)) for i in range(20))
    code, out, _ = run(["backtest", "--input", path, "--eval-indices", idx, "--with-naive",
                        "--format", "csv", *SMALL_GRID], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 42
    assert sum(r["index"] == "mean" for r in rows) == 2
    agg = {r["method"]: float(r["mae"]) for r in rows if r["index"] == "mean"}
    assert agg["dtsf"] < agg["naive"]


def test_backtest_naive_exact_on_period_48(tmp_path, capsys):
    vals = np.tile(6 + 2 * sinusoid(48, period=48), 40)
    path = write_csv(tmp_path / "p.csv", vals)
    code, out, _ = run(["backtest", "--input", path, "--eval-dates", "2015-01-30,2015-02-03",
                        "--with-naive", *SMALL_GRID], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["horizon"] == 48
    assert [r["index"] for r in data["rows"]] == [48 * 29, 48 * 29, 48 * 33, 48 * 33]
    assert data["rows"][0]["timestamp"] == "2015-01-30T00:00:00"
    assert data["aggregate"]["naive"]["mae"] == 0.0


def test_backtest_bad_date(wind_csv, capsys):
    code, _, err = run(["backtest", "--input", wind_csv, "--eval-dates", "2030-01-01"], capsys)
    assert code == 3 and "2030-01-01" in err


def test_identical_runs_are_byte_identical(wind_csv, tmp_path, capsys):
    for cmd in (["forecast", "--all-projections"], ["scan"],
                ["backtest", "--eval-indices", "2400,2600", "--with-naive", "--no-timing",
                 *SMALL_GRID]):
        outs = []
        for k in range(2):
            target = tmp_path / f"run{k}.out"
            assert run([*cmd, "--input", wind_csv, "--output", target], capsys)[0] == 0
            outs.append(target.read_bytes())
        assert outs[0] == outs[1]


def test_failed_run_writes_nothing(wind_csv, tmp_path, capsys):
    target = tmp_path / "out.json"
    assert run(["forecast", "--input", wind_csv, "--matches", 500, "--output", target],
               capsys)[0] == 1
    assert not target.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["wind.csv"]


def test_parse_duration():
    assert parse_duration("30min") == timedelta(minutes=30)
    assert parse_duration("1800") == timedelta(minutes=30)
    assert parse_duration("0.5h") == timedelta(minutes=30)
    assert parse_duration("1d") == timedelta(days=1)
    with pytest.raises(ValueError):
        parse_duration("soon")


def test_module_entry_point(periodic_csv):
    proc = subprocess.run([sys.executable, "-m", "dtsf", "stats", "--input", str(periodic_csv)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["length"] == 48 * 30
