"""Command-line interface.

Commands: ``stats``, ``scan``, ``forecast``, ``select`` and ``backtest``.
Settings come from built-in defaults, then an optional JSON ``--config``
file, then command-line flags (highest precedence).

Exit codes: 0 success, 1 algorithm error, 2 I/O or parse error,
3 invalid arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from datetime import datetime, timedelta


from .errors import AlgorithmError, IngestError
from .forecast import HyperParams, clamp, forecast_from_scan
from .scan import scan, select_matches
from .selection import Grid, backtest, holdout_select
from .series import aggregate, load_csv, summary_stats

EXIT_OK, EXIT_ALGORITHM, EXIT_IO, EXIT_ARGS = 0, 1, 2, 3
DAY = timedelta(days=1)

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(s|sec|m|min|h|d)?\s*$")
_UNITS = {None: 1, "s": 1, "sec": 1, "m": 60, "min": 60, "h": 3600, "d": 86400}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


# -- value converters: accept CLI strings and native JSON values alike -------

def _column(v):
    if isinstance(v, int):
        return v
    v = str(v)
    return int(v) if v.isdigit() else v


def _int(v):
    if isinstance(v, bool):
        raise ValueError(f"expected an integer, got {v!r}")
    if isinstance(v, float) and not v.is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _float(v):
    return float(v)


def _int_list(v):
    if isinstance(v, (list, tuple)):
        return [_int(x) for x in v]
    return [_int(x) for x in str(v).split(",") if x.strip()]


def _str_list(v):
    if isinstance(v, (list, tuple)):
        return [str(x) for x in v]
    return [x.strip() for x in str(v).split(",") if x.strip()]


def parse_duration(v) -> timedelta:
    """``"1800"``, ``"30min"``, ``"0.5h"``, ``"1d"`` -> timedelta."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return timedelta(seconds=v)
    match = _DURATION_RE.match(str(v))
    if not match:
        raise ValueError(f"cannot parse duration {v!r}")
    return timedelta(seconds=float(match.group(1)) * _UNITS[match.group(2)])


def _flag(v):
    if isinstance(v, str):
        return v.lower() in ("1", "true", "yes", "on")
    return bool(v)


# (flags, dest, converter, default, commands, help); "*" = every command
_OPTIONS = [
    (("--input",), "input", str, None, "*", "input CSV path"),
    (("--timestamp-col",), "timestamp_col", _column, 0, "*", "timestamp column (index or name)"),
    (("--value-col",), "value_col", _column, 1, "*", "value column (index or name)"),
    (("--delimiter",), "delimiter", str, ",", "*", "field delimiter"),
    (("--step",), "step", parse_duration, None, "*",
     "expected sampling step, e.g. 10min (default: inferred)"),
    (("--interpolate-gaps",), "interpolate_gaps", _flag, False, "*",
     "fill interior single missing values linearly"),
    (("--aggregate",), "aggregate", _int, 1, "*", "aggregate blocks of N observations"),
    (("--reducer",), "reducer", str, "mean", "*", "block reducer: mean or median"),
    (("--format",), "format", str, "json", "*", "output format: json, csv (forecast also: tidy)"),
    (("--output",), "output", str, None, "*", "output path (default: stdout)"),
    (("--window",), "window", _int, 48, ("scan", "forecast"), "window length w"),
    (("--horizon",), "horizon", _int, None, ("scan", "forecast", "select", "backtest"),
     "forecast horizon h (scan/forecast default: w; select/backtest default: one day)"),
    (("--degree",), "degree", _int, 1, ("scan", "forecast"), "similarity polynomial degree"),
    (("--matches",), "matches", _int, 15, ("scan", "forecast"), "number of matches m"),
    (("--min-sep",), "min_sep", _int, None, ("scan", "forecast"),
     "minimum start distance between matches (default: w)"),
    (("--aggregator",), "aggregator", str, "median", ("forecast", "select", "backtest"),
     "median or mean"),
    (("--clamp-floor",), "clamp_floor", _float, None, ("forecast",), "floor for forecasts"),
    (("--all-projections",), "all_projections", _flag, False, ("forecast",),
     "include every match's projection"),
    (("--grid-windows",), "grid_windows", _int_list, [24, 48, 72, 96, 120],
     ("select", "backtest"), "comma-separated window lengths"),
    (("--grid-degrees",), "grid_degrees", _int_list, [1, 2, 3, 4], ("select", "backtest"),
     "comma-separated degrees"),
    (("--grid-matches",), "grid_matches", _int_list, [15, 25, 50], ("select", "backtest"),
     "comma-separated match counts"),
    (("--eval-dates",), "eval_dates", _str_list, None, ("backtest",),
     "comma-separated YYYY-MM-DD days to forecast"),
    (("--eval-indices",), "eval_indices", _int_list, None, ("backtest",),
     "comma-separated forecast origins (series indices)"),
    (("--with-naive",), "with_naive", _flag, False, ("backtest",), "also score the naive baseline"),
    (("--no-timing",), "no_timing", _flag, False, ("backtest",),
     "omit wall-clock timings (byte-reproducible output)"),
    (("--jobs",), "jobs", _int, 1, ("scan", "forecast", "select", "backtest"), "worker threads"),
]
_SWITCHES = {"interpolate_gaps", "all_projections", "with_naive", "no_timing"}
COMMANDS = ("stats", "scan", "forecast", "select", "backtest")


def _options_for(cmd):
    return [o for o in _OPTIONS if o[4] == "*" or cmd in o[4]]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dtsf", description="Dynamic time scan forecasting.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON file with default settings")
        for flags, dest, conv, _default, _cmds, help_ in _options_for(cmd):
            if dest in _SWITCHES:
                sp.add_argument(*flags, dest=dest, action="store_true", help=help_)
            else:
                sp.add_argument(*flags, dest=dest, type=conv, help=help_)
    return parser


def resolve_config(argv=None) -> dict:
    """Merge defaults < config file < flags into a plain dict."""
    ns = build_parser().parse_args(argv)
    cmd = ns.command
    opts = {o[1]: o for o in _options_for(cmd)}
    cfg = {dest: o[3] for dest, o in opts.items()}
    cfg["command"] = cmd
    given = vars(ns)
    path = given.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        for key, val in data.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in opts:
                raise UsageError(f"unknown config key {key!r} for command {cmd!r}")
            try:
                cfg[dest] = None if val is None else opts[dest][2](val)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad config value for {key!r}: {exc}") from None
    given.pop("command")
    cfg.update(given)
    if not cfg.get("input"):
        raise UsageError("--input is required")
    if cfg["format"] not in ("json", "csv", "tidy") or (cfg["format"] == "tidy" and cmd != "forecast"):
        raise UsageError(f"unsupported format {cfg['format']!r} for {cmd}")
    return cfg


# -- helpers ------------------------------------------------------------------

def _num(v):
    """JSON-safe float: non-finite values become null."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _csv_num(v):
    v = _num(v)
    return "" if v is None else repr(v)


def _load(cfg):
    series = load_csv(cfg["input"], cfg["timestamp_col"], cfg["value_col"],
                      delimiter=cfg["delimiter"], step=cfg["step"],
                      interpolate=cfg["interpolate_gaps"])
    if cfg["aggregate"] != 1:
        series = aggregate(series, cfg["aggregate"], cfg["reducer"])
    return series


def _steps_per_day(series) -> int:
    ratio = DAY / series.step
    if ratio < 1 or not float(ratio).is_integer():
        raise UsageError(f"step {series.step} does not divide one day; pass --horizon")
    return int(ratio)


def _params(cfg) -> HyperParams:
    return HyperParams(w=cfg["window"], degree=cfg["degree"], m=cfg["matches"],
                       min_separation=cfg["min_sep"], aggregator=cfg.get("aggregator", "median"))


def _grid(cfg) -> Grid:
    return Grid(windows=tuple(cfg["grid_windows"]), degrees=tuple(cfg["grid_degrees"]),
                match_counts=tuple(cfg["grid_matches"]), aggregator=cfg["aggregator"])


def _table_csv(header, rows, comments=()):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _match_record(series, mt, rank):
    n = len(series)
    age = n - mt.start
    return {
        "rank": rank,
        "start": mt.start,
        "start_time": series.timestamp(mt.start).isoformat(),
        "age_steps": age,
        "age_days": age * series.step / DAY,
        "r2": _num(mt.r2),
        "coefficients": [_num(c) for c in mt.fn.coefficients],
    }


# -- commands -----------------------------------------------------------------

def cmd_stats(cfg) -> str:
    series = _load(cfg)
    s = summary_stats(series)
    rec = {"length": s.length, "mean": _num(s.mean), "sd": _num(s.sd), "min": _num(s.min),
           "max": _num(s.max), "start_time": series.start_time.isoformat(),
           "end_time": series.end_time.isoformat(),
           "step_seconds": series.step.total_seconds()}
    if cfg["format"] == "json":
        return json.dumps(rec, indent=2) + "\n"
    return _table_csv(list(rec), [[_csv_num(v) if isinstance(v, float) else v
                                   for v in rec.values()]])


def cmd_scan(cfg) -> str:
    """Selected matches with their location, age before the series end, R² and coefficients.

    Age is counted from the window start to the forecast origin (one step
    after the last observation).
    """
    series = _load(cfg)
    params = _params(cfg)
    h = cfg["horizon"] or params.w
    scanned = scan(series, params.w, h, params.degree, n_jobs=cfg["jobs"])
    matches = select_matches(scanned, params.m, params.separation)
    recs = [_match_record(series, mt, i + 1) for i, mt in enumerate(matches)]
    if cfg["format"] == "json":
        out = {"params": params.as_dict(), "series_length": len(series),
               "candidates": len(scanned), "matches": recs}
        return json.dumps(out, indent=2) + "\n"
    header = ["rank", "start", "start_time", "age_steps", "age_days", "r2"]
    header += [f"b{d}" for d in range(params.degree + 1)]
    rows = [[r["rank"], r["start"], r["start_time"], r["age_steps"], _csv_num(r["age_days"]),
             _csv_num(r["r2"]), *(_csv_num(c) for c in r["coefficients"])] for r in recs]
    return _table_csv(header, rows)


def cmd_forecast(cfg) -> str:
    series = _load(cfg)
    params = _params(cfg)
    h = cfg["horizon"] or params.w
    scanned = scan(series, params.w, h, params.degree, n_jobs=cfg["jobs"])
    result = forecast_from_scan(series, scanned, params, h)
    if cfg["clamp_floor"] is not None:
        result = clamp(result, cfg["clamp_floor"])

    n = len(series)
    fields = ("point", "q1", "median", "q3", "lo", "hi")
    stamps = [series.timestamp(n + i).isoformat() for i in range(h)]
    records = [{"step": i + 1, "timestamp": stamps[i],
                **{f: _num(getattr(result, f)[i]) for f in fields}} for i in range(h)]
    meta = {"params": params.as_dict(), "horizon": h, "origin": n,
            "origin_time": series.timestamp(n).isoformat(),
            "matches": [_match_record(series, mt, k + 1) for k, mt in enumerate(result.matches)]}
    proj = result.projections if cfg["all_projections"] else None

    if cfg["format"] == "json":
        out = {"metadata": meta, "forecast": records}
        if proj is not None:
            out["projections"] = [[_num(v) for v in row] for row in proj]
        return json.dumps(out, indent=2) + "\n"
    if cfg["format"] == "tidy":
        rows = [[r["step"], r["timestamp"], f, _csv_num(r[f])] for r in records for f in fields]
        if proj is not None:
            rows += [[i + 1, stamps[i], f"match_{k + 1}", _csv_num(proj[k, i])]
                     for k in range(proj.shape[0]) for i in range(h)]
        return _table_csv(["step", "timestamp", "series", "value"], rows)
    header = ["step", "timestamp", *fields]
    if proj is not None:
        header += [f"match_{k + 1}" for k in range(proj.shape[0])]
    rows = []
    for i, r in enumerate(records):
        row = [r["step"], r["timestamp"], *(_csv_num(r[f]) for f in fields)]
        if proj is not None:
            row += [_csv_num(v) for v in proj[:, i]]
        rows.append(row)
    return _table_csv(header, rows, comments=[json.dumps(meta, separators=(",", ":"))])


def cmd_select(cfg) -> str:
    series = _load(cfg)
    h = cfg["horizon"] or _steps_per_day(series)
    best, table = holdout_select(series, _grid(cfg), h, n_jobs=cfg["jobs"])
    rows = [{"w": r.params.w, "degree": r.params.degree, "m": r.params.m, "mae": _num(r.mae),
             "selected": r.params == best, "error": r.error} for r in table]
    if cfg["format"] == "json":
        return json.dumps({"horizon": h, "selected": best.as_dict(), "table": rows},
                          indent=2) + "\n"
    return _table_csv(["w", "degree", "m", "mae", "selected", "error"],
                      [[r["w"], r["degree"], r["m"], _csv_num(r["mae"]), int(r["selected"]),
                        r["error"] or ""] for r in rows])


def _resolve_dates(series, dates):
    points = []
    for text in dates:
        try:
            day = datetime.strptime(text, "%Y-%m-%d")
        except ValueError:
            raise UsageError(f"bad eval date {text!r}, expected YYYY-MM-DD") from None
        idx = series.index_of(day)
        if idx >= len(series) or series.timestamp(idx).date() != day.date():
            raise UsageError(f"eval date {text} has no observations in the series")
        points.append(idx)
    return points


def cmd_backtest(cfg) -> str:
    series = _load(cfg)
    if bool(cfg["eval_dates"]) == bool(cfg["eval_indices"]):
        raise UsageError("give exactly one of --eval-dates or --eval-indices")
    if cfg["eval_dates"]:
        points = _resolve_dates(series, cfg["eval_dates"])
        h = _steps_per_day(series)
    else:
        points = cfg["eval_indices"]
        h = cfg["horizon"] or _steps_per_day(series)
    report = backtest(series, points, _grid(cfg), h, with_naive=cfg["with_naive"],
                      timing=not cfg["no_timing"], n_jobs=cfg["jobs"])
    if cfg["format"] == "json":
        return report.to_json() + "\n"
    return report.to_csv()


_HANDLERS = {"stats": cmd_stats, "scan": cmd_scan, "forecast": cmd_forecast,
             "select": cmd_select, "backtest": cmd_backtest}


def _write(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dtsf-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
        text = _HANDLERS[cfg["command"]](cfg)
        _write(text, cfg["output"])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ARGS
    except UsageError as exc:
        print(f"dtsf: invalid arguments: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except IngestError as exc:
        print(f"dtsf: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AlgorithmError as exc:
        print(f"dtsf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ALGORITHM
    except OSError as exc:
        name = exc.filename if exc.filename is not None else ""
        reason = exc.strerror or str(exc)
        print(f"dtsf: I/O error: {name}: {reason}" if name else f"dtsf: I/O error: {reason}",
              file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"dtsf: invalid arguments: {exc}", file=sys.stderr)
        return EXIT_ARGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
