"""Command line interface: ``seqcv {smooth,cv,limit,calibrate,monitor,simulate}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
degeneracy, 5 calibration bracket failure. Errors are reported on a single
stderr line ``seqcv: <code>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import Config
from .crossval import run_schedule
from .detection import calibrate_control_limit, run_detector, run_experiment
from .errors import ConfigError, DataError, DegenerateWindowError, SeqCVError
from .limit import LimitSpec, limit_argmin, limit_objective
from .simulation import mean_vector, simulate_scenario
from .smoothing import Series, loo_predictions, normed_path

log = logging.getLogger("seqcv")


# -- input / output -----------------------------------------------------------

def read_series_csv(path, column=None) -> np.ndarray:
    """Read one numeric column from a CSV file with a header row."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{p}: empty file") from None
        header = [h.strip() for h in header]
        if column is None:
            col = header.index("y") if "y" in header else 0
        elif column in header:
            col = header.index(column)
        else:
            raise DataError(f"{p}: no column named {column!r}")
        values = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values.append(float(row[col]))
            except (ValueError, IndexError):
                raise DataError(f"{p}:{lineno}: malformed row {','.join(row)!r}") from None
    if not values:
        raise DataError(f"{p}: no data rows")
    return np.array(values)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return [_jsonable(v) for v in o.tolist()]
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, float) and not np.isfinite(o):
        return None
    return o


def write_json(path: Path, obj):
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2) + "\n")


# -- subcommands --------------------------------------------------------------

def cmd_smooth(cfg: Config, args, out: Path) -> dict:
    y = read_series_csv(args.input, args.column)
    T = cfg.horizon or len(y)
    h = cfg.fixed_bandwidth(T)
    if h is None:
        h = T / 5.0
    K = cfg.kernel_obj
    try:
        loo = loo_predictions(Series(y, T), K, h)
        nm = normed_path(Series(y, T), K, h)
    except DegenerateWindowError as exc:
        raise DegenerateWindowError(f"degenerate kernel window at i={exc.index} (h={h})",
                                    index=exc.index) from None
    rows = [(i, y[i - 1], loo[i - 1], nm[i - 1]) for i in range(2, len(y) + 1)]
    write_csv(out / "smooth.csv", ["i", "y", "loo_prediction", "smoother"], rows)
    return {"rows": len(rows), "bandwidth": h, "kernel": K.name}


def cmd_cv(cfg: Config, args, out: Path) -> dict:
    y = read_series_csv(args.input, args.column)
    T = cfg.horizon or len(y)
    plan = cfg.plan(T)
    K = cfg.kernel_obj
    sched = run_schedule(Series(y, T), K, plan, threads=cfg.threads)
    rows = []
    for r in sched.results:
        for xi, v in zip(r.xi_grid, r.objective):
            rows.append((r.checkpoint, xi, v))
    write_csv(out / "cv_surface.csv", ["s", "xi", "objective"], rows)
    report = {
        "kernel": K.name,
        "horizon": T,
        "results": [r.to_dict() for r in sched.results],
        "ties": [r.checkpoint for r in sched.results if r.tie],
        "bandwidth_path": {"indices": list(sched.path.indices),
                           "bandwidths": list(sched.path.bandwidths),
                           "pilot": sched.path.pilot},
    }
    if report["ties"]:
        report["tie_notice"] = "objective tied on the grid; the smallest xi (largest bandwidth) was chosen"
    write_json(out / "cv_report.json", report)
    return {"results": len(sched.results), "ties": len(report["ties"])}


def cmd_limit(cfg: Config, args, out: Path) -> dict:
    lim = cfg.limit
    xis = [float(x) for x in lim.get("xis", cfg.xi_grid)]
    ss = [float(s) for s in lim.get("ss", [0.5, 0.75, 1.0])]
    modes = lim.get("modes", ["self_consistent", "as_printed"])
    tol = float(lim.get("tol", 1e-8))
    base = LimitSpec(cfg.kernel_obj, cfg.mean_function(), "self_consistent", tol)
    rows = []
    summary = []
    for mode in modes:
        spec = base.with_mode(mode)
        for s in ss:
            vals = [limit_objective(spec, xi, s) for xi in xis]
            rows.extend((xi, s, v, mode) for xi, v in zip(xis, vals))
            xs, rep = limit_argmin(spec, xis, s, values=vals)
            summary.append({"mode": mode, "s": s, "xi_star": xs,
                            "margins": rep.margins, "well_separated": rep.well_separated})
    write_csv(out / "limit.csv", ["xi", "s", "value", "mode"], rows)
    write_json(out / "limit_argmin.json", summary)
    return {"rows": len(rows)}


def _calibrate(cfg: Config, spec, params, model, seed):
    d = cfg.detector
    return calibrate_control_limit(
        params, model, spec,
        target_arl0=float(d.get("target_arl", 350.0)),
        replications=int(d.get("replications", 4000)),
        seed=seed,
        bracket=d.get("bracket"),
        threads=cfg.threads,
    )


def cmd_calibrate(cfg: Config, args, out: Path) -> dict:
    params = cfg.scenario_params()
    params = params.with_jump(0.0)
    spec = cfg.detector_spec(params.horizon)
    cal = _calibrate(cfg, spec, params, cfg.error_model(), cfg.seed)
    report = cal.to_dict()
    ref = cfg.detector.get("reference_limit")
    if ref is not None:
        report["reference_limit"] = float(ref)
        report["gap_to_reference"] = cal.control_limit - float(ref)
    write_json(out / "calibration.json", report)
    return report


def cmd_monitor(cfg: Config, args, out: Path) -> dict:
    params = cfg.scenario_params()
    model = cfg.error_model()
    spec = cfg.detector_spec(params.horizon)
    calibration = None
    if spec.control_limit is None:
        calibration = _calibrate(cfg, spec, params.with_jump(0.0), model, cfg.seed + 1)
        spec = spec.with_limit(calibration.control_limit)
    series = simulate_scenario(params, model, cfg.seed)
    res = run_detector(series, spec)
    mu = mean_vector(params)
    rows = [(i, mu[i - 1], series.values[i - 1], res.path[i - 1], res.bandwidth_path[i - 1],
             spec.control_limit) for i in range(1, params.horizon + 1)]
    write_csv(out / "monitor.csv", ["i", "mean", "y", "smoother", "bandwidth", "control_limit"], rows)
    summary = {"signal_index": res.signal_index, "start_index": res.start_index,
               "control_limit": spec.control_limit,
               "calibration": None if calibration is None else calibration.to_dict()}
    write_json(out / "monitor.json", summary)
    return summary


def cmd_simulate(cfg: Config, args, out: Path) -> dict:
    params = cfg.scenario_params()
    model = cfg.error_model()
    series = simulate_scenario(params, model, cfg.seed)
    mu = mean_vector(params)
    write_csv(out / "series.csv", ["t", "mean", "y"],
              [(t, mu[t - 1], series.values[t - 1]) for t in range(1, params.horizon + 1)])
    summary = {"horizon": params.horizon, "errors": model.to_dict()}
    exp = cfg.experiment
    if exp:
        spec = cfg.detector_spec(params.horizon)
        if spec.control_limit is None:
            cal = _calibrate(cfg, spec, params.with_jump(0.0), model, cfg.seed + 1)
            spec = spec.with_limit(cal.control_limit)
            summary["calibration"] = cal.to_dict()
        scale = float(exp.get("sigma", model.to_dict().get("sigma", 1.0))) \
            if exp.get("delta_units", "sigma") == "sigma" else 1.0
        deltas = [float(d) for d in exp.get("deltas", [2 / 3, 4 / 3, 2, 4])]
        rows = run_experiment([d * scale for d in deltas], params.with_jump(0.0), model, spec,
                              int(exp.get("replications", 2000)), cfg.seed + 2,
                              threads=cfg.threads)
        write_csv(out / "delays.csv", ["delta", "mean_delay", "se", "censored_frac"],
                  [(r.delta, r.mean_delay, r.se, r.censored_frac) for r in rows])
        summary["control_limit"] = spec.control_limit
    write_json(out / "simulate.json", summary)
    return summary


COMMANDS = {
    "smooth": cmd_smooth,
    "cv": cmd_cv,
    "limit": cmd_limit,
    "calibrate": cmd_calibrate,
    "monitor": cmd_monitor,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqcv", description="Sequential cross-validated kernel smoothing and change detection.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, help="worker threads; never changes the output")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("smooth", "cv"):
            p.add_argument("input", help="CSV file with a header row")
            p.add_argument("--column", help="column to read (default: 'y' or the first)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Config.load(args.config) if args.config else Config.from_dict({})
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be at least 1")
            cfg.threads = args.threads
        out = Path(args.out or cfg.output_dir)
        result = COMMANDS[args.command](cfg, args, out)
        log.info("%s: %s", args.command, result)
    except SeqCVError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"seqcv: {exc.code}: {msg}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
