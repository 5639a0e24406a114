"""Command line: ``nhtrap run --config cfg.json`` and ``nhtrap validate --config cfg.json``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
import traceback

import numpy as np
import scipy

from . import __version__, kernels
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NHTrapError
from .experiments import RESULT_COLUMNS, RUNNERS, Sink
from .scaling import PROFILE_DESCRIPTION
from .scaling import resonances as _res
from .weyl import COLLISION_NORM, GAP_MARGIN

THREADS_ENV = "NHTRAP_THREADS"
DEFAULT_OUTPUT = "nhtrap-output"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("nhtrap")


def fmt(value) -> str:
    """Fixed textual form for CSV cells: 17 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(value):
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if np.isfinite(v) else str(v)
    return value


def write_json_table(path, columns, rows):
    data = {"columns": list(columns), "rows": [[_jsonable(v) for v in row] for row in rows]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def thresholds() -> dict:
    return {
        "drift_floor": _res.DRIFT_FLOOR,
        "drift_rel": _res.DRIFT_REL,
        "cluster_radius": _res.CLUSTER_RADIUS,
        "sector_margin": _res.SECTOR_MARGIN,
        "collision_norm": COLLISION_NORM,
        "gap_margin_h": GAP_MARGIN,
    }


def versions() -> dict:
    return {
        "nhtrap": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "flow_backend": kernels.BACKEND,
    }


def write_meta(directory, record):
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def resolve_threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _emit(sink: Sink, directory, formats):
    written = []
    for name, (columns, rows) in sink.tables.items():
        if "csv" in formats:
            write_csv(os.path.join(directory, f"{name}.csv"), columns, rows)
            written.append(f"{name}.csv")
        if "json" in formats:
            write_json_table(os.path.join(directory, f"{name}.json"), columns, rows)
            written.append(f"{name}.json")
    return written


def run(cfg: ExperimentConfig, output=None, threads: int = 1) -> int:
    """Execute one experiment and write its files; returns the exit status."""
    directory = output or cfg.output.directory
    os.makedirs(directory, exist_ok=True)
    meta = {
        "config": cfg.to_dict(),
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "profile": PROFILE_DESCRIPTION,
        "thresholds": thresholds(),
        "versions": versions(),
        "threads": threads,
        "partial": False,
        "status": "running",
    }
    sink = Sink()
    start = time.perf_counter()
    status = EXIT_OK
    try:
        RUNNERS[cfg.experiment](cfg, sink, threads)
        meta["status"] = "ok"
    except (NHTrapError, ValueError, ArithmeticError, RuntimeError) as exc:
        status = EXIT_FAILED
        meta["status"] = "error"
        meta["partial"] = True
        meta["error"] = {"type": type(exc).__name__, "message": str(exc),
                         "traceback": traceback.format_exc(limit=5)}
        log.error("%s failed: %s", cfg.experiment, exc)
    formats = cfg.output.formats
    files = _emit(sink, directory, formats)
    if status == EXIT_OK:
        write_csv(os.path.join(directory, "results.csv"), RESULT_COLUMNS, sink.results)
        files.append("results.csv")
        if "json" in formats:
            write_json_table(os.path.join(directory, "results.json"), RESULT_COLUMNS, sink.results)
            files.append("results.json")
        failing = [r for r in sink.results if r[4] == "fail"]
        meta["checks_failed"] = len(failing)
    meta["files"] = files
    meta["elapsed_s"] = round(time.perf_counter() - start, 3)
    write_meta(directory, meta)
    return status


def _config_error(path, output, exc) -> int:
    print(f"invalid config: {exc}", file=sys.stderr)
    directory = output
    if directory is None:
        try:
            with open(path, encoding="utf-8") as fh:
                directory = json.load(fh)["output"]["directory"]
        except Exception:
            directory = None
    if not isinstance(directory, str) or not directory:
        directory = DEFAULT_OUTPUT
    write_meta(directory, {"status": "invalid_config", "partial": False,
                           "error": {"type": type(exc).__name__, "message": str(exc)},
                           "config_path": str(path), "versions": versions()})
    return EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nhtrap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output", default=None, help="output directory (overrides the config)")
    p_run.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("--config", required=True)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"invalid config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"ok: {cfg.experiment}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _config_error(args.config, args.output, exc)
    return run(cfg, args.output, resolve_threads(args.threads))


if __name__ == "__main__":
    sys.exit(main())
