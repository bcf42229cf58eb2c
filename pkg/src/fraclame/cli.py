"""Command line runner: ``fraclame <config> [--out DIR] [--seed K] [--threads T]``.

Exit codes: 0 all assertions hold, 1 an assertion failed, 2 the
configuration was rejected, 3 a solver failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _set_threads(threads):
    # must run before numpy is first imported to have any effect
    if threads is None:
        threads = os.environ.get("FRACLAME_THREADS")
    if threads:
        for var in _THREAD_VARS:
            os.environ[var] = str(int(threads))
    return int(threads) if threads else None


def _fmt(v):
    if isinstance(v, (bool, str)):
        return str(v)
    if isinstance(v, int) or (hasattr(v, "dtype") and v.dtype.kind in "iu"):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_field(path: Path, u):
    """Header ``n N L``; then one line ``i [j] u_1 ... u_n`` per node."""
    import numpy as np

    g = u.grid
    idx = np.indices(g.shape).reshape(g.dim, -1).T
    vals = u.node_values()
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{g.dim} {g.N} {_fmt(g.box_length)}\n")
        for ij, v in zip(idx, vals):
            fh.write(" ".join([str(int(i)) for i in ij] + [_fmt(x) for x in v]) + "\n")


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def run(cfg, out_dir: Path | None = None) -> tuple[int, dict]:
    """Run one experiment, write its artifacts and return ``(exit_code, report)``."""
    from .experiments import DRIVERS
    from .config import as_dict
    from .nonlocal_form import CoefficientError
    from .solver import SolverError

    out_dir = Path(cfg.out if out_dir is None else out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"experiment": cfg.experiment, "parameters": as_dict(cfg), "headline": {}, "assertions": [],
              "artifacts": []}
    t0 = time.perf_counter()
    try:
        outcome = DRIVERS[cfg.experiment](cfg)
    except (SolverError, CoefficientError) as exc:
        report.update(status="solver-failure", error=str(exc), elapsed_seconds=time.perf_counter() - t0)
        _dump(out_dir, report)
        return EXIT_SOLVER, report
    for name, (header, rows) in outcome.tables.items():
        write_csv(out_dir / f"{name}.csv", header, rows)
        report["artifacts"].append(f"{name}.csv")
    for name, u in outcome.fields.items():
        write_field(out_dir / f"{name}.txt", u)
        report["artifacts"].append(f"{name}.txt")
    report["headline"] = outcome.headline
    report["assertions"] = outcome.assertions
    report["status"] = "passed" if outcome.passed else "failed"
    report["elapsed_seconds"] = time.perf_counter() - t0
    _dump(out_dir, report)
    return (EXIT_OK if outcome.passed else EXIT_ASSERTION), report


def _dump(out_dir: Path, report: dict):
    with open(out_dir / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraclame", description="Run a fractional Lame experiment from a config file.")
    p.add_argument("config", help="path to a key = value configuration file")
    p.add_argument("--out", help="output directory (overrides the config's 'out')")
    p.add_argument("--seed", type=int, help="random seed (overrides the config's 'seed')")
    p.add_argument("--threads", type=int, help="BLAS/OpenMP thread count (also FRACLAME_THREADS)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = _set_threads(args.threads)
    from .config import ConfigError, parse_config

    try:
        cfg = parse_config(args.config)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        for v in exc.violations:
            print(f"{args.config}: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    code, report = run(cfg, Path(args.out) if args.out else None)
    report_threads = threads if threads is not None else "default"
    for a in report["assertions"]:
        mark = "PASS" if a["passed"] else "FAIL"
        crit = f"A{a['criterion']}" if a["criterion"] is not None else "--"
        value, threshold = _jsonable(a["value"]), _jsonable(a["threshold"])
        print(f"{mark} {crit} {a['name']}: value={value} threshold={threshold}")
    print(f"{cfg.experiment}: {report['status']} (threads={report_threads}, exit {code})")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
