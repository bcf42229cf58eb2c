"""Run every config in configs/ and print one status line per experiment."""
import argparse
import sys
import time
from pathlib import Path

from fraclame.cli import run
from fraclame.config import parse_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", default=str(ROOT / "configs"))
    ap.add_argument("--out", default=str(ROOT / "out"))
    args = ap.parse_args()
    worst = 0
    t0 = time.perf_counter()
    for path in sorted(Path(args.configs).glob("*.cfg")):
        code, report = run(parse_config(path), Path(args.out) / path.stem)
        failed = [a["name"] for a in report["assertions"] if not a["passed"]]
        print(f"{path.stem:22s} exit {code}  {report['status']:8s} {report['elapsed_seconds']:7.2f}s  {' '.join(failed)}")
        worst = max(worst, code)
    print(f"total {time.perf_counter() - t0:.1f}s")
    return worst


if __name__ == "__main__":
    sys.exit(main())
