"""Run every experiment with its config in configs/ and collect the CSVs.

    python3 scripts/run_all.py [--out results] [--only fixation duality]
"""
import argparse
import pathlib
import sys
import time

from sbcoal.cli import main as sbcoal
from sbcoal.experiments import EXPERIMENTS

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(ROOT / "results"))
    parser.add_argument("--only", nargs="*", choices=EXPERIMENTS, default=list(EXPERIMENTS))
    parser.add_argument("--threads", type=int, default=0)
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name in args.only:
        started = time.perf_counter()
        code = sbcoal([
            name,
            "--config", str(ROOT / "configs" / f"{name}.toml"),
            "--threads", str(args.threads),
            "--out", str(out / f"{name}.csv"),
            "--json", str(out / f"{name}.json"),
        ])
        status = {0: "pass", 1: "FAIL", 2: "config error"}[code]
        print(f"{name:<24}{status:<14}{time.perf_counter() - started:8.1f}s", flush=True)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
