"""Run every bundled preset through the command line into one output tree."""

import argparse
import time
from pathlib import Path

from timing_games import cli
from timing_games.config import PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--paths", type=int, help="override every preset's path count")
    args = ap.parse_args()
    extra = ["--paths", str(args.paths)] if args.paths else []
    for name in PRESETS:
        t = time.perf_counter()
        code = cli.main(["run", "--preset", name, "--out", str(Path(args.out) / name), *extra])
        print(f"  exit {code} in {time.perf_counter() - t:.1f} s")


if __name__ == "__main__":
    main()
