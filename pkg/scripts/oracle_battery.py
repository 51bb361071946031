"""Run every oracle battery and print one row per check."""

import argparse

from timing_games.oracles import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=1000, help="randomized fixtures per battery")
    ap.add_argument("--trials", type=int, default=1_000_000, help="simulated stage games")
    args = ap.parse_args()
    checks = run_all(args.seed, args.seeds, args.trials)
    for c in checks:
        print(f"{'ok  ' if c.passed else 'FAIL'} {c.battery:16s} {c.metric:26s} {c.value:10.3e} (tol {c.tolerance:g}) {c.detail}")
    raise SystemExit(0 if all(c.passed for c in checks) else 1)


if __name__ == "__main__":
    main()
