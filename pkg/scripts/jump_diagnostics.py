"""Exact payoff-bound checks and drift classification for the catch-up jump model."""

import argparse

from timing_games.config import load_preset
from timing_games.models.jump import JumpModelParams, jump_diagnostics
from timing_games.scenario import build_instances, jump_drift


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20240603)
    args = ap.parse_args()
    for k, v in jump_diagnostics(JumpModelParams()).items():
        print(f"{k:24s} {v}")
    cfg = load_preset("jump", {"seed": args.seed})
    cfg = cfg.model_copy(update={"drift": cfg.drift.model_copy(update={"paths": args.paths})})
    for name, res in jump_drift(cfg, build_instances(cfg)[0]).items():
        verdicts = ", ".join(f"[{p['from_time']:g},{p['to_time']:g}] {p['verdict']}" for p in res["pairs"])
        print(f"{name}: expected {res['expected']}: {verdicts}")


if __name__ == "__main__":
    main()
