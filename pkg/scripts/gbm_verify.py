"""Equilibrium verification of the GBM entry model from several start states."""

import argparse

from timing_games.equilibrium import construct_spe, default_deviation_class, verify_equilibrium
from timing_games.models.gbm_entry import GbmEntryParams, build_gbm_entry, gbm_closed_forms
from timing_games.strategy import StoppingRule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    cf = gbm_closed_forms(GbmEntryParams())
    starts = {"0.5xP": 0.5 * cf.xP, "xP": cf.xP, "mid": 0.5 * (cf.xP + cf.xF), "xF": cf.xF, "1.5xF": 1.5 * cf.xF}
    for k, (label, x0) in enumerate(starts.items()):
        m, _ = build_gbm_entry(GbmEntryParams(x0=x0))
        dc = default_deviation_class(m.deviation_rules())
        rep = verify_equilibrium(m, construct_spe(m, "gbm_entry"), StoppingRule("start"), dc, args.paths, args.seed + k)
        est, comp = rep.payoffs[0], rep.comparators[0]
        w = rep.worst()
        z = (est.mean - comp) / est.std_error if est.std_error > 0 else 0.0
        print(f"{label:6s} x0={x0:.6f} payoff {est.mean:.6f} +- {est.std_error:.6f} comparator {comp:.6f} ({z:+.2f} SE) "
              f"worst gap {w.gap:.2e} [{w.deviation}] {'pass' if rep.verdict else 'FAIL'}")


if __name__ == "__main__":
    main()
