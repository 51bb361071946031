"""Binomial Snell-envelope follower value against the closed form across start states."""

import argparse

import numpy as np

from timing_games.models.gbm_entry import GbmEntryParams, gbm_closed_forms, lattice_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--states", type=int, default=20)
    args = ap.parse_args()
    p = GbmEntryParams()
    cf = gbm_closed_forms(p)
    states = np.linspace(0.0, 2 * cf.xF, args.states + 2)[1:-1]
    print(f"xP={cf.xP:.9f} xF={cf.xF:.9f}")
    print(f"{'x0':>10} {'lattice':>12} {'closed':>12} {'rel_err':>9} stop")
    rows = lattice_check(p, states, args.steps, args.horizon)
    for r in rows:
        print(f"{r.x0:10.6f} {r.lattice_value:12.6f} {r.closed_form:12.6f} {r.rel_error:9.2e} {int(r.stop_at_root)}")
    print(f"max relative error {max(r.rel_error for r in rows):.2e}")


if __name__ == "__main__":
    main()
