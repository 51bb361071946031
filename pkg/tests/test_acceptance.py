"""Acceptance criteria; each test prints one ``PASS``/``FAIL criterion N`` line.

Run alone with ``pytest tests/test_acceptance.py -v``.  The Monte Carlo
criteria (8, 10, 11) are marked slow and take several minutes.
"""

import json
import math
import time

import numpy as np
import pytest

from timing_games import cli
from timing_games.config import PRESETS
from timing_games.equilibrium import construct_spe, default_deviation_class, indifference_alpha, verify_equilibrium
from timing_games.models.gbm_entry import GbmEntryParams, beta1, build_gbm_entry, gbm_closed_forms, lattice_check
from timing_games.models.grab_dollar import GrabDollarParams, build_grab_dollar
from timing_games.oracles import (
    simultaneous_ratio_battery,
    changevar_battery,
    stage_battery,
    stage_simulation_battery,
    symmetric_half_battery,
)
from timing_games.payoff import batch_payoff, mc_map

GBM = GbmEntryParams()
CF = gbm_closed_forms(GBM)


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def timed(fn, *a, **kw):
    t = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t


def test_c01_measure_identities(capsys):
    checks, dt = timed(stage_battery)
    worst = max(c.value for c in checks)
    report(capsys, 1, all(c.passed for c in checks) and dt < 1.0, f"max error {worst:.2e} on 101x101 grid, {dt:.3f} s")


def test_c02_stage_limit_simulation(capsys):
    checks, dt = timed(stage_simulation_battery, 0.3, 0.5, 1_000_000, 0)
    z = max(c.value for c in checks)
    ok = all(c.passed for c in checks) and dt < 10.0
    report(capsys, 2, ok, f"max |z| {z:.2f} (limit 4) over 1e6 trials, {dt:.2f} s")


def test_c03_symmetric_half_rule(capsys):
    checks = symmetric_half_battery(tol=1e-9)
    out = checks[0]
    report(capsys, 3, all(c.passed for c in checks), f"outcome error {out.value:.1e}, payoff error {checks[1].value:.1e}")


def test_c04_simultaneous_ratio(capsys):
    (c,) = simultaneous_ratio_battery(1000, 1e-9)
    report(capsys, 4, c.passed, f"max ratio error {c.value:.2e} over 1000 seeds")


def test_c05_change_of_variable(capsys):
    (c,), dt = timed(changevar_battery, 1000, 50, 1e-9)
    report(capsys, 5, c.passed and dt < 5.0, f"max |direct - inverse| {c.value:.2e} over 1000 fixtures, {dt:.2f} s")


def test_c06_gbm_closed_forms(capsys):
    b = beta1(GBM.r, GBM.mu, GBM.sigma)
    e_b = abs(b - math.sqrt(2))
    e_f = abs(CF.xF - 0.02 * (2 + math.sqrt(2)))
    res = abs(float(CF.L_of_x(CF.xP) - CF.F_of_x(CF.xP)))
    x = np.linspace(CF.xF / 100, 2 * CF.xF, 100)
    d = CF.L_of_x(x) - CF.F_of_x(x)
    signs = (
        np.all(d[x < CF.xP] < 0)
        and np.all(d[(x > CF.xP) & (x < CF.xF)] > 0)
        and np.all(np.abs(d[x >= CF.xF]) < 1e-12)
    )
    ok = e_b < 1e-10 and e_f < 1e-12 and res < 1e-10 and bool(signs)
    report(capsys, 6, ok, f"beta1 error {e_b:.1e}, xF error {e_f:.1e}, xP={CF.xP:.9f} residual {res:.1e}, sign pattern {'ok' if signs else 'broken'}")


def test_c07_lattice_vs_closed_form(capsys):
    states = np.linspace(0.0, 2 * CF.xF, 22)[1:-1]
    rows, dt = timed(lattice_check, GBM, states, 2000, 50.0)
    worst = max(r.rel_error for r in rows)
    report(capsys, 7, worst < 0.01 and dt < 30.0, f"max relative error {worst:.2e} over {len(rows)} states, {dt:.1f} s")


@pytest.mark.slow
def test_c08_gbm_spe(capsys):
    starts = {"0.5xP": 0.5 * CF.xP, "xP": CF.xP, "mid": 0.5 * (CF.xP + CF.xF), "xF": CF.xF, "1.5xF": 1.5 * CF.xF}
    from timing_games.strategy import StoppingRule

    lines, ok = [], True
    for k, (label, x0) in enumerate(starts.items()):
        m, cf = build_gbm_entry(GbmEntryParams(x0=x0))
        rep = verify_equilibrium(m, construct_spe(m, "gbm_entry"), StoppingRule("start"), default_deviation_class(m.deviation_rules()),
                                 100_000, seed=20240601 + k)
        w = rep.worst()
        good = rep.verdict
        msg = f"{label}: worst gap {w.gap:.2e}"
        if x0 < cf.xP:
            est, comp = rep.payoffs[0], rep.comparators[0]
            z = (est.mean - comp) / est.std_error
            good = good and abs(z) <= 4
            msg += f", payoff {est.mean:.5f} vs {comp:.5f} ({z:+.2f} SE)"
        ok = ok and good
        lines.append(msg)
    report(capsys, 8, ok, "; ".join(lines))


def test_c09_grab_dollar_indifference(capsys):
    m = build_grab_dollar(GrabDollarParams())
    fam = construct_spe(m, "grab_dollar")
    worst_pay, worst_alpha = 0.0, 0.0
    for rule in m.catalog:
        def fn(batch, rule=rule):
            theta = rule.first_index(batch)
            s1, s2 = fam.strategies(batch, theta)
            K = batch.grid.K
            rows = np.arange(batch.n_paths)
            k = np.minimum(theta, K - 1)
            # each player's intensity is the one that leaves the opponent indifferent
            a1 = indifference_alpha(batch.L[1, rows, k], batch.F[1, rows, k], batch.M[1, rows, k])
            a2 = indifference_alpha(batch.L[0, rows, k], batch.F[0, rows, k], batch.M[0, rows, k])
            live = theta < K
            e = np.where(live, np.maximum(np.abs(s1.alpha[rows, k] - a1), np.abs(s2.alpha[rows, k] - a2)), 0.0)
            return np.stack([np.max(np.abs(batch_payoff(batch, s1, s2)), axis=0), e])

        vals = mc_map(m.sample, fn, 10_000, seed=20240602)
        worst_pay = max(worst_pay, float(vals[0].max()))
        worst_alpha = max(worst_alpha, float(vals[1].max()))
    ok = worst_pay < 1e-12 and worst_alpha < 1e-12
    report(capsys, 9, ok, f"{len(m.catalog)} subgames x 1e4 paths: max |payoff - F| {worst_pay:.1e}, max alpha error {worst_alpha:.1e}")


@pytest.fixture(scope="module")
def preset_runs(tmp_path_factory):
    """Every preset run twice through the command line; returns {name: (exit codes, dirs)}."""
    base = tmp_path_factory.mktemp("presets")
    out = {}
    for name in PRESETS:
        codes, dirs = [], []
        for k in (1, 2):
            d = base / f"{name}_{k}"
            codes.append(cli.main(["run", "--preset", name, "--out", str(d)]))
            dirs.append(d)
        out[name] = (codes, dirs)
    return out


@pytest.mark.slow
def test_c10_jump_counterexample(capsys, preset_runs):
    codes, dirs = preset_runs["jump"]
    body = json.loads((dirs[0] / "report.json").read_text())
    diag = body["diagnostics"]
    bound, total = diag["payoff_bound"]["exact"], diag["immediate_total"]["exact"]
    exact_ok = bound == "67/20" and total == "7/2" and diag["wait_profile_rejected"]
    drift = diag["drift"]
    drift_ok = all(v["passed"] for v in drift.values())
    verdicts = {k: sorted({p["verdict"] for p in v["pairs"]}) for k, v in drift.items()}
    wait_codes, _ = preset_runs["jump_wait_until_T"]
    spe_ok = codes[0] == 0 and wait_codes[0] == 1
    ok = exact_ok and drift_ok and spe_ok
    report(capsys, 10, ok, f"bound {bound} < {total}; drift {verdicts} on 1e5 paths; immediate_stop exit {codes[0]}, wait_until_T exit {wait_codes[0]}")


@pytest.mark.slow
def test_c11_determinism(capsys, preset_runs):
    diffs = []
    for name, (_, dirs) in preset_runs.items():
        files = [sorted(p.name for p in d.iterdir() if p.name != "metadata.json") for d in dirs]
        if files[0] != files[1]:
            diffs.append(f"{name}: file sets differ")
            continue
        diffs += [f"{name}/{f}" for f in files[0] if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()]
    report(capsys, 11, not diffs, f"{len(preset_runs)} presets run twice; differing files: {diffs or 'none'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
