"""Scenario orchestration: build models from a config, run checks, write reports.

``report.json`` depends only on the config and seed; wall-clock data goes to
``metadata.json``.  CSV floats use 17 significant digits.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import platform
import sys
import traceback
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, to_dataclass
from .equilibrium import construct_spe, default_deviation_class, verify_equilibrium
from .errors import ConfigurationError
from .lattice import drift_classify, lattice_to_csv, snell_envelope
from .outcome import resolve_outcomes
from .strategy import check_family_consistency, check_time_consistency, validate_strategy

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

MODULE_OF_FILE = {
    "outcome": "outcome_kernel",
    "grid": "strategy_model",
    "strategy": "strategy_model",
    "payoff": "payoff_engine",
    "lattice": "stopping_solver",
    "equilibrium": "equilibrium_lab",
    "oracles": "cli_reporting",
    "config": "cli_reporting",
    "scenario": "cli_reporting",
    "cli": "cli_reporting",
}

DEFAULT_STARTS = (("xP", 0.5), ("xP", 1.0), ("mid", 1.0), ("xF", 1.0), ("xF", 1.5))
JUMP_EXPECTED_DRIFT = {"L2": "submartingale", "X1": "supermartingale", "X2": "supermartingale"}


def module_of(exc: BaseException) -> str:
    """Package module where ``exc`` was raised, named by its role."""
    name = "cli_reporting"
    for fr in traceback.extract_tb(exc.__traceback__):
        p = Path(fr.filename)
        if "timing_games" not in p.parts:
            continue
        name = "models" if "models" in p.parts else MODULE_OF_FILE.get(p.stem, name)
    return name


def fmt(x) -> str:
    if x is None:
        return ""
    return "%.17g" % float(x)


def jsonable(obj):
    """Plain JSON types; fractions keep their exact value, non-finite floats become strings."""
    if isinstance(obj, Fraction):
        return {"exact": str(obj), "float": float(obj)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class Instance:
    """One concrete model; GBM scenarios have one per start state."""

    label: str
    model: object
    params: object
    extra: dict = field(default_factory=dict)


@dataclass
class RunReport:
    command: str
    body: dict
    passed: bool
    files: dict[str, str] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_PASS if self.passed else EXIT_FAIL

    def write(self, out_dir, cfg: ScenarioConfig | None = None):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (out / name).write_text(text, encoding="utf-8", newline="")
        (out / "report.json").write_text(dumps(self.body), encoding="utf-8", newline="")
        meta = {
            "command": self.command,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "package_version": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "platform": platform.platform(),
            "config_hash": cfg.content_hash() if cfg is not None else None,
        }
        (out / "metadata.json").write_text(dumps(meta), encoding="utf-8", newline="")


def _grid_kwargs(cfg: ScenarioConfig) -> dict:
    kw = {}
    if cfg.grid.horizon is not None:
        kw["horizon"] = cfg.grid.horizon
    if cfg.grid.steps is not None:
        kw["steps"] = cfg.grid.steps
    if cfg.chunk_size is not None:
        kw["chunk_size"] = cfg.chunk_size
    return kw


def gbm_start_states(cfg: ScenarioConfig, cf) -> list[tuple[str, float]]:
    anchors = {"abs": 1.0, "xP": cf.xP, "xF": cf.xF, "mid": 0.5 * (cf.xP + cf.xF)}
    if cfg.starts is None:
        specs = [(of, f) for of, f in DEFAULT_STARTS]
    else:
        specs = [(s.of, s.factor) for s in cfg.starts]
    return [(f"{f:g}*{of}" if of != "abs" else f"{f:g}", f * anchors[of]) for of, f in specs]


def build_instances(cfg: ScenarioConfig) -> list[Instance]:
    """Models for a config; parameter problems surface as :class:`ModelError`."""
    from .models.fixtures import build_deterministic
    from .models.gbm_entry import build_gbm_entry, gbm_closed_forms
    from .models.grab_dollar import build_grab_dollar
    from .models.jump import build_jump_model

    rules = cfg.rules()
    kw = _grid_kwargs(cfg)
    known = {"gbm_entry": ("P", "M", "PM"), "grab_dollar": ("X_high", "X_low"), "jump": ("P", "pre"), "deterministic": ()}[cfg.model]
    for r in rules or ():
        if r.kind == "at_hit" and r.value not in known:
            raise ConfigurationError(f"subgames: region {r.value!r} unknown to {cfg.model}; known: {list(known)}")
    if cfg.model == "gbm_entry":
        cf = gbm_closed_forms(to_dataclass(cfg))
        out = []
        for label, x0 in gbm_start_states(cfg, cf):
            p = to_dataclass(cfg, x0)
            model, cf = build_gbm_entry(p, catalog=rules, n_rules=cfg.deviation_rules, **kw)
            out.append(Instance(label, model, p, {"closed_forms": cf}))
        return out
    p = to_dataclass(cfg)
    if cfg.model == "grab_dollar":
        return [Instance("-", build_grab_dollar(p, catalog=rules, n_rules=cfg.deviation_rules, **kw), p)]
    if cfg.model == "jump":
        model, diag = build_jump_model(p, catalog=rules, n_rules=cfg.deviation_rules, **kw)
        return [Instance("-", model, p, {"diagnostics": diag})]
    if cfg.grid.horizon is not None or cfg.grid.steps is not None:
        raise ConfigurationError("grid: the deterministic fixture takes its grid from params")
    return [Instance("-", build_deterministic(p, catalog=rules, n_rules=cfg.deviation_rules), p)]


def _family(cfg: ScenarioConfig, inst: Instance):
    return construct_spe(inst.model, cfg.family or inst.model.default_family)


def _header(cfg: ScenarioConfig, command: str) -> dict:
    return {
        "command": command,
        "config": cfg.model_dump(mode="json"),
        "config_hash": cfg.content_hash(),
        "package_version": __version__,
    }


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- validate


def validate_scenario(cfg: ScenarioConfig, sample_paths: int = 200) -> RunReport:
    """Feasibility of every catalog strategy and time consistency between catalog starts."""
    body = _header(cfg, "validate")
    body["instances"] = []
    ok = True
    for inst in build_instances(cfg):
        fam = _family(cfg, inst)
        m = inst.model
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
        batch = m.sample(1 if m.deterministic else min(sample_paths, cfg.paths), rng)
        feas = {}
        for rule in m.catalog:
            reps = [validate_strategy(s) for s in fam.at(batch, rule)]
            feas[rule.name] = [len(r.violations) for r in reps]
            ok &= all(r.valid for r in reps)
        tc = []
        for r0 in m.catalog:
            for r1 in m.catalog:
                if r0 == r1:
                    continue
                k0, k1 = r0.first_index(batch), r1.first_index(batch)
                idx = np.flatnonzero(k0 <= k1)
                if idx.size == 0:
                    continue
                sub = batch.rows(idx)
                rep = check_time_consistency(fam, sub, r0, r1)
                same = check_family_consistency(fam, batch, r0, r1)
                tc.append({
                    "from": r0.name,
                    "to": r1.name,
                    "paths_checked": rep.paths_checked,
                    "violations": len(rep.violations) + len(same.violations),
                })
                ok &= rep.consistent and same.consistent
        problems = batch.assumption_problems()
        ok &= not problems
        body["instances"].append({
            "label": inst.label,
            "family": fam.name,
            "sample_paths": batch.n_paths,
            "feasibility_violations": feas,
            "time_consistency": tc,
            "assumption_problems": problems,
        })
    body["summary"] = {"pass": bool(ok)}
    return RunReport("validate", body, bool(ok))


# ---------------------------------------------------------------- verify / run


def _comparator_checks(rep, abs_tol, tol_sd) -> list[dict]:
    out = []
    for est, comp in zip(rep.payoffs, rep.comparators):
        if comp is None:
            out.append({"comparator": None, "difference": None, "passed": None})
            continue
        diff = est.mean - comp
        out.append({"comparator": comp, "difference": diff, "passed": bool(abs(diff) <= max(abs_tol, tol_sd * est.std_error))})
    return out


def _verify_instances(cfg: ScenarioConfig, instances) -> tuple[list[dict], list[str], list, list]:
    tol = cfg.tolerances
    entries, failures, pay_rows, gap_rows = [], [], [], []
    for inst in instances:
        m = inst.model
        fam = _family(cfg, inst)
        dc = default_deviation_class(m.deviation_rules())
        subs = []
        for rule in m.catalog:
            rep = verify_equilibrium(m, fam, rule, dc, cfg.paths, cfg.seed, tol.abs_tol, tol.tol_sd, cfg.chunk_size)
            comps = _comparator_checks(rep, tol.abs_tol, tol.tol_sd)
            d = rep.to_dict()
            d["comparator_checks"] = comps
            subs.append(d)
            tag = f"{inst.label}/{rule.name}"
            if not rep.verdict:
                w = rep.worst()
                failures.append(f"{tag}: player {w.player} gains {w.gap:.6g} (SE {w.std_error:.3g}) by {w.deviation}")
            for p, (est, c) in enumerate(zip(rep.payoffs, comps)):
                if c["passed"] is False:
                    failures.append(f"{tag}: player {p + 1} payoff {est.mean:.6g} vs comparator {c['comparator']:.6g}")
                pay_rows.append([inst.label, rule.name, p + 1, fmt(est.mean), fmt(est.std_error), fmt(c["comparator"]),
                                 "" if c["passed"] is None else int(c["passed"])])
            for g in rep.gaps:
                gap_rows.append([inst.label, rule.name, g.player, g.deviation, fmt(g.gap), fmt(g.std_error), int(g.passed)])
        entries.append({"label": inst.label, "model_info": inst.model.info, "subgames": subs})
    return entries, failures, pay_rows, gap_rows


def _outcome_rows(cfg: ScenarioConfig, instances) -> list:
    rows = []
    if cfg.outcome_rows == 0:
        return rows
    for inst in instances:
        m = inst.model
        fam = _family(cfg, inst)
        n = 1 if m.deterministic else cfg.outcome_rows
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
        batch = m.sample(n, rng)
        times = batch.grid.times
        K = batch.grid.K
        for rule in m.catalog:
            theta = rule.first_index(batch)
            s1, s2 = fam.strategies(batch, theta)
            ob = resolve_outcomes(s1.G, s2.G, s1.alpha, s2.alpha, theta, times, s1.onset, s2.onset,
                                  active=(s1.active_index, s2.active_index))
            for k in range(batch.n_paths):
                tau = int(ob.tau_hat[k])
                rows.append([inst.label, rule.name, k, int(theta[k]), tau, "inf" if tau >= K else fmt(times[tau]),
                             fmt(ob.lambda_L[0, k]), fmt(ob.lambda_L[1, k]), fmt(ob.lambda_M[k]), fmt(ob.residual[k]), int(ob.case[k])])
    return rows


def _gbm_extras(cfg: ScenarioConfig, instances) -> tuple[dict, list[str], dict]:
    from .models.gbm_entry import check_alpha_continuity, follower_lattice, lattice_check

    cf = instances[0].extra["closed_forms"]
    diag = {"beta1": cf.beta1, "xF": cf.xF, "xP": cf.xP, "xP_over_xF": cf.xP / cf.xF, **check_alpha_continuity(cf)}
    failures, files = [], {}
    ls = cfg.lattice
    if ls is not None:
        p = instances[0].params
        states = np.linspace(2.0 * cf.xF / ls.states, 2.0 * cf.xF, ls.states)
        checks = lattice_check(p, states, ls.steps, ls.horizon)
        worst = max(c.rel_error for c in checks)
        diag["lattice"] = {"steps": ls.steps, "horizon": ls.horizon, "max_rel_error": worst, "rows": checks}
        if not worst <= ls.rel_tol:
            failures.append(f"lattice: max relative error {worst:.3g} exceeds {ls.rel_tol}")
        lat, payoff, terminal, _ = follower_lattice(p, p.x0, ls.export_steps, ls.horizon)
        files["lattice.csv"] = lattice_to_csv(lat, snell_envelope(lat, payoff, terminal), payoff)
    return diag, failures, files


def jump_drift(cfg: ScenarioConfig, inst: Instance) -> dict:
    """Drift verdicts for the laggard's leader value and both stop-before-T processes."""
    from .models.jump import stop_before_T

    ds = cfg.drift
    p = inst.params
    grid = inst.model.grid
    pairs = [(grid.index_at(s), grid.index_at(t)) for s, t in ds.pairs]
    procs = {
        "L2": lambda b: b.L[1],
        "X1": lambda b: stop_before_T(b, p.r, p.c, 0),
        "X2": lambda b: stop_before_T(b, p.r, p.c, 1),
    }
    out = {}
    for name, fn in procs.items():
        res = drift_classify(inst.model.sample, fn, pairs, ds.paths, cfg.seed, ds.tol_sd)
        out[name] = {
            "expected": JUMP_EXPECTED_DRIFT[name],
            "pairs": [{"from_time": float(grid.times[r.pair[0]]), "to_time": float(grid.times[r.pair[1]]),
                       "verdict": r.verdict, "buckets": r.buckets} for r in res],
            "passed": all(r.verdict == JUMP_EXPECTED_DRIFT[name] for r in res),
        }
    return out


def _jump_extras(cfg: ScenarioConfig, instances) -> tuple[dict, list[str]]:
    inst = instances[0]
    diag = dict(inst.extra["diagnostics"])
    failures = []
    if not diag["wait_profile_rejected"]:
        failures.append("jump: payoff bound does not reject waiting until T")
    if cfg.drift is not None:
        drift = jump_drift(cfg, inst)
        diag["drift"] = drift
        failures += [f"drift {k}: expected strict {v['expected']}" for k, v in drift.items() if not v["passed"]]
    return diag, failures


def run_scenario(cfg: ScenarioConfig, verify_only: bool = False) -> RunReport:
    """Equilibrium verification at every catalog subgame plus model diagnostics.

    Passes when every deviation gap and every closed-form comparator is within
    tolerance and the model diagnostics hold.
    """
    instances = build_instances(cfg)
    command = "verify" if verify_only else "run"
    body = _header(cfg, command)
    entries, failures, pay_rows, gap_rows = _verify_instances(cfg, instances)
    body["instances"] = entries
    files = {
        "payoffs.csv": _csv(["instance", "subgame", "player", "mean", "std_error", "comparator", "comparator_pass"], pay_rows),
        "gaps.csv": _csv(["instance", "subgame", "player", "deviation", "gap", "std_error", "passed"], gap_rows),
    }
    diag = {}
    if not verify_only:
        files["outcomes.csv"] = _csv(
            ["instance", "subgame", "path", "theta_index", "tau_hat_index", "tau_hat_time", "lambda_L1", "lambda_L2", "lambda_M", "residual", "case"],
            _outcome_rows(cfg, instances),
        )
        if cfg.model == "gbm_entry":
            diag, extra, lat_files = _gbm_extras(cfg, instances)
            failures += extra
            files.update(lat_files)
        elif cfg.model == "jump":
            diag, extra = _jump_extras(cfg, instances)
            failures += extra
    body["diagnostics"] = diag
    body["summary"] = {"pass": not failures, "failures": failures}
    return RunReport(command, body, not failures, files)


# ---------------------------------------------------------------- oracle


def oracle_suite(cfg: ScenarioConfig, seeds: int = 1000, trials: int = 1_000_000) -> RunReport:
    """Independent-oracle batteries; the jump drift battery runs when the config has drift settings."""
    from .oracles import run_all

    checks = run_all(cfg.seed, seeds, trials)
    body = _header(cfg, "oracle")
    body["checks"] = [c.to_dict() for c in checks]
    failures = [f"{c.battery}.{c.metric} = {c.value:.3g} (tol {c.tolerance:g})" for c in checks if not c.passed]
    if cfg.model == "jump" and cfg.drift is not None:
        drift = jump_drift(cfg, build_instances(cfg)[0])
        body["drift"] = drift
        failures += [f"drift {k}: expected strict {v['expected']}" for k, v in drift.items() if not v["passed"]]
    body["summary"] = {"pass": not failures, "failures": failures}
    rows = [[c.battery, c.metric, fmt(c.value), fmt(c.tolerance), int(c.passed), c.detail] for c in checks]
    files = {"oracles.csv": _csv(["battery", "metric", "value", "tolerance", "passed", "detail"], rows)}
    return RunReport("oracle", body, not failures, files)


__all__ = [
    "EXIT_CONFIG",
    "EXIT_FAIL",
    "EXIT_PASS",
    "EXIT_RUNTIME",
    "RunReport",
    "build_instances",
    "jump_drift",
    "module_of",
    "oracle_suite",
    "run_scenario",
    "validate_scenario",
]
