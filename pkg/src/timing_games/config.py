"""Scenario configuration: JSON text in, validated settings and model objects out."""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from .errors import ConfigurationError, ModelError
from .strategy import StoppingRule

MODEL_IDS = ("gbm_entry", "grab_dollar", "jump", "deterministic")
PRESETS = ("gbm_entry", "grab_dollar", "jump", "jump_wait_until_T", "deterministic")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GbmParamsSchema(_Strict):
    r: float = 0.04
    mu: float = 0.02
    sigma: PositiveFloat = 0.2
    I: PositiveFloat = 1.0
    m: float = 2.0


class GrabParamsSchema(_Strict):
    r: PositiveFloat = 0.05
    x0: PositiveFloat = 1.0
    mu: float = 0.0
    sigma: PositiveFloat = 0.2


class JumpParamsSchema(_Strict):
    r: PositiveFloat = 1.0
    lam: PositiveFloat = 1.0
    c: float = 1.2
    penalty: float = Field(0.1, ge=0.0)
    stopper: Literal[1, 2] = 1


class DeterministicParamsSchema(_Strict):
    f0: float = 1.0
    f1: float = 0.1
    gap: float = Field(0.5, ge=0.0)
    k1: float = 0.1
    s1: float = 2.0
    k2: float = 0.05
    s2: float = 3.0
    t_end: float = 10.0
    horizon: PositiveFloat = 8.0
    step: PositiveFloat = 0.01
    refine_levels: int = Field(0, ge=0, le=60)
    symmetric: bool = False


PARAM_SCHEMAS = {
    "gbm_entry": GbmParamsSchema,
    "grab_dollar": GrabParamsSchema,
    "jump": JumpParamsSchema,
    "deterministic": DeterministicParamsSchema,
}


class GridSettings(_Strict):
    horizon: PositiveFloat | None = None
    steps: PositiveInt | None = None


class StartSpec(_Strict):
    """Initial GBM state ``factor * anchor``; anchors are ``xP``, ``xF``, their midpoint, or 1 (``abs``)."""

    of: Literal["abs", "xP", "xF", "mid"] = "abs"
    factor: PositiveFloat = 1.0

    @property
    def label(self) -> str:
        return f"{self.factor:g}*{self.of}" if self.of != "abs" else f"{self.factor:g}"


class Tolerances(_Strict):
    abs_tol: float = Field(1e-6, ge=0.0)
    tol_sd: PositiveFloat = 4.0


class LatticeSettings(_Strict):
    steps: PositiveInt = 2000
    horizon: PositiveFloat = 50.0
    states: PositiveInt = 20
    rel_tol: PositiveFloat = 0.01
    export_steps: PositiveInt = 200


class DriftSettings(_Strict):
    pairs: list[tuple[float, float]] = [(0.0, 0.5), (0.5, 1.0), (1.0, 2.0), (0.0, 2.0)]
    paths: PositiveInt = 100_000
    tol_sd: PositiveFloat = 4.0


class ScenarioConfig(_Strict):
    name: str
    model: Literal["gbm_entry", "grab_dollar", "jump", "deterministic"]
    params: dict[str, Any] = {}
    seed: int = Field(ge=0)
    paths: PositiveInt = 10_000
    chunk_size: PositiveInt | None = None
    family: str | None = None
    subgames: list[str] | None = None
    starts: list[StartSpec] | None = None
    deviation_rules: PositiveInt = 32
    grid: GridSettings = GridSettings()
    tolerances: Tolerances = Tolerances()
    lattice: LatticeSettings | None = None
    drift: DriftSettings | None = None
    outcome_rows: int = Field(100, ge=0)

    def typed_params(self):
        return PARAM_SCHEMAS[self.model].model_validate(self.params)

    def rules(self) -> list[StoppingRule] | None:
        return None if self.subgames is None else [StoppingRule.parse(s) for s in self.subgames]

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


class ConfigError(ConfigurationError):
    """Field-level configuration problems; ``errors`` holds ``"field: message"`` strings."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def _fmt(err: ValidationError, prefix: str = "") -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(x) for x in (prefix, *e["loc"]) if x != "")
        out.append(f"{loc or '<root>'}: {e['msg']}")
    return out


def parse_config(text: str | bytes, overrides: dict | None = None) -> ScenarioConfig:
    """Validate JSON text; raises :class:`ConfigError` listing every field-level problem.

    ``overrides`` are applied to the decoded object before validation.
    """
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError([f"<json>: malformed JSON ({e})"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "steps":
            raw.setdefault("grid", {})
            if isinstance(raw["grid"], dict):
                raw["grid"] = {**raw["grid"], "steps": value}
        else:
            raw[key] = value
    try:
        cfg = ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(_fmt(e)) from None
    errors = []
    try:
        cfg.typed_params()
    except ValidationError as e:
        errors += _fmt(e, "params")
    if not errors:
        try:
            to_dataclass(cfg)
        except ModelError as e:
            errors.append(f"params: {e}")
    try:
        cfg.rules()
    except ValueError as e:
        errors.append(f"subgames: {e}")
    if cfg.starts is not None and cfg.model != "gbm_entry":
        errors.append("starts: only the gbm_entry model takes start states")
    if cfg.lattice is not None and cfg.model != "gbm_entry":
        errors.append("lattice: only the gbm_entry model has a lattice check")
    if cfg.drift is not None and cfg.model != "jump":
        errors.append("drift: only the jump model has drift diagnostics")
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError([f"<file>: cannot read {path} ({e.strerror})"]) from None
    return parse_config(text, overrides)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError([f"<preset>: unknown preset {name!r}; known: {', '.join(PRESETS)}"])
    return resources.files("timing_games.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_preset(name: str, overrides: dict | None = None) -> ScenarioConfig:
    return parse_config(preset_text(name), overrides)


def to_dataclass(cfg: ScenarioConfig, x0: float | None = None):
    """Library parameter object; GBM needs a concrete start state ``x0``."""
    from .models.fixtures import DeterministicParams
    from .models.gbm_entry import GbmEntryParams
    from .models.grab_dollar import GrabDollarParams
    from .models.jump import JumpModelParams

    d = cfg.typed_params().model_dump()
    if cfg.model == "gbm_entry":
        return GbmEntryParams(**d, x0=1e-3 if x0 is None else x0)
    return {"grab_dollar": GrabDollarParams, "jump": JumpModelParams, "deterministic": DeterministicParams}[cfg.model](**d)
