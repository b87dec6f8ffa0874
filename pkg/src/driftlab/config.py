"""Experiment configuration: a JSON document, fully validated up front.

Validation collects every problem (not just the first) and rejects unknown
keys with a nearest-match suggestion.  Probabilities may be given as decimal
strings; they parse to binary floats with round-to-nearest.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from .distributions import (
    CoveringSet,
    FiniteDistribution,
    GeometricSchedule,
    PiecewiseSchedule,
    ProductStateSpace,
    Schedule,
)
from .errors import ConfigurationError
from .guarantees import MODE_DEFAULT, MODE_LITERAL
from .presets import (
    SENSOR3_DEFAULTS,
    sensor3_covering_and_schedule,
    sensor3_model,
)
from .simulate import SimConfig
from .strategies import ActionModel, CostModel, StrategySpace


class ConfigError(ConfigurationError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


TOP_KEYS = {
    "preset", "seed", "runs", "horizon", "V", "delay", "window", "mode",
    "out_dir", "nu", "lyapunov_cap", "kappa", "eps",
    "state_space", "action_space", "cost", "covering", "schedule", "sweep",
}
SWEEP_KEYS = {"V", "w", "s", "D"}
COST_KEYS = {"preset", "tables", "constraints"}
COVERING_KEYS = {"preset", "members", "delta", "alpha_delta", "beta_delta"}
SCHEDULE_KEYS = {"preset", "kind", "rho", "start", "limit", "segments"}


@dataclass(frozen=True)
class ExperimentConfig:
    space: StrategySpace
    covering: CoveringSet
    schedule: Schedule
    V: float
    delay: int
    window: int
    horizon: int
    runs: int
    seed: int
    mode: str
    out_dir: str
    nu: float
    lyapunov_cap: float
    eps: float
    kappa: float | None
    v_sweep: tuple[float, ...]
    w_sweep: tuple[int, ...]
    s_sweep: tuple[int, ...]
    d_sweep: tuple[int, ...]
    preset: str | None = None

    def sim(self, **overrides: Any) -> SimConfig:
        values = dict(
            space=self.space,
            schedule=self.schedule,
            covering=self.covering,
            V=self.V,
            D=self.delay,
            window=self.window,
            horizon=self.horizon,
            seed=self.seed,
        )
        values.update(overrides)
        return SimConfig(**values)

    def with_updates(self, **kw: Any) -> "ExperimentConfig":
        return replace(self, **kw)


def _unknown(keys, allowed, path, errors):
    for key in keys:
        if key not in allowed:
            low = key.lower()
            prefixed = sorted(
                (a for a in allowed
                 if low.startswith(a.lower()) or a.lower().startswith(low)),
                key=len, reverse=True,
            )
            hint = prefixed[:1] or difflib.get_close_matches(key, allowed, n=1)
            suffix = f' (did you mean "{hint[0]}"?)' if hint else ""
            errors.append(f"{path}: unknown key {key!r}{suffix}")


def _number(doc, key, errors, path="", required=False, default=None, kind=float):
    label = f"{path}{key}"
    if key not in doc:
        if required:
            errors.append(f"{label}: missing")
        return default
    try:
        return kind(doc[key])
    except (TypeError, ValueError):
        errors.append(f"{label}: expected a {kind.__name__}, got {doc[key]!r}")
        return default


def _dist(raw, label, errors) -> FiniteDistribution | None:
    try:
        probs = np.array([float(v) for v in raw], dtype=np.float64)
        return FiniteDistribution(probs)
    except (TypeError, ValueError, ConfigurationError) as exc:
        errors.append(f"{label}: {exc}")
        return None


def _build_covering(block, errors) -> CoveringSet | None:
    _unknown(block, COVERING_KEYS, "covering", errors)
    members = []
    for i, raw in enumerate(block.get("members", [])):
        d = _dist(raw, f"covering.members[{i}]", errors)
        if d is None:
            return None
        members.append(d)
    if not members:
        errors.append("covering.members: missing or empty")
        return None
    delta = _number(block, "delta", errors, "covering.", required=True)
    alpha = _number(block, "alpha_delta", errors, "covering.", required=True)
    beta = _number(block, "beta_delta", errors, "covering.", required=True)
    if None in (delta, alpha, beta):
        return None
    try:
        return CoveringSet(
            members=tuple(members), delta=delta, alpha_delta=alpha, beta_delta=beta
        )
    except ConfigurationError as exc:
        errors.append(f"covering: {exc}")
        return None


def _build_schedule(block, errors) -> Schedule | None:
    _unknown(block, SCHEDULE_KEYS, "schedule", errors)
    kind = block.get("kind")
    limit = _dist(block.get("limit", []), "schedule.limit", errors)
    if limit is None:
        return None
    try:
        if kind == "geometric":
            start = _dist(block.get("start", []), "schedule.start", errors)
            rho = _number(block, "rho", errors, "schedule.", required=True)
            if start is None or rho is None:
                return None
            return GeometricSchedule(limit=limit, start=start, rho=rho)
        if kind == "piecewise":
            segments = []
            for i, seg in enumerate(block.get("segments", [])):
                start_slot = int(seg[0])
                d = _dist(seg[1], f"schedule.segments[{i}]", errors)
                if d is None:
                    return None
                segments.append((start_slot, d))
            return PiecewiseSchedule(limit=limit, segments=tuple(segments))
    except (ConfigurationError, ValueError, TypeError, IndexError) as exc:
        errors.append(f"schedule: {exc}")
        return None
    errors.append(f"schedule.kind: expected 'geometric' or 'piecewise', got {kind!r}")
    return None


def _build_cost(block, errors) -> CostModel | None:
    _unknown(block, COST_KEYS, "cost", errors)
    tables = block.get("tables")
    if tables is None:
        errors.append("cost.tables: missing")
        return None
    try:
        arr = np.array(tables, dtype=np.float64)
        c = np.array(block.get("constraints", []), dtype=np.float64)
        return CostModel(tables=arr, c=c)
    except (ValueError, ConfigurationError) as exc:
        errors.append(f"cost: {exc}")
        return None


def config_from_dict(doc: dict, source: str = "<config>") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError([f"{source}: document root must be an object"])
    errors: list[str] = []
    _unknown(doc, TOP_KEYS, source, errors)
    preset = doc.get("preset")
    if preset is not None and preset != "sensor3":
        errors.append(f'preset: unknown preset {preset!r} (known: "sensor3")')
        raise ConfigError(errors)

    space = covering = schedule = None
    defaults: dict[str, Any] = {
        "V": 1.0, "delay": 0, "window": 1, "horizon": 100, "runs": 1,
        "nu": 0.05, "lyapunov_cap": 0.0,
        "v_sweep": [], "w_sweep": [], "s_sweep": [], "d_sweep": [],
    }
    if preset == "sensor3":
        actions, states, cost = sensor3_model()
        space = StrategySpace(actions, states, cost)
        covering, schedule = sensor3_covering_and_schedule(states)
        defaults.update(SENSOR3_DEFAULTS)

    if space is None or "cost" in doc or "state_space" in doc:
        ss = doc.get("state_space")
        aa = doc.get("action_space")
        if ss is None or aa is None:
            errors.append(
                "state_space/action_space: required unless a preset supplies them"
            )
        elif "cost" not in doc:
            errors.append("cost: required unless a preset supplies it")
        else:
            try:
                states = ProductStateSpace(tuple(int(v) for v in ss))
                actions = ActionModel(tuple(int(v) for v in aa))
            except (ValueError, TypeError, ConfigurationError) as exc:
                errors.append(f"state_space/action_space: {exc}")
                states = actions = None
            if states is not None:
                cost = _build_cost(doc["cost"], errors)
                if cost is not None:
                    try:
                        space = StrategySpace(actions, states, cost)
                    except Exception as exc:
                        errors.append(f"cost: {exc}")
    if "covering" in doc:
        covering = _build_covering(doc["covering"], errors)
    if "schedule" in doc:
        schedule = _build_schedule(doc["schedule"], errors)
    for name, value in (("covering", covering), ("schedule", schedule)):
        if value is None and not any(e.startswith(name) for e in errors):
            errors.append(f"{name}: required unless a preset supplies it")

    mode = doc.get("mode", MODE_DEFAULT)
    if mode not in (MODE_DEFAULT, MODE_LITERAL):
        errors.append(f'mode: expected "default" or "literal", got {mode!r}')
    seed = _number(doc, "seed", errors, kind=int, default=0)
    runs = _number(doc, "runs", errors, kind=int, default=defaults["runs"])
    horizon = _number(doc, "horizon", errors, kind=int, default=defaults["horizon"])
    V = _number(doc, "V", errors, default=defaults["V"])
    delay = _number(doc, "delay", errors, kind=int, default=defaults["delay"])
    window = _number(doc, "window", errors, kind=int, default=defaults["window"])
    nu = _number(doc, "nu", errors, default=defaults["nu"])
    cap = _number(doc, "lyapunov_cap", errors, default=defaults["lyapunov_cap"])
    eps = _number(doc, "eps", errors, default=0.05)
    kappa = None
    if doc.get("kappa") is not None:
        kappa = _number(doc, "kappa", errors)
    sweep = doc.get("sweep", {})
    if not isinstance(sweep, dict):
        errors.append("sweep: must be an object")
        sweep = {}
    _unknown(sweep, SWEEP_KEYS, "sweep", errors)
    v_sweep = tuple(float(v) for v in sweep.get("V", defaults["v_sweep"]))
    w_sweep = tuple(int(v) for v in sweep.get("w", defaults["w_sweep"]))
    s_sweep = tuple(int(v) for v in sweep.get("s", defaults["s_sweep"]))
    d_sweep = tuple(int(v) for v in sweep.get("D", defaults["d_sweep"]))

    for name, value, low in (
        ("runs", runs, 1), ("horizon", horizon, 1), ("window", window, 1),
        ("delay", delay, 0), ("V", V, 0.0),
    ):
        if value is not None and value < low:
            errors.append(f"{name}: must be >= {low}, got {value}")
    if nu is not None and nu <= 0:
        errors.append(f"nu: must be > 0, got {nu}")

    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(
        space=space, covering=covering, schedule=schedule,
        V=V, delay=delay, window=window, horizon=horizon, runs=runs,
        seed=seed, mode=mode, out_dir=doc.get("out_dir", "out"),
        nu=nu, lyapunov_cap=cap, eps=eps, kappa=kappa,
        v_sweep=v_sweep, w_sweep=w_sweep, s_sweep=s_sweep, d_sweep=d_sweep,
        preset=preset,
    )
    try:
        cfg.sim().validate()
    except ConfigurationError as exc:
        raise ConfigError([str(exc)]) from exc
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"{p}: file not found"])
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"{p}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]
        ) from exc
    return config_from_dict(doc, source=str(p))


def dump_preset(name: str = "sensor3") -> dict:
    """Fully explicit config document for a named preset."""
    if name != "sensor3":
        raise ConfigurationError(f"unknown preset {name!r}")
    actions, states, cost = sensor3_model()
    covering, schedule = sensor3_covering_and_schedule(states)
    return {
        "preset": None,
        "seed": 1,
        "runs": SENSOR3_DEFAULTS["runs"],
        "horizon": SENSOR3_DEFAULTS["horizon"],
        "V": SENSOR3_DEFAULTS["V"],
        "delay": SENSOR3_DEFAULTS["delay"],
        "window": SENSOR3_DEFAULTS["window"],
        "mode": MODE_DEFAULT,
        "out_dir": "out",
        "nu": SENSOR3_DEFAULTS["nu"],
        "lyapunov_cap": SENSOR3_DEFAULTS["lyapunov_cap"],
        "state_space": list(states.per_user_cardinalities),
        "action_space": list(actions.per_user_action_counts),
        "cost": {
            "tables": cost.tables.tolist(),
            "constraints": cost.c.tolist(),
        },
        "covering": {
            "members": [m.probs.tolist() for m in covering.members],
            "delta": covering.delta,
            "alpha_delta": covering.alpha_delta,
            "beta_delta": covering.beta_delta,
        },
        "schedule": {
            "kind": "geometric",
            "rho": schedule.rho,
            "start": schedule.start.probs.tolist(),
            "limit": schedule.limit.probs.tolist(),
        },
        "sweep": {
            "V": SENSOR3_DEFAULTS["v_sweep"],
            "w": SENSOR3_DEFAULTS["w_sweep"],
            "s": SENSOR3_DEFAULTS["s_sweep"],
            "D": SENSOR3_DEFAULTS["d_sweep"],
        },
    }
