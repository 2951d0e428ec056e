"""Random game instances and their JSON persistence."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import __version__
from .game import Strategy, StrategyProfile, VsgInstance
from .trust import UserParams, ValidatorParams


class InstanceFileError(ValueError):
    """An instance or profile file does not match its schema."""


@dataclass(frozen=True)
class Gaussian:
    """Normal draw saturated into ``[low, high]``."""

    mean: float
    std: float
    low: Optional[float] = None
    high: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.std >= 0.0:
            raise ValueError(f"standard deviation must be non-negative, got {self.std}")
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValueError(f"empty clamp interval [{self.low}, {self.high}]")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        x = rng.normal(self.mean, self.std, size)
        if self.low is not None:
            x = np.maximum(x, self.low)
        if self.high is not None:
            x = np.minimum(x, self.high)
        return x


@dataclass(frozen=True)
class ScenarioSpec:
    n_users: int = 200
    n_validators: int = 10
    integrity: Gaussian = Gaussian(0.7, 0.1, 0.5, 1.0)
    evidence_quality: Gaussian = Gaussian(0.8, 0.1, 0.5, 1.0)
    accuracy: Gaussian = Gaussian(0.6, 0.1, 0.5, 1.0)
    error: Gaussian = Gaussian(0.5, 0.1, 0.0, 1.0)
    budget: Gaussian = Gaussian(70.0, 15.0, 1.0)
    profit: float = 30.0
    commission_slope: float = 1.0 / 3.0
    commission_pivot: float = 0.5
    commission_noise: Gaussian = Gaussian(0.0, 0.01)
    commission_min: float = 0.0

    def __post_init__(self) -> None:
        if self.n_users < 1 or self.n_validators < 1:
            raise ValueError("scenario needs at least one user and one validator")
        if not self.profit > 0.0:
            raise ValueError(f"profit must be positive, got {self.profit}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            kwargs[key] = Gaussian(**value) if isinstance(value, dict) else value
        return cls(**kwargs)


DEFAULT_PAPER = ScenarioSpec()

CLAMP_NOTE = (
    "out-of-range draws saturate at the interval boundary; budgets are clamped to >= 1 "
    "so every user can afford one token"
)


def sample_instance(spec: ScenarioSpec, rng: np.random.Generator) -> VsgInstance:
    m, n = spec.n_validators, spec.n_users
    p = spec.integrity.sample(rng, m)
    z = spec.evidence_quality.sample(rng, m)
    delta = spec.commission_noise.sample(rng, m)
    c = np.maximum(spec.commission_slope * (p - spec.commission_pivot) + delta, spec.commission_min)
    q = spec.accuracy.sample(rng, n)
    qbar = spec.error.sample(rng, n)
    b = spec.budget.sample(rng, n)
    validators = tuple(
        ValidatorParams(j, float(p[j]), float(z[j]), float(c[j])) for j in range(m)
    )
    users = tuple(UserParams(i, float(q[i]), float(qbar[i]), float(b[i])) for i in range(n))
    return VsgInstance(users, validators, float(spec.profit), meta={"clamping": CLAMP_NOTE})


# ---------------------------------------------------------------------------
# JSON files

_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_ID = {"type": "integer", "minimum": 0}

INSTANCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["meta", "users", "validators", "profit"],
    "properties": {
        "meta": {"type": "object"},
        "profit": {"type": "number", "exclusiveMinimum": 0},
        "users": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "accuracy", "error", "budget"],
                "properties": {
                    "id": _ID,
                    "accuracy": _PROB,
                    "error": _PROB,
                    "budget": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "validators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "integrity", "evidence_quality", "commission"],
                "properties": {
                    "id": _ID,
                    "integrity": _PROB,
                    "evidence_quality": _PROB,
                    "commission": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}

PROFILE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["strategies"],
    "properties": {
        "strategies": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["validator", "tokens"],
                "properties": {
                    "validator": {"type": ["integer", "null"], "minimum": 0},
                    "tokens": {"type": "integer", "minimum": 0},
                },
            },
        }
    },
}


def _validate(data: Any, schema: dict, source: str) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path)
            lines.append(f"{where.lstrip('.') or '<root>'}: {e.message}")
        raise InstanceFileError(f"{source}: " + "; ".join(lines))


def instance_to_dict(instance: VsgInstance, seed: Optional[int] = None, spec: Optional[ScenarioSpec] = None) -> dict:
    meta = dict(instance.meta)
    meta["tool_version"] = __version__
    if seed is not None:
        meta["seed"] = seed
    if spec is not None:
        meta["spec"] = spec.to_dict()
    return {
        "meta": meta,
        "users": [asdict(u) for u in instance.users],
        "validators": [asdict(v) for v in instance.validators],
        "profit": instance.profit,
    }


def instance_from_dict(data: Any, source: str = "instance") -> VsgInstance:
    _validate(data, INSTANCE_SCHEMA, source)
    users = tuple(UserParams(**u) for u in data["users"])
    validators = tuple(ValidatorParams(**v) for v in data["validators"])
    return VsgInstance(users, validators, float(data["profit"]), meta=dict(data["meta"]))


def _dumps(data: Any) -> str:
    # json writes floats with repr(), the shortest string that round-trips exactly.
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def save_instance(instance: VsgInstance, path, seed: Optional[int] = None, spec: Optional[ScenarioSpec] = None) -> None:
    Path(path).write_text(_dumps(instance_to_dict(instance, seed, spec)))


def load_instance(path) -> VsgInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFileError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(data, str(path))


def save_profile(profile: StrategyProfile, path) -> None:
    data = {"strategies": [{"validator": s.validator, "tokens": s.tokens} for s in profile]}
    Path(path).write_text(_dumps(data))


def load_profile(path) -> StrategyProfile:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFileError(f"{path}: not valid JSON ({exc})") from exc
    _validate(data, PROFILE_SCHEMA, str(path))
    try:
        return StrategyProfile(tuple(Strategy(s["validator"], s["tokens"]) for s in data["strategies"]))
    except ValueError as exc:
        raise InstanceFileError(f"{path}: {exc}") from exc
