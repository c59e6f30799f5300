"""Model parameters, scaling modes and the shared policy type.

All rates are per trading day.  The default parameter set is the daily
calibration used throughout the comparisons (signal mean reversion 0.07,
signal volatility 1.5e-4, discount rate 4e-5, impact 1.88e-10 and an
inventory cost of 2.5e-8 times the squared price volatility).
"""
from __future__ import annotations

import configparser
import enum
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DomainError

TABLE1_SIGMA_P = 0.0088
TABLE1_GAMMA_PER_SIGMA_P_SQ = 2.5e-8


class ScalingMode(str, enum.Enum):
    RAW = "raw"
    MEAN_FIELD = "mean_field"

    @classmethod
    def parse(cls, text: str) -> "ScalingMode":
        key = text.strip().lower().replace("-", "_")
        if key in ("meanfield", "mf"):
            key = "mean_field"
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown scaling mode {text!r}") from None


class EquilibriumKind(str, enum.Enum):
    CLOSED_LOOP = "closed_loop"
    OPEN_LOOP = "open_loop"
    CENTRAL_PLANNER = "central_planner"


@dataclass(frozen=True)
class ModelParams:
    """Market and preference parameters of the N-agent game.

    ``lambda_`` is the impact coefficient actually used by the solvers; the
    mean-field rescaling replaces it by ``lambda_ / n_agents`` and records
    that it did so in ``mean_field_scaled``.
    """

    beta: float
    sigma: float
    sigma_p: float
    rho: float
    gamma_: float
    lambda_: float
    n_agents: int
    mean_field_scaled: bool = field(default=False, compare=True)

    def __post_init__(self):
        validate(self)

    @classmethod
    def table1(cls, n_agents: int = 2, **overrides) -> "ModelParams":
        values = dict(
            beta=0.070,
            sigma=0.00015,
            sigma_p=TABLE1_SIGMA_P,
            rho=0.00004,
            gamma_=TABLE1_GAMMA_PER_SIGMA_P_SQ * TABLE1_SIGMA_P**2,
            lambda_=1.88e-10,
            n_agents=n_agents,
        )
        values.update(overrides)
        return cls(**values)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def frictionless_value(self) -> float:
        """Per-agent value without trading costs, sigma^2 / (2 rho gamma (2 beta + rho))."""
        return self.sigma**2 / (2.0 * self.rho * self.gamma_ * (2.0 * self.beta + self.rho))

    @property
    def impact_ratio(self) -> float:
        """sqrt(lambda / gamma), the natural small parameter of the asymptotics."""
        return math.sqrt(self.lambda_ / self.gamma_)

    def to_dict(self) -> dict:
        return asdict(self)


def validate(params: ModelParams) -> ModelParams:
    """Check every parameter invariant and return ``params`` unchanged.

    Raises ``DomainError`` naming the first violated field.  ``sigma`` may
    be zero (a signal-free market has value zero but is well defined).
    """
    checks = (
        ("beta", params.beta > 0, "beta must be positive"),
        ("sigma", params.sigma >= 0, "sigma must be non-negative"),
        ("sigma_p", params.sigma_p >= 0, "sigma_p must be non-negative"),
        ("rho", params.rho > 0, "rho must be positive"),
        ("gamma_", params.gamma_ > 0, "gamma must be positive"),
        ("lambda_", params.lambda_ > 0, "lambda must be positive"),
    )
    for name, ok, message in checks:
        value = getattr(params, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            raise DomainError(f"{name} must be a finite number, got {value!r}")
        if not ok:
            raise DomainError(message)
    n = params.n_agents
    if isinstance(n, bool) or not isinstance(n, int):
        raise DomainError(f"n_agents must be an integer, got {n!r}")
    if n < 2:
        raise DomainError("n_agents must be >= 2")
    return params


def apply_scaling(params: ModelParams, mode: ScalingMode) -> ModelParams:
    """Return a copy with the impact rescaled for ``mode``.

    MeanField divides lambda by the number of agents, so that total
    risk-bearing capacity does not change with N.  Rescaling twice is an
    error rather than a silent lambda / N^2.
    """
    mode = ScalingMode(mode)
    if mode is ScalingMode.RAW:
        return replace(params)
    if params.mean_field_scaled:
        raise ValueError("mean-field scaling already applied to these parameters")
    return replace(params, lambda_=params.lambda_ / params.n_agents, mean_field_scaled=True)


@dataclass(frozen=True)
class Policy:
    """Symmetric linear trading rule ``rate = m_rate * (m_aim * mu / gamma - phi)``.

    For the closed-loop equilibrium the full feedback on the other agents'
    inventories is kept in ``feedback`` as ``(a_bar, b_bar, c_bar)``; the
    open-loop and planner rules only react to the agent's own position.
    """

    m_rate: float
    m_aim: float
    kind: EquilibriumKind
    feedback: Optional[tuple] = None

    def feedback_coefficients(self, gamma_: float) -> tuple:
        if self.feedback is not None:
            return tuple(self.feedback)
        return (self.m_rate * self.m_aim / gamma_, 0.0, self.m_rate)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "m_rate": self.m_rate, "m_aim": self.m_aim}
        if self.feedback is not None:
            out.update(zip(("a_bar", "b_bar", "c_bar"), self.feedback))
        return out


# -- configuration files ---------------------------------------------------

_FLOAT_KEYS = ("beta", "sigma", "sigma_p", "rho", "gamma_", "lambda_")


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as a number") from None


def params_from_mapping(values: dict) -> tuple[ModelParams, ScalingMode]:
    """Build parameters from flat string key/values.

    ``gamma_`` may be given directly or as ``gamma_per_sigma_p_sq``, in which
    case gamma = multiplier * sigma_p^2.  ``scaling`` defaults to raw.
    """
    values = {k.strip(): str(v).strip() for k, v in values.items()}
    known = set(_FLOAT_KEYS) | {"n_agents", "scaling", "gamma_per_sigma_p_sq"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    for key in _FLOAT_KEYS:
        if key in values:
            kwargs[key] = _parse_float(key, values[key])
    if "gamma_per_sigma_p_sq" in values:
        if "gamma_" in kwargs:
            raise ConfigError("give either gamma_ or gamma_per_sigma_p_sq, not both")
        if "sigma_p" not in kwargs:
            raise ConfigError("gamma_per_sigma_p_sq requires sigma_p")
        mult = _parse_float("gamma_per_sigma_p_sq", values["gamma_per_sigma_p_sq"])
        kwargs["gamma_"] = mult * kwargs["sigma_p"] ** 2
    kwargs.setdefault("sigma_p", 0.0)
    if "n_agents" in values:
        try:
            kwargs["n_agents"] = int(values["n_agents"])
        except ValueError:
            raise ConfigError(f"n_agents: cannot parse {values['n_agents']!r} as an integer") from None
    missing = [k for k in (*_FLOAT_KEYS, "n_agents") if k not in kwargs]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    scaling = ScalingMode.parse(values.get("scaling", "raw"))
    try:
        params = ModelParams(**kwargs)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return params, scaling


def load_config(path) -> tuple[ModelParams, ScalingMode]:
    """Read an INI-style file with a single ``[model]`` section."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not parser.has_section("model"):
        raise ConfigError(f"config {path} has no [model] section")
    return params_from_mapping(dict(parser.items("model")))


def default_config_path(name: str = "table1.ini") -> Path:
    return Path(str(resources.files("clnash") / "data" / name))
