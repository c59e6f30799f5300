"""Monte Carlo engine for the signal, the agents' inventories and their values.

The state X = (mu, phi^1, ..., phi^N) follows a linear SDE: the signal is
an Ornstein-Uhlenbeck process and every agent trades at a rate that is a
fixed linear function of X.  By default the joint system is advanced with
its exact Gaussian transition, so the only discretisation error left is
the trapezoidal rule for the discounted reward.  A plain Euler scheme for
the inventories is available for refinement studies.

Every path draws from its own generator seeded with ``(seed, path_index)``
(signal normals first, then inventory normals), so results do not depend
on chunking or on the number of worker threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigError, DomainError
from .model import ModelParams, Policy

SCHEMES = ("exact", "euler")
THREADS_ENV = "CLNASH_THREADS"


@dataclass(frozen=True)
class SimConfig:
    """Time grid, path count and seed of a Monte Carlo run."""

    dt: float
    horizon: float
    n_paths: int
    seed: int = 0
    mu0: float = 0.0
    scheme: str = "exact"
    chunk_size: int = 2500

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ConfigError("horizon must be at least dt")
        if isinstance(self.n_paths, bool) or not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise ConfigError("n_paths must be a positive integer")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def check_discount(self, rho: float, coverage: float = 0.01) -> None:
        """Require exp(-rho * horizon) <= coverage."""
        if math.exp(-rho * self.n_steps * self.dt) > coverage:
            raise ConfigError(
                f"horizon {self.horizon:g} too short: exp(-rho T) = "
                f"{math.exp(-rho * self.n_steps * self.dt):.3g} > {coverage:g}")


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    std_error: float
    n_paths: int

    def within(self, reference: float, k: float = 3.0) -> bool:
        return abs(self.mean - reference) <= k * self.std_error

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_paths": self.n_paths}


@dataclass
class PathBundle:
    """Simulated paths; arrays are indexed (path, time) or (path, time, agent)."""

    times: np.ndarray
    mu: np.ndarray
    phi: np.ndarray
    rates: np.ndarray


@dataclass(frozen=True)
class FeedbackRule:
    """Trading rate ``k * mu + K @ phi`` of one agent."""

    k: float
    K: np.ndarray = field(repr=False)

    @classmethod
    def from_policy(cls, policy: Policy, agent: int, n_agents: int, gamma_: float,
                    rate: float = 1.0, aim: float = 1.0,
                    a: float = 1.0, b: float = 1.0, c: float = 1.0) -> "FeedbackRule":
        """Rule of ``agent`` from a symmetric policy, with optional multiplicative tweaks.

        ``rate`` scales the whole rule (signal and inventory terms), ``aim``
        only the signal term, and ``a``, ``b``, ``c`` scale a_bar, b_bar and
        c_bar individually.
        """
        a_bar, b_bar, c_bar = policy.feedback_coefficients(gamma_)
        row = np.full(n_agents, rate * b * b_bar)
        row[agent] = -rate * c * c_bar
        return cls(k=rate * aim * a * a_bar, K=row)


@dataclass(frozen=True)
class Perturbation:
    """Multiplicative change of agent 1's rule in a deviation experiment."""

    rate: float = 1.0
    aim: float = 1.0
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    @property
    def is_identity(self) -> bool:
        return all(v == 1.0 for v in (self.rate, self.aim, self.a, self.b, self.c))


def symmetric_rules(params: ModelParams, policy: Policy) -> list[FeedbackRule]:
    n = params.n_agents
    return [FeedbackRule.from_policy(policy, i, n, params.gamma_) for i in range(n)]


def _as_rules(params: ModelParams, policies) -> list[FeedbackRule]:
    if isinstance(policies, Policy):
        return symmetric_rules(params, policies)
    rules = []
    for i, p in enumerate(policies):
        rules.append(p if isinstance(p, FeedbackRule)
                     else FeedbackRule.from_policy(p, i, params.n_agents, params.gamma_))
    if len(rules) != params.n_agents:
        raise ValueError(f"need one rule per agent ({params.n_agents}), got {len(rules)}")
    return rules


def drift_matrix(params: ModelParams, rules: Sequence[FeedbackRule]) -> np.ndarray:
    n = len(rules)
    a = np.zeros((n + 1, n + 1))
    a[0, 0] = -params.beta
    for i, r in enumerate(rules):
        a[i + 1, 0] = r.k
        a[i + 1, 1:] = r.K
    return a


def _ou_step(params: ModelParams, dt: float) -> tuple[float, float]:
    decay = math.exp(-params.beta * dt)
    return decay, params.sigma * math.sqrt(-math.expm1(-2 * params.beta * dt) / (2 * params.beta))


def _psd_factor(q: np.ndarray) -> np.ndarray:
    """Factor L with L L^T = q; column 0 carries the signal alone.

    The first column is the exact Cholesky column, and the (often nearly
    singular) Schur complement is factored through an eigen decomposition
    with rounding-level eigenvalues set to zero.
    """
    m = q.shape[0]
    out = np.zeros_like(q)
    if q[0, 0] <= 0:
        rest = q
        col0 = np.zeros(m)
    else:
        col0 = q[:, 0] / math.sqrt(q[0, 0])
        rest = q - np.outer(col0, col0)
    out[:, 0] = col0
    sub = rest[1:, 1:]
    sub = 0.5 * (sub + sub.T)
    w, v = np.linalg.eigh(sub)
    # eigenvalues at rounding level are zero in exact arithmetic; their square
    # roots would inject spurious noise of order sqrt(eps)
    floor = 8 * m * np.finfo(float).eps * max(float(np.max(np.abs(np.diag(q)))), 0.0)
    w = np.where(w > floor, w, 0.0)
    out[1:, 1:] = v * np.sqrt(w)
    return out


def exact_transition(params: ModelParams, rules: Sequence[FeedbackRule], dt: float):
    """Transition matrix and noise factor of the joint state over one step.

    Uses the block-matrix exponential of Van Loan.  Row 0 is overwritten
    with the closed-form OU step so the signal matches :func:`simulate_signal`
    bit for bit.
    """
    a = drift_matrix(params, rules)
    m = a.shape[0]
    gg = np.zeros((m, m))
    gg[0, 0] = params.sigma**2
    block = np.zeros((2 * m, 2 * m))
    block[:m, :m] = -a
    block[:m, m:] = gg
    block[m:, m:] = a.T
    ex = linalg.expm(block * dt)
    trans = ex[m:, m:].T
    q = trans @ ex[:m, m:]
    q = 0.5 * (q + q.T)
    decay, vol = _ou_step(params, dt)
    trans[0, :] = 0.0
    trans[0, 0] = decay
    q[0, 0] = vol * vol
    fac = _psd_factor(q)
    fac[0, :] = 0.0
    fac[0, 0] = vol
    return trans, fac


def _path_normals(seed: int, index: int, n_steps: int, n_agents: int, need_inventory: bool):
    rng = np.random.default_rng([seed, index])
    z_mu = rng.standard_normal(n_steps)
    z_inv = rng.standard_normal((n_steps, n_agents)) if need_inventory else None
    return z_mu, z_inv


def _chunks(n_paths: int, size: int):
    return [(s, min(s + size, n_paths)) for s in range(0, n_paths, size)]


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_chunks(fn, config: SimConfig):
    chunks = _chunks(config.n_paths, config.chunk_size)
    workers = min(_thread_count(), len(chunks))
    if workers <= 1:
        return [fn(lo, hi) for lo, hi in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def _signal_chunk(params: ModelParams, config: SimConfig, lo: int, hi: int) -> np.ndarray:
    n_steps = config.n_steps
    decay, vol = _ou_step(params, config.dt)
    mu = np.empty((hi - lo, n_steps + 1))
    mu[:, 0] = config.mu0
    z = np.stack([_path_normals(config.seed, p, n_steps, 0, False)[0] for p in range(lo, hi)])
    for t in range(n_steps):
        mu[:, t + 1] = decay * mu[:, t] + vol * z[:, t]
    return mu


def simulate_signal(params: ModelParams, config: SimConfig) -> np.ndarray:
    """OU paths on the grid ``config.times`` with the exact Gaussian step; shape (paths, steps + 1)."""
    parts = _run_chunks(lambda lo, hi: _signal_chunk(params, config, lo, hi), config)
    return np.concatenate(parts, axis=0)


def _rates(rules, mu_t: np.ndarray, phi_t: np.ndarray) -> np.ndarray:
    n = len(rules)
    out = np.empty_like(phi_t)
    for i, r in enumerate(rules):
        acc = r.k * mu_t
        for j in range(n):
            acc = acc + r.K[j] * phi_t[:, j]
        out[:, i] = acc
    return out


def simulate_positions(params: ModelParams, policies, signal: np.ndarray,
                       config: SimConfig) -> PathBundle:
    """Euler integration of the inventories along given signal paths.

    ``policies`` is a symmetric :class:`Policy` or one rule per agent
    (Policy or FeedbackRule), which allows a single deviator.  Positions
    start at zero and satisfy phi_{t+dt} = phi_t + rate_t dt exactly.
    """
    rules = _as_rules(params, policies)
    n = len(rules)
    signal = np.atleast_2d(np.asarray(signal, dtype=float))
    n_paths, n_pts = signal.shape
    phi = np.zeros((n_paths, n_pts, n))
    rates = np.empty((n_paths, n_pts, n))
    for t in range(n_pts):
        rates[:, t, :] = _rates(rules, signal[:, t], phi[:, t, :])
        if t + 1 < n_pts:
            phi[:, t + 1, :] = phi[:, t, :] + rates[:, t, :] * config.dt
    return PathBundle(times=np.arange(n_pts) * config.dt, mu=signal, phi=phi, rates=rates)


def _integrate_chunk(params: ModelParams, rules, config: SimConfig, lo: int, hi: int,
                     transition, visit) -> None:
    """Advance paths lo..hi-1 and call ``visit(t, mu_t, phi_t)`` at every grid point."""
    n = len(rules)
    n_steps = config.n_steps
    exact = config.scheme == "exact"
    draws = [_path_normals(config.seed, p, n_steps, n, exact) for p in range(lo, hi)]
    z_mu = np.stack([d[0] for d in draws])
    z_inv = np.stack([d[1] for d in draws]) if exact else None
    del draws
    decay, vol = _ou_step(params, config.dt)
    mu_t = np.full(hi - lo, float(config.mu0))
    phi_t = np.zeros((hi - lo, n))
    for t in range(n_steps + 1):
        visit(t, mu_t, phi_t)
        if t == n_steps:
            break
        if exact:
            trans, fac = transition
            nxt = np.empty_like(phi_t)
            for i in range(n):
                acc = trans[i + 1, 0] * mu_t + fac[i + 1, 0] * z_mu[:, t]
                for j in range(n):
                    acc = acc + trans[i + 1, j + 1] * phi_t[:, j]
                for j in range(n):
                    acc = acc + fac[i + 1, j + 1] * z_inv[:, t, j]
                nxt[:, i] = acc
            phi_t = nxt
        else:
            phi_t = phi_t + _rates(rules, mu_t, phi_t) * config.dt
        mu_t = decay * mu_t + vol * z_mu[:, t]


def simulate_paths(params: ModelParams, policies, config: SimConfig) -> PathBundle:
    """Joint simulation of signal and inventories with ``config.scheme``."""
    rules = _as_rules(params, policies)
    transition = exact_transition(params, rules, config.dt) if config.scheme == "exact" else None
    n_pts = config.n_steps + 1

    def work(lo, hi):
        mu = np.empty((hi - lo, n_pts))
        phi = np.empty((hi - lo, n_pts, len(rules)))

        def visit(t, mu_t, phi_t):
            mu[:, t] = mu_t
            phi[:, t, :] = phi_t

        _integrate_chunk(params, rules, config, lo, hi, transition, visit)
        return mu, phi

    parts = _run_chunks(work, config)
    mu = np.concatenate([p[0] for p in parts], axis=0)
    phi = np.concatenate([p[1] for p in parts], axis=0)
    rates = np.stack([_rates(rules, mu[:, t], phi[:, t, :]) for t in range(n_pts)], axis=1)
    return PathBundle(times=config.times, mu=mu, phi=phi, rates=rates)


def _reward(params: ModelParams, rules, mu_t: np.ndarray, phi_t: np.ndarray, agent: int) -> np.ndarray:
    rates = _rates(rules, mu_t, phi_t)
    agg = rates[:, 0].copy()
    for j in range(1, rates.shape[1]):
        agg = agg + rates[:, j]
    own = phi_t[:, agent]
    return mu_t * own - 0.5 * params.gamma_ * own * own - params.lambda_ * rates[:, agent] * agg


def path_values(params: ModelParams, policies, agent_index: int, config: SimConfig) -> np.ndarray:
    """Trapezoidal discounted reward of ``agent_index`` on every path.

    Deterministic given the seed, whatever the chunk size or thread count.
    """
    rules = _as_rules(params, policies)
    if not 0 <= agent_index < len(rules):
        raise ValueError(f"agent_index {agent_index} out of range")
    transition = exact_transition(params, rules, config.dt) if config.scheme == "exact" else None
    n_steps = config.n_steps

    def work(lo, hi):
        total = np.zeros(hi - lo)

        def visit(t, mu_t, phi_t):
            nonlocal total
            w = 0.5 if t in (0, n_steps) else 1.0
            weight = w * math.exp(-params.rho * t * config.dt) * config.dt
            total = total + weight * _reward(params, rules, mu_t, phi_t, agent_index)

        _integrate_chunk(params, rules, config, lo, hi, transition, visit)
        return total

    return np.concatenate(_run_chunks(work, config))


def _estimate(values: np.ndarray) -> ValueEstimate:
    n = values.size
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return ValueEstimate(mean=float(values.mean()), std_error=se, n_paths=n)


def estimate_value(params: ModelParams, policies, agent_index: int, config: SimConfig) -> ValueEstimate:
    """Monte Carlo estimate of the discounted goal functional of one agent.

    Raises ConfigError if the horizon leaves more than 1% of discount weight
    uncovered.
    """
    config.check_discount(params.rho)
    return _estimate(path_values(params, policies, agent_index, config))


@dataclass(frozen=True)
class DeviationResult:
    equilibrium: ValueEstimate
    deviant: ValueEstimate
    difference: float
    paired_se: float

    @property
    def deviation_gain_bounded(self) -> bool:
        """True if the deviant does not beat the equilibrium by more than 3 paired SE."""
        return self.difference <= 3.0 * self.paired_se

    def to_dict(self) -> dict:
        return {"equilibrium": self.equilibrium.to_dict(), "deviant": self.deviant.to_dict(),
                "difference": self.difference, "paired_se": self.paired_se,
                "within_3se": self.deviation_gain_bounded}


def deviation_rules(params: ModelParams, policy: Policy, perturbation: Perturbation) -> list[FeedbackRule]:
    """Agent 0 uses the perturbed rule; the others keep the equilibrium feedback."""
    rules = symmetric_rules(params, policy)
    p = perturbation
    rules[0] = FeedbackRule.from_policy(policy, 0, params.n_agents, params.gamma_,
                                        rate=p.rate, aim=p.aim, a=p.a, b=p.b, c=p.c)
    return rules


def deviation_experiment(params: ModelParams, config: SimConfig, perturbation: Perturbation,
                         policy: Optional[Policy] = None,
                         baseline: Optional[np.ndarray] = None) -> DeviationResult:
    """Paired estimates of agent 0's value with and without a unilateral deviation.

    The other agents react to the deviator's actual inventory through their
    b_bar term, so the closed-loop reaction is part of the simulation.
    ``baseline`` may hold the equilibrium path values from an earlier call
    with the same config, which saves one simulation per experiment.
    """
    if policy is None:
        from .equilibrium import closed_loop_policy
        policy = closed_loop_policy(params)[0]
    config.check_discount(params.rho)
    base = (path_values(params, symmetric_rules(params, policy), 0, config)
            if baseline is None else baseline)
    dev = path_values(params, deviation_rules(params, policy, perturbation), 0, config)
    diff = dev - base
    paired = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
    return DeviationResult(equilibrium=_estimate(base), deviant=_estimate(dev),
                           difference=float(diff.mean()), paired_se=paired)


def exact_value(params: ModelParams, policies, agent_index: int, mu0: float = 0.0) -> float:
    """Infinite-horizon value of one agent from a Lyapunov equation.

    With P = int e^{-rho t} E[X_t X_t^T] dt, the value is trace(R P) for
    the quadratic reward matrix R; P solves
    (A - rho/2) P + P (A - rho/2)^T = -(X_0 X_0^T + G G^T / rho).

    Raises
    ------
    DomainError
        If the discounted second moments diverge.
    """
    rules = _as_rules(params, policies)
    n = len(rules)
    a = drift_matrix(params, rules)
    shifted = a - 0.5 * params.rho * np.eye(n + 1)
    if np.max(np.linalg.eigvals(shifted).real) >= 0:
        raise DomainError("discounted second moments diverge for these rules")
    x0 = np.zeros(n + 1)
    x0[0] = mu0
    q = np.outer(x0, x0)
    q[0, 0] += params.sigma**2 / params.rho
    p = linalg.solve_continuous_lyapunov(shifted, -q)
    rates = a[1:, :]
    own = np.zeros(n + 1)
    own[agent_index + 1] = 1.0
    sig = np.zeros(n + 1)
    sig[0] = 1.0
    agg = rates.sum(axis=0)
    r = (0.5 * (np.outer(sig, own) + np.outer(own, sig))
         - 0.5 * params.gamma_ * np.outer(own, own)
         - 0.5 * params.lambda_ * (np.outer(rates[agent_index], agg) + np.outer(agg, rates[agent_index])))
    return float(np.sum(r * p))
