"""Closed-form values of symmetric linear rules and HJB residual checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium.coefficients import CoefficientSet
from .model import ModelParams, Policy


@dataclass(frozen=True)
class State:
    """Agent 1's inventory ``x``, the common inventory ``y`` of the others and the signal ``m``."""

    x: float
    y: float
    m: float


def value_integrals(params: ModelParams, m_rate: float, m_aim: float = 1.0) -> tuple[float, float, float]:
    """Discounted second moments (I1, I2, I3) along a symmetric linear rule.

    I1 = E int e^{-rho t} mu_t phi_t dt, I2 = E int e^{-rho t} phi_t^2 dt and
    I3 = E int e^{-rho t} mu_t^2 dt, for mu_0 = phi_0 = 0.  I1 and I2 carry
    their factors of M_rate M_aim / gamma.
    """
    rho, beta, sigma = params.rho, params.beta, params.sigma
    k = m_rate * m_aim / params.gamma_
    base = sigma**2 / (rho * (2 * beta + rho))
    i1 = k * base / (beta + rho + m_rate)
    i2 = k * k * 2 * base / ((rho + 2 * m_rate) * (beta + rho + m_rate))
    i3 = sigma**2 / (2 * beta * rho + rho * rho)
    return i1, i2, i3


def closed_form_value(params: ModelParams, policy: Policy) -> float:
    """Per-agent value of the symmetric rule ``policy`` for mu_0 = 0.

    Expanding the squared trading rate turns the goal functional into a
    combination of the three discounted moments of
    :func:`value_integrals`.  Only symmetry and linearity of the rule are
    used, so this applies to any (M_rate, M_aim), not just an equilibrium.
    """
    mr, ma = policy.m_rate, policy.m_aim
    n, lam, gam = params.n_agents, params.lambda_, params.gamma_
    i1, i2, i3 = value_integrals(params, mr, ma)
    k = mr * ma / gam
    return ((1 + 2 * lam * n * mr * mr * ma / gam) * i1
            - (gam / 2 + lam * n * mr * mr) * i2
            - lam * n * k * k * i3)


def value_fraction(params: ModelParams, policy: Policy) -> float:
    """Value as a fraction of the frictionless value."""
    return closed_form_value(params, policy) / params.frictionless_value


# -- HJB ----------------------------------------------------------------------

def quadratic_value(coeffs: CoefficientSet, state: State) -> float:
    c = coeffs
    x, y, m = state.x, state.y, state.m
    return (-c.a / 2 * x * x + c.b / 2 * y * y + c.c / 2 * m * m
            - c.d * x * y + c.e * x * m + c.f * y * m + c.g)


def foc_rate(params: ModelParams, coeffs: CoefficientSet, state: State) -> float:
    """Pointwise maximising trading rate of agent 1."""
    n, lam = params.n_agents, params.lambda_
    c = coeffs
    x, y, m = state.x, state.y, state.m
    return (((c.e - lam * (n - 1) * c.a_bar) * m
             - (c.a + lam * (n - 1) * c.b_bar) * x
             - (c.d + lam * (n - 1) * ((n - 2) * c.b_bar - c.c_bar)) * y) / (2 * lam))


def _control_bracket(params: ModelParams, coeffs: CoefficientSet, state: State, u: float) -> float:
    # impact cost of agent 1 against the others' rates plus the gain u * V_x
    n, lam = params.n_agents, params.lambda_
    c = coeffs
    x, y, m = state.x, state.y, state.m
    others = (n - 1) * (c.a_bar * m + ((n - 2) * c.b_bar - c.c_bar) * y + c.b_bar * x)
    v_x = -c.a * x - c.d * y + c.e * m
    return -lam * u * (u + others) + u * v_x


@dataclass(frozen=True)
class HJBCheck:
    residual: float
    scale: float
    foc_gap: float
    value: float


def hjb_residual(params: ModelParams, coeffs: CoefficientSet, state: State,
                 perturbation: float = 0.1) -> HJBCheck:
    """Residual of the HJB equation at ``state`` with the control at its maximiser.

    ``residual`` is rho V minus the generator terms, running reward and the
    maximised control bracket.  ``scale`` is the sum of the absolute values
    of those terms.  ``foc_gap`` is the smallest drop of the control
    bracket when the maximiser is scaled by 1 +/- ``perturbation``.
    """
    n, gam, beta, sigma, rho = (params.n_agents, params.gamma_, params.beta,
                                params.sigma, params.rho)
    c = coeffs
    x, y, m = state.x, state.y, state.m
    value = quadratic_value(coeffs, state)
    v_m = c.c * m + c.e * x + c.f * y
    v_y = c.b * y - c.d * x + c.f * m
    u_star = foc_rate(params, coeffs, state)
    best = _control_bracket(params, coeffs, state, u_star)
    terms = [
        m * x,
        -gam / 2 * x * x,
        -beta * m * v_m,
        0.5 * sigma**2 * c.c,
        (c.a_bar * m + c.b_bar * ((n - 2) * y + x) - c.c_bar * y) * v_y,
        best,
    ]
    residual = rho * value - math.fsum(terms)
    scale = abs(rho * value) + sum(abs(t) for t in terms)
    gap = min(best - _control_bracket(params, coeffs, state, u_star * (1 + s * perturbation))
              for s in (-1.0, 1.0))
    return HJBCheck(residual=residual, scale=scale, foc_gap=gap, value=value)


def sample_states(params: ModelParams, coeffs: CoefficientSet, n_states: int,
                  rng: np.random.Generator, width: float = 3.0) -> list[State]:
    """Uniform states in a box of ``width`` stationary standard deviations.

    The signal scale is sigma / sqrt(2 beta); inventories use the aim
    a_bar * signal scale / M_rate.
    """
    m_scale = params.sigma / math.sqrt(2 * params.beta)
    if m_scale == 0:
        m_scale = 1.0
    inv_scale = abs(coeffs.a_bar) * m_scale / coeffs.m_rate
    pts = rng.uniform(-width, width, size=(n_states, 3))
    return [State(x=p[0] * inv_scale, y=p[1] * inv_scale, m=p[2] * m_scale) for p in pts]
