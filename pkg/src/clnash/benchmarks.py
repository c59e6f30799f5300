"""Central-planner and open-loop benchmarks plus small-impact asymptotics.

Both benchmarks have the single-agent form of a linear tracking rule in
which the impact coefficient is multiplied by a constant: 2N for the
planner, N + 1 for open-loop competition.  The closed-loop counterpart of
that constant is captured by Delta(N), which depends on the number of agents
only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .equilibrium.limit import d_bar, delta_star
from .model import EquilibriumKind, ModelParams, Policy

REL_FLOOR = 1e-14


def rel_err(value: float, reference: float, floor: float = REL_FLOOR) -> float:
    """|value - reference| / max(|reference|, floor)."""
    return abs(value - reference) / max(abs(reference), floor)


def tracking_rule(gamma_: float, rho: float, beta: float, impact: float) -> tuple[float, float]:
    """(rate, aim) of the single-agent tracking rule with effective impact ``impact``."""
    root = math.sqrt(gamma_ / impact + rho * rho / 4.0)
    return root - rho / 2.0, (root + rho / 2.0) / (root + rho / 2.0 + beta)


def central_planner_policy(params: ModelParams) -> Policy:
    """Planner rule: the single-agent solution with impact 2 N lambda."""
    rate, aim = tracking_rule(params.gamma_, params.rho, params.beta,
                              2 * params.n_agents * params.lambda_)
    return Policy(m_rate=rate, m_aim=aim, kind=EquilibriumKind.CENTRAL_PLANNER)


def open_loop_policy(params: ModelParams) -> Policy:
    """Open-loop equilibrium rule: the single-agent solution with impact (N + 1) lambda.

    The aim denominator is sqrt(gamma/((N+1) lambda) + rho^2/4) + rho/2 + beta.
    """
    rate, aim = tracking_rule(params.gamma_, params.rho, params.beta,
                              (params.n_agents + 1) * params.lambda_)
    return Policy(m_rate=rate, m_aim=aim, kind=EquilibriumKind.OPEN_LOOP)


def central_planner_value(params: ModelParams) -> float:
    """Per-agent planner value for a zero initial signal."""
    n, lam, gam, rho, beta, sigma = (params.n_agents, params.lambda_, params.gamma_,
                                     params.rho, params.beta, params.sigma)
    root = math.sqrt(gam / (2 * n * lam) + rho * rho / 4)
    return sigma**2 / (2 * rho) / (2 * n * lam * (rho + 2 * beta)) / (rho / 2 + beta + root) ** 2


def open_loop_value(params: ModelParams) -> float:
    """Per-agent open-loop equilibrium value for a zero initial signal."""
    n, lam, gam, rho, beta, sigma = (params.n_agents, params.lambda_, params.gamma_,
                                     params.rho, params.beta, params.sigma)
    pol = open_loop_policy(params)
    mr, ma = pol.m_rate, pol.m_aim
    first = ((1 + 2 * lam * n * mr**2 * ma / gam) * mr * ma / gam
             * sigma**2 / (rho * (2 * beta + rho) * (beta + rho + mr)))
    second = ((sigma * mr * ma / gam) ** 2 / (rho * (2 * beta + rho))
              * (lam * n + (gam + 2 * lam * n * mr**2) / ((rho + 2 * mr) * (beta + rho + mr))))
    return first - second


# -- asymptotics -------------------------------------------------------------

def delta_of_n(n_agents: int) -> float:
    """Leading multiplier Delta(N) of sqrt(gamma/lambda) in the closed-loop rate."""
    n = n_agents
    y = delta_star(n)
    rad = (2 * n**3 - 2 * n**2 - 3 * n * y * y - y * y) / (n - 1)
    return math.sqrt(rad) / (2 * n * n) + (2 * n + 1) * y / (2 * n * n)


def h4_limit(n_agents: int) -> float:
    """Limit h4^0 of sqrt(lambda/gamma) h4 as lambda -> 0.

    Written with D = D_bar(delta*_N).  The factors multiplying D in the
    second denominator and in the last bracket are (N-1)(N+1) and
    (N+1)(N^2+2N-3); these follow from expanding h4 to leading order and are
    what makes h4^0 (N+1) Delta(N) = 1 hold.
    """
    n = n_agents
    y = delta_star(n)
    dd = d_bar(n, y)
    return ((dd + y) / n
            - (n + 1) * (y - dd * (n - 1)) ** 2
            / (8 * n * n * (dd * (n - 1) * (n + 1) + (n * n - n - 1) * y) ** 2)
            * (dd * (n + 1) * (n * n + 2 * n - 3) + (3 * n * n - 4 * n - 3) * y))


def chi_n(n_agents: int, y: float) -> float:
    """chi_N(y); vanishes at y = delta*_N, which is the identity h4^0 (N+1) Delta(N) = 1."""
    n = n_agents
    dd = d_bar(n, y)
    return ((dd + y) / n
            - (n + 1) * ((n**3 + 3 * n * n - n - 3) * dd + (3 * n * n - 4 * n - 3) * y)
            * (y - (n - 1) * dd) ** 2
            / (8 * n * n * ((n * n - 1) * dd + (n * n - n - 1) * y) ** 2)
            - 2 * n * n / ((n + 1) * ((n + 1) * dd + (2 * n + 1) * y)))


@dataclass(frozen=True)
class AsymptoticPolicy:
    """Leading-order rule: M_rate ~ rate_leading * sqrt(gamma/lambda), M_aim ~ aim_leading."""

    rate_leading: float
    aim_leading: float
    kind: EquilibriumKind

    def m_rate(self, params: ModelParams) -> float:
        return self.rate_leading * math.sqrt(params.gamma_ / params.lambda_)


def asymptotic_policy(kind: EquilibriumKind, n_agents: int) -> AsymptoticPolicy:
    kind = EquilibriumKind(kind)
    if kind is EquilibriumKind.CLOSED_LOOP:
        lead = delta_of_n(n_agents)
    elif kind is EquilibriumKind.OPEN_LOOP:
        lead = 1.0 / math.sqrt(n_agents + 1)
    else:
        lead = 1.0 / math.sqrt(2 * n_agents)
    return AsymptoticPolicy(rate_leading=lead, aim_leading=1.0, kind=kind)


@dataclass(frozen=True)
class ValueBreakdown:
    """Value ~ zeroth + half_order * sqrt(lambda) for small impact."""

    zeroth: float
    half_order: float
    kind: EquilibriumKind

    def evaluate(self, lambda_: float) -> float:
        return self.zeroth + self.half_order * math.sqrt(lambda_)


def _half_order(params: ModelParams, lead: float) -> float:
    # common form for any rule whose rate is lead * sqrt(gamma/lambda) + O(1)
    n = params.n_agents
    return (-params.sigma**2 * (1 + 2 * lead * lead * n)
            / (4 * params.gamma_**1.5 * params.rho * lead))


def closed_loop_value_asymptotic(params: ModelParams) -> ValueBreakdown:
    return ValueBreakdown(params.frictionless_value, _half_order(params, delta_of_n(params.n_agents)),
                          EquilibriumKind.CLOSED_LOOP)


def open_loop_value_asymptotic(params: ModelParams) -> ValueBreakdown:
    n = params.n_agents
    half = -params.sigma**2 * (1 + 3 * n) / (4 * params.rho * params.gamma_**1.5 * math.sqrt(1 + n))
    return ValueBreakdown(params.frictionless_value, half, EquilibriumKind.OPEN_LOOP)


def central_planner_value_asymptotic(params: ModelParams) -> ValueBreakdown:
    n = params.n_agents
    half = -params.sigma**2 / (2 * params.rho) * math.sqrt(2 * n) / params.gamma_**1.5
    return ValueBreakdown(params.frictionless_value, half, EquilibriumKind.CENTRAL_PLANNER)


def value_asymptotic(params: ModelParams, kind: EquilibriumKind) -> ValueBreakdown:
    kind = EquilibriumKind(kind)
    return {
        EquilibriumKind.CLOSED_LOOP: closed_loop_value_asymptotic,
        EquilibriumKind.OPEN_LOOP: open_loop_value_asymptotic,
        EquilibriumKind.CENTRAL_PLANNER: central_planner_value_asymptotic,
    }[kind](params)


def w_bar_terms(params: ModelParams, m_rate: float, m_aim: float) -> tuple[float, float, float]:
    """Exact split value = w1 - w2 - w3 for a symmetric linear rule."""
    n, lam, gam, rho, beta, sigma = (params.n_agents, params.lambda_, params.gamma_,
                                     params.rho, params.beta, params.sigma)
    k = m_rate * m_aim / gam
    w1 = (1 + 2 * lam * n * m_rate**2 * m_aim / gam) * k * sigma**2 / (
        rho * (2 * beta + rho) * (beta + rho + m_rate))
    w2 = lam * n * k * k * sigma**2 / (2 * beta * rho + rho * rho)
    w3 = (gam / 2 + lam * n * m_rate**2) * k * k * 2 * sigma**2 / (
        rho * (2 * beta + rho) * (rho + 2 * m_rate) * (beta + rho + m_rate))
    return w1, w2, w3


def w_bar_expansions(params: ModelParams, lead: float, r1: float, a1: float):
    """Zeroth and sqrt(lambda) coefficients of w1, w2, w3.

    Assumes M_rate = lead sqrt(gamma/lambda) + r1 + O(sqrt(lambda)) and
    M_aim = 1 + a1 sqrt(lambda) + O(lambda).  Returns three
    ``(zeroth, half_order)`` pairs.
    """
    dl, n = lead, params.n_agents
    g, s, r, b = params.gamma_, params.sigma, params.rho, params.beta
    sg = math.sqrt(g)
    base = s * s / (g * r * (2 * b + r))
    w1 = ((1 + 2 * dl * dl * n) * base,
          s * s / (dl * g * g * r * (2 * b + r))
          * (a1 * dl * g + 4 * a1 * dl**3 * g * n + 4 * dl * dl * sg * n * r1
             - sg * b - 2 * dl * dl * sg * n * b - sg * r - 2 * dl * dl * sg * n * r))
    w2 = (dl * dl * n * base,
          2 * n * s * s * (a1 * dl * dl * g + dl * sg * r1) / (g * g * r * (2 * b + r)))
    w3 = ((1 + 2 * dl * dl * n) * base / 2,
          s * s / (4 * dl * g**1.5 * r * (2 * b + r))
          * (4 * a1 * dl * sg * (1 + 2 * dl * dl * n) - 2 * b
             + 2 * dl * dl * n * (4 * r1 - 2 * b - 3 * r) - 3 * r))
    return w1, w2, w3
