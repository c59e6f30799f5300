"""Root finding for the rescaled closed-loop root and the end-to-end pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import BranchInvalid, DomainError, NoConvergence
from ..model import EquilibriumKind, ModelParams, Policy
from .coefficients import CoefficientSet, recover_coefficients, system_residuals
from .limit import delta_star, y_bound
from .phi import dphi_hat_dy, impact_eps, phi_hat, phi_hat_scale, y_max
from .roots import expand_bracket, safeguarded_newton

PHI_RTOL = 1e-12
RESIDUAL_RTOL = 1e-8
MAX_ITER = 200
# below this eps the small-impact root is a good enough seed on its own
DIRECT_EPS = 0.05
CONTINUATION_RATIO = 1.5


@dataclass(frozen=True)
class DeltaSolution:
    delta: float
    iterations: int
    phi_residual: float
    phi_scale: float
    eps: float
    continuation_steps: int


@dataclass(frozen=True)
class SolveReport:
    """Diagnostics of one closed-loop solve."""

    delta: float
    residuals: dict
    phi_residual: float
    iterations: int
    converged: bool
    expanded_d_residual: float
    expanded_d2_residual: float
    eps: float
    continuation_steps: int
    warnings: tuple = field(default=())

    @property
    def max_residual(self) -> float:
        return max(abs(v) for v in self.residuals.values())

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "residuals": dict(self.residuals),
            "max_residual": self.max_residual,
            "phi_residual": self.phi_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "expanded_d_residual": self.expanded_d_residual,
            "expanded_d2_residual": self.expanded_d2_residual,
            "eps": self.eps,
            "continuation_steps": self.continuation_steps,
            "warnings": list(self.warnings),
        }


def _solve_at(n: int, eps: float, seed: float) -> tuple[float, int]:
    """Root of phi_hat(n, eps, .) nearest to ``seed`` inside the admissible interval."""
    hi_limit = y_max(n, eps) * (1.0 - 1e-12)
    lo_limit = 1e-12 * hi_limit
    seed = min(max(seed, lo_limit), hi_limit)

    def f(y):
        return phi_hat(n, eps, y)

    width = 1e-3 * max(seed, 1e-3)
    try:
        lo, hi, flo, fhi = expand_bracket(f, seed, lo_limit, hi_limit, width)
        result = safeguarded_newton(
            f, lambda y: dphi_hat_dy(n, eps, y), lo, hi, seed,
            ftol=lambda y: PHI_RTOL * phi_hat_scale(n, eps, y),
            max_iter=MAX_ITER, flo=flo, fhi=fhi)
    except DomainError as exc:
        raise NoConvergence(f"iteration left the domain of Phi: {exc}") from exc
    if not result.converged:
        raise NoConvergence(f"Newton stalled at y={result.root!r} with phi={result.fval!r}")
    return result.root, result.iterations


def solve_delta(params: ModelParams) -> DeltaSolution:
    """Rescaled root delta_N(lambda) of Phi_N(lambda, .) = 0.

    The iteration is seeded at the small-impact root; for larger
    eps = rho sqrt(lambda/gamma) the root is followed along a geometric eps
    grid so each Newton solve starts close to its target.

    Raises
    ------
    NoConvergence
        If no sign change is found near the seed or Newton fails.
    """
    n = params.n_agents
    eps = impact_eps(params)
    y = delta_star(n)
    total_iter = 0
    steps = 0
    if eps > DIRECT_EPS:
        e = DIRECT_EPS
        while e < eps:
            y, it = _solve_at(n, e, y)
            total_iter += it
            steps += 1
            e *= CONTINUATION_RATIO
    y, it = _solve_at(n, eps, y)
    total_iter += it
    return DeltaSolution(delta=y, iterations=total_iter,
                         phi_residual=params.gamma_ * abs(phi_hat(n, eps, y)),
                         phi_scale=params.gamma_ * phi_hat_scale(n, eps, y),
                         eps=eps, continuation_steps=steps)


def closed_loop_policy(params: ModelParams) -> tuple[Policy, CoefficientSet, SolveReport]:
    """Solve, recover all coefficients and check them a posteriori.

    Raises
    ------
    NoConvergence, BranchInvalid, DenominatorVanished, SignConstraintViolated
        Whenever the parameters are outside the regime where the solved
        branch is a valid equilibrium.  No unchecked result is returned.
    """
    sol = solve_delta(params)
    if not 0 < sol.delta <= y_bound(params.n_agents):
        raise BranchInvalid(f"delta = {sol.delta!r} outside (0, {y_bound(params.n_agents)!r}]")
    try:
        coeffs = recover_coefficients(params, sol.delta, check=True)
    except DomainError as exc:
        raise BranchInvalid(str(exc)) from exc
    res = system_residuals(params, coeffs)
    worst = max(res.max_relative, abs(res.expanded_d2))
    if not math.isfinite(worst) or worst > RESIDUAL_RTOL:
        raise BranchInvalid(f"equation residual {worst:.3g} exceeds {RESIDUAL_RTOL:g}; "
                            "lambda is too large for the solved branch")
    report = SolveReport(delta=sol.delta, residuals=dict(res.relative),
                         phi_residual=sol.phi_residual, iterations=sol.iterations,
                         converged=True, expanded_d_residual=res.expanded_d,
                         expanded_d2_residual=res.expanded_d2, eps=sol.eps,
                         continuation_steps=sol.continuation_steps,
                         warnings=coeffs.warnings)
    m_rate = coeffs.m_rate
    policy = Policy(m_rate=m_rate, m_aim=coeffs.m_aim(params.gamma_),
                    kind=EquilibriumKind.CLOSED_LOOP,
                    feedback=(coeffs.a_bar, coeffs.b_bar, coeffs.c_bar))
    return policy, coeffs, report
