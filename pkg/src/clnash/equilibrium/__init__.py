"""Closed-loop equilibrium: scalar root, coefficient recovery and residuals."""
from .coefficients import CoefficientSet, SystemResiduals, recover_coefficients, system_residuals
from .limit import cardano_roots, delta_star, gamma_limit, p_cubic, phi_limit, y_bound
from .phi import phi, phi_hat
from .solver import DeltaSolution, SolveReport, closed_loop_policy, solve_delta

__all__ = [
    "CoefficientSet", "SystemResiduals", "recover_coefficients", "system_residuals",
    "cardano_roots", "delta_star", "gamma_limit", "p_cubic", "phi_limit", "y_bound",
    "phi", "phi_hat", "DeltaSolution", "SolveReport", "closed_loop_policy", "solve_delta",
]
