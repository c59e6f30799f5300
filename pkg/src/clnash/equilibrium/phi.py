"""The scalar equation Phi_N(lambda, y) = 0 for the rescaled root.

With d = sqrt(gamma lambda) y, a = sqrt(gamma lambda) theta and
b = sqrt(gamma lambda) psi, the equation divided by gamma depends on the
parameters only through N and eps = rho sqrt(lambda / gamma).  Working in
these variables avoids the 1/lambda prefactor of the displayed form, and
eps = 0 is exactly the small-impact limit.

The functions accept complex ``y`` so the derivative can be taken by the
complex-step method.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..model import ModelParams


def impact_eps(params: ModelParams) -> float:
    """eps = rho * sqrt(lambda / gamma)."""
    return params.rho * math.sqrt(params.lambda_ / params.gamma_)


def theta_radicand(n: int, eps: float, y):
    return (eps * eps + (8 * n * n - 4 * eps * (3 * n + 1) * y) / (n + 1) ** 2
            - 4 * (3 * n + 1) * y * y / ((n - 1) * (n + 1) ** 2))


def y_max(n: int, eps: float) -> float:
    """Largest y with a non-negative Theta radicand (the bound on delta at eps = 0)."""
    qa = 4 * (3 * n + 1) / ((n - 1) * (n + 1) ** 2)
    qb = 4 * eps * (3 * n + 1) / (n + 1) ** 2
    qc = -(eps * eps + 8 * n * n / (n + 1) ** 2)
    return (-qb + math.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)


def _sqrt(x):
    if isinstance(x, complex) or np.iscomplexobj(x):
        if np.real(x) < 0:
            raise DomainError("Theta radicand is negative")
        return np.sqrt(x)
    if x < 0:
        raise DomainError(f"Theta radicand {x:.3g} is negative")
    return math.sqrt(x)


def theta_hat(n: int, eps: float, y):
    """Rescaled a(d) / sqrt(gamma lambda)."""
    root = _sqrt(theta_radicand(n, eps, y))
    return ((n + 1) ** 2 * (root - eps) + (6 * n + 2) * y) / (4 * n * n)


def psi_hat(n: int, eps: float, y, theta=None):
    """Rescaled b(d) / sqrt(gamma lambda)."""
    t = theta_hat(n, eps, y) if theta is None else theta
    den = (n + 1) * (eps * (n * n - 1) + 4 * t * (n - 1) + 2 * (n - 3) * y)
    if den == 0:
        raise DomainError("Psi denominator vanishes")
    return 2 * (n - 1) * (t - t * n + 2 * y) ** 2 / den


def phi_hat_terms(n: int, eps: float, y) -> list:
    """The five additive terms of Phi_N / gamma (before summation)."""
    t = theta_hat(n, eps, y)
    s = psi_hat(n, eps, y, theta=t)
    k = (n - 1) * (n + 1) ** 2
    return [
        y * (n + 1) * eps * (n * n - 1) / k,
        -2 * y * (n + 1) * s / k,
        ((n - 6) * n + 1) * y * y / k,
        -2 * t * t * (n - 1) ** 2 * n / k,
        t * (n - 1) * (n * s + 8 * n * y + s) / k,
    ]


def phi_hat(n: int, eps: float, y):
    return sum(phi_hat_terms(n, eps, y))


def phi_hat_scale(n: int, eps: float, y: float) -> float:
    return sum(abs(t) for t in phi_hat_terms(n, eps, y))


def dphi_hat_dy(n: int, eps: float, y: float, h: float = 1e-20) -> float:
    """Complex-step derivative of phi_hat in y (exact to rounding)."""
    return float(np.imag(phi_hat(n, eps, complex(y, h)))) / h


def phi(params: ModelParams, y: float) -> float:
    """Phi_N(lambda, y) evaluated through the rescaled form."""
    return params.gamma_ * phi_hat(params.n_agents, impact_eps(params), y)


def phi_display(params: ModelParams, y: float) -> float:
    """Phi_N(lambda, y) evaluated literally as displayed, 1/lambda prefactor and all.

    Only used as an independent check of :func:`phi` at moderate lambda.
    """
    n = params.n_agents
    lam, gam, rho = params.lambda_, params.gamma_, params.rho
    sgl = math.sqrt(gam * lam)
    rad = (rho**2 + (8 * gam * n * n - 4 * rho * (3 * n + 1) * y * sgl) / (lam * (n + 1) ** 2)
           - 4 * gam * (3 * n + 1) * y * y / (lam * (n - 1) * (n + 1) ** 2))
    if rad < 0:
        raise DomainError("Theta radicand is negative")
    theta = (lam * (n + 1) ** 2 * (math.sqrt(rad) - rho) + (6 * n + 2) * y * sgl) / (4 * n * n)
    psi = (2 * (n - 1) * (theta - theta * n + 2 * y * sgl) ** 2
           / ((n + 1) * (rho * lam * (n * n - 1) + 4 * theta * (n - 1) + 2 * (n - 3) * y * sgl)))
    inner = (y * ((n + 1) * sgl * (rho * lam * (n * n - 1) - 2 * psi) + gam * lam * ((n - 6) * n + 1) * y)
             - 2 * theta**2 * (n - 1) ** 2 * n
             + theta * (n - 1) * (n * psi + 8 * n * y * sgl + psi))
    return inner / (lam * (n - 1) * (n + 1) ** 2)
