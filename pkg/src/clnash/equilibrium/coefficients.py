"""Recovery of the ten value/feedback coefficients from the scalar root.

Given the rescaled root delta, every coefficient of the quadratic value
function

    V(x, y, m) = -a/2 x^2 + b/2 y^2 + c/2 m^2 - d x y + e x m + f y m + g

and of the symmetric feedback rule ``rate = a_bar m + b_bar sum(others) - c_bar x``
follows in closed form.  :func:`system_residuals` plugs them back into the
seven coefficient-matching equations and the three consistency equations.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from ..errors import DenominatorVanished, SignConstraintViolated
from ..model import ModelParams
from .phi import impact_eps, psi_hat, theta_hat

EQUATION_KEYS = ("a", "b", "d", "g", "c", "e", "f", "a_bar", "b_bar", "c_bar")
C_CROSSCHECK_RTOL = 1e-8


@dataclass(frozen=True)
class CoefficientSet:
    """Value-function and feedback coefficients of the symmetric equilibrium."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    g: float
    a_bar: float
    b_bar: float
    c_bar: float
    h1: float
    h2: float
    h3: float
    h4: float
    delta: float
    n_agents: int
    warnings: tuple = field(default=(), compare=False)

    @property
    def m_rate(self) -> float:
        """Relative trading speed c_bar - (N-1) b_bar."""
        return self.c_bar - (self.n_agents - 1) * self.b_bar

    def m_aim(self, gamma_: float) -> float:
        return self.a_bar * gamma_ / self.m_rate

    def to_dict(self) -> dict:
        out = asdict(self)
        out["warnings"] = list(self.warnings)
        return out


def _nonzero(name: str, value: float) -> float:
    if value == 0 or not math.isfinite(value):
        raise DenominatorVanished(f"denominator {name} vanished (value {value!r})")
    return value


def recover_coefficients(params: ModelParams, delta: float, *, check: bool = True) -> CoefficientSet:
    """All coefficients as functions of d = sqrt(gamma lambda) * delta.

    Parameters
    ----------
    params : ModelParams
        Parameters with the impact already scaled as intended.
    delta : float
        Rescaled root, normally from :func:`solve_delta`.
    check : bool
        Enforce the sign constraints a_bar > 0 and M_rate > 0 (and a >= d/2
        for two agents).  Denominators are always checked.

    Raises
    ------
    DenominatorVanished
        If one of h2, h4, h3 - beta - rho or the b/f denominators is zero.
    SignConstraintViolated
        If ``check`` is set and a sign constraint fails.
    """
    n = params.n_agents
    lam, gam, rho, beta, sigma = (params.lambda_, params.gamma_, params.rho,
                                  params.beta, params.sigma)
    eps = impact_eps(params)
    sgl = math.sqrt(gam * lam)
    d = sgl * delta
    theta = theta_hat(n, eps, delta)
    a = sgl * theta
    b = sgl * psi_hat(n, eps, delta, theta=theta)

    b_bar = (-a * n + a + 2 * d) / (lam - lam * n * n)
    c_bar = -(d - a * n) / (lam + lam * n)

    den_bf = _nonzero("4a(N-1)+2d(N-3)+lambda(N^2-1)rho",
                      4 * a * (n - 1) + 2 * d * (n - 3) + lam * (n * n - 1) * rho)
    h1 = 2 * d - (n - 1) * a
    h2 = _nonzero("h2", 2 * a * (n - 1) + d * (n - 3) + lam * (n * n - 1) * (beta + rho))
    h3 = -(2 * a * (n - 1) + (n - 3) * d) / (lam * (n - 1) * (n + 1))
    h2_den = _nonzero("2 h2 - lambda(N^2-1)(2 beta + rho)",
                      2 * h2 - lam * (n * n - 1) * (2 * beta + rho))
    h4 = (2 * h1**2 * (-a * (n * n + 2 * n - 3) + 4 * d - lam * (n * n - 1) * rho)
          / (h2 * lam * (n + 1) ** 2 * h2_den)
          + ((n - 1) * d + 2 * a * n) / (lam * (n + 1) ** 2) + beta + rho)
    _nonzero("h4", h4)
    h3_den = _nonzero("h3 - beta - rho", h3 - beta - rho)

    e = 1.0 / h4
    f = ((d + h3 * lam * (n - 1) - 2 * h1**2 * (n - 1) / ((n + 1) * den_bf))
         / (lam * (n + 1) * h4 * h3_den))
    # c exactly as displayed, with its nested 1/h4 factors
    share = 1.0 / h4 - (n - 1) / (h4 * (n + 1))
    c = 2 * (
        -(share * (d + h3 * lam * (n - 1)) / (2 * lam)
          - 2 * h1**2 * (n - 1) / (h4 * lam * (n + 1) ** 2 * den_bf))
        / (h4 * lam * (n + 1) * (-beta + h3 - rho))
        - share**2 / (4 * lam)
    ) / (-2 * beta - rho)
    a_bar = e / ((n + 1) * lam)
    g = sigma**2 / (2 * rho) * c

    warnings = []
    c_alt = (f * a_bar + (e - lam * (n - 1) * a_bar) ** 2 / (4 * lam)) / ((rho + 2 * beta) / 2)
    if abs(c - c_alt) > C_CROSSCHECK_RTOL * max(abs(c), abs(c_alt), 1e-300):
        warnings.append(f"c differs from its rearranged form: {c!r} vs {c_alt!r}")

    coeffs = CoefficientSet(a=a, b=b, c=c, d=d, e=e, f=f, g=g, a_bar=a_bar, b_bar=b_bar,
                            c_bar=c_bar, h1=h1, h2=h2, h3=h3, h4=h4, delta=float(delta),
                            n_agents=n, warnings=tuple(warnings))
    if check:
        check_signs(coeffs)
    return coeffs


def check_signs(coeffs: CoefficientSet) -> None:
    """Raise SignConstraintViolated unless a_bar > 0, M_rate > 0 (and a >= d/2 for N = 2)."""
    if not coeffs.a_bar > 0:
        raise SignConstraintViolated(f"a_bar = {coeffs.a_bar:.6g} is not positive")
    if not coeffs.m_rate > 0:
        raise SignConstraintViolated(f"M_rate = {coeffs.m_rate:.6g} is not positive")
    if coeffs.n_agents == 2 and coeffs.a < coeffs.d / 2:
        raise SignConstraintViolated(f"a = {coeffs.a:.6g} < d/2 = {coeffs.d / 2:.6g} for N = 2")


@dataclass(frozen=True)
class SystemResiduals:
    """Residuals of the ten-equation system plus the two scalar d-equations.

    ``absolute`` holds right-hand side minus left-hand side for every
    equation; ``relative`` divides each by the largest absolute term of that
    equation (zero when all terms vanish).
    """

    absolute: dict
    relative: dict
    expanded_d: float
    expanded_d2: float

    @property
    def max_relative(self) -> float:
        return max(abs(v) for v in self.relative.values())

    def as_vector(self) -> list[float]:
        return [self.relative[k] for k in EQUATION_KEYS]


def _rel(terms) -> tuple[float, float]:
    total = math.fsum(terms)
    scale = max(abs(t) for t in terms)
    return total, (total / scale if scale > 0 else 0.0)


def expanded_d_terms(params: ModelParams, a: float, b: float, d: float) -> list[float]:
    """Terms of the scalar d-equation written in a, b and d."""
    n, lam, rho = params.n_agents, params.lambda_, params.rho
    k = lam * (n - 1) * (n + 1) ** 2
    return [
        -2 * a * a * n * (n - 1) ** 2 / k,
        a * (n - 1) * (b * n + b + 8 * d * n) / k,
        d * (-2 * b * (n + 1) + d * (n - 6) * n + d) / k,
        d * lam * (n - 1) * (n + 1) ** 2 * rho / k,
    ]


def expanded_d2_terms(params: ModelParams, d: float) -> list[float]:
    """Terms of the d-equation that eliminates a through the radical k1."""
    n, lam, rho, gam = params.n_agents, params.lambda_, params.rho, params.gamma_
    rad = ((-4 * d * d * (3 * n + 1) + 4 * d * lam * (-3 * n * n + 2 * n + 1) * rho
            + lam * (n - 1) * (lam * rho**2 + n * n * (8 * gam + lam * rho**2) + 2 * lam * n * rho**2))
           / ((n - 1) * (n + 1) ** 2))
    k1 = math.sqrt(rad) if rad >= 0 else float("nan")
    kk = k1 - lam * rho
    return [
        -((n + 1) * kk + 2 * d) * (n + 1) * ((n - 1) * kk - 2 * d) / (8 * lam * n**3),
        d * ((n * n - 1) * kk + 2 * d * (n * n - n - 1)) / (2 * lam * (n - 1) * n * n),
        d * rho,
        (n + 1) ** 3 * ((n - 1) * kk - 2 * d) ** 3
        / (32 * lam * n**4 * ((n - 1) * ((n + 1) * k1 + lam * (n * n - n - 1) * rho)
                              + 2 * d * (n * n - n - 1))),
    ]


def equation_terms(params: ModelParams, co: CoefficientSet) -> dict:
    """Additive terms of each of the ten equations (they should sum to zero)."""
    n, lam, gam, rho, beta, sigma = (params.n_agents, params.lambda_, params.gamma_,
                                     params.rho, params.beta, params.sigma)
    a, b, c, d, e, f, g = co.a, co.b, co.c, co.d, co.e, co.f, co.g
    ab, bb, cb = co.a_bar, co.b_bar, co.c_bar
    k = n - 1
    x_coef = a + lam * k * bb
    y_coef = d + lam * k * ((n - 2) * bb - cb)
    m_coef = e - lam * k * ab
    others = (n - 2) * bb - cb
    return {
        "a": [rho * a / 2, -gam / 2, -d * bb, x_coef**2 / (4 * lam)],
        "b": [-rho * b / 2, b * others, y_coef**2 / (4 * lam)],
        "d": [rho * d, b * bb, -d * others, x_coef * y_coef / (2 * lam)],
        "g": [-g, sigma**2 / (2 * rho) * c],
        "c": [-(rho + 2 * beta) / 2 * c, f * ab, m_coef**2 / (4 * lam)],
        "e": [-(rho + beta) * e, 1.0, -d * ab, bb * f, -m_coef * x_coef / (2 * lam)],
        "f": [b * ab, f * others, -(rho + beta) * f, -m_coef * y_coef / (2 * lam)],
        "a_bar": [ab, -m_coef / (2 * lam)],
        "b_bar": [k * bb, y_coef / (2 * lam)],
        "c_bar": [cb, -x_coef / (2 * lam)],
    }


def system_residuals(params: ModelParams, coeffs: CoefficientSet) -> SystemResiduals:
    """Evaluate every equation of the system at ``coeffs``.

    Never raises for large residuals; callers decide what is acceptable.
    """
    absolute, relative = {}, {}
    for key, terms in equation_terms(params, coeffs).items():
        absolute[key], relative[key] = _rel(terms)
    _, rel_d = _rel(expanded_d_terms(params, coeffs.a, coeffs.b, coeffs.d))
    _, rel_d2 = _rel(expanded_d2_terms(params, coeffs.d))
    return SystemResiduals(absolute=absolute, relative=relative,
                           expanded_d=rel_d, expanded_d2=rel_d2)
