"""Small-impact limit of the closed-loop problem.

At lambda = 0 the rescaled root delta*_N depends on N only.  It is a root
of a cubic in y^2 (obtained by squaring away the radical in Gamma(N, y)),
so the three Cardano candidates are filtered by checking which one
actually zeroes Gamma.
"""
from __future__ import annotations

import cmath
import math
from functools import lru_cache

import numpy as np

from ..errors import DegenerateCubic, DomainError, NoAdmissibleRoot

GAMMA_FILTER_RTOL = 1e-6


def y_bound(n_agents: int) -> float:
    """Upper end sqrt(2) N sqrt((N-1)/(3N+1)) of the admissible root interval."""
    n = n_agents
    return math.sqrt(2.0) * n * math.sqrt((n - 1) / (3 * n + 1))


def p_cubic(n_agents: int) -> tuple[int, int, int, int]:
    """Integer coefficients (highest degree first) of P_N as a cubic in z = y^2."""
    n = int(n_agents)
    if n < 2:
        raise DomainError("n_agents must be >= 2")
    c3 = 8 * n**6
    c2 = -16 * n**7 + 4 * n**6 + 48 * n**5 - 52 * n**4 + 8 * n**3 + 20 * n**2 - 8 * n - 4
    c1 = (8 * n**8 - 20 * n**7 + 46 * n**6 - 112 * n**5 + 114 * n**4
          - 4 * n**3 - 46 * n**2 + 8 * n + 6)
    c0 = (-9 * n**8 + 48 * n**7 - 100 * n**6 + 96 * n**5 - 30 * n**4
          - 16 * n**3 + 12 * n**2 - 1)
    return c3, c2, c1, c0


def eval_cubic(coeffs, z):
    c3, c2, c1, c0 = coeffs
    return ((c3 * z + c2) * z + c1) * z + c0


def _cbrt(w: complex) -> complex:
    if w == 0:
        return 0j
    if w.imag == 0.0:
        return complex(math.copysign(abs(w.real) ** (1.0 / 3.0), w.real))
    return cmath.exp(cmath.log(w) / 3.0)


def cardano_roots(coeffs, polish: int = 2) -> list[complex]:
    """All three roots of ``c3 z^3 + c2 z^2 + c1 z + c0`` by Cardano's formula.

    The closed-form roots are refined with up to ``polish`` Newton steps on
    the original polynomial; a step is kept only if it lowers the residual.

    Raises
    ------
    DegenerateCubic
        If the leading coefficient is zero.
    """
    c3, c2, c1, c0 = (complex(c) for c in coeffs)
    if c3 == 0:
        raise DegenerateCubic("leading coefficient is zero; not a cubic")
    a, b, c = c2 / c3, c1 / c3, c0 / c3
    # depressed cubic t^3 + p t + q with z = t - a/3
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = cmath.sqrt((q / 2.0) ** 2 + (p / 3.0) ** 3)
    w1, w2 = -q / 2.0 + disc, -q / 2.0 - disc
    w = w1 if abs(w1) >= abs(w2) else w2
    u = _cbrt(w)
    omega = complex(-0.5, math.sqrt(3.0) / 2.0)
    roots = []
    for k in range(3):
        uk = u * omega**k
        vk = -p / (3.0 * uk) if uk != 0 else 0j
        roots.append(uk + vk - a / 3.0)

    def poly(x):
        return ((c3 * x + c2) * x + c1) * x + c0

    def dpoly(x):
        return (3.0 * c3 * x + 2.0 * c2) * x + c1

    out = []
    for r in roots:
        for _ in range(polish):
            dp = dpoly(r)
            if dp == 0:
                break
            step = poly(r) / dp
            if not np.isfinite(step) or abs(poly(r - step)) >= abs(poly(r)):
                break  # near a multiple root Newton can overshoot
            r = r - step
        if abs(r.imag) <= 1e-14 * max(1.0, abs(r.real)):
            r = complex(r.real, 0.0)
        out.append(r)
    return out


def _radicand(n: int, y: float) -> float:
    return 2 * n**3 - 2 * n**2 - (3 * n + 1) * y * y


def d_bar(n_agents: int, y: float) -> float:
    """sqrt((2N^3 - 2N^2 - (3N+1) y^2) / ((N-1)(N+1)^2)), the limit radical."""
    n = n_agents
    rad = _radicand(n, y)
    if -1e-13 * (2 * n**3) <= rad < 0:
        rad = 0.0  # rounding at the end point of the interval
    if rad < 0:
        raise DomainError(f"radicand 2N^3-2N^2-(3N+1)y^2 = {rad:.3g} < 0 at y={y!r}")
    return math.sqrt(rad / ((n - 1) * (n + 1) ** 2))


def gamma_parts(n_agents: int, y: float) -> tuple[float, float, float]:
    """Split Gamma(N, y) = r * A + B with r the limit radical.

    Returns ``(r, A, B)``; squaring the separated form gives
    ``B^2 - r^2 A^2 = 2 N^6 P_N(y^2)``.
    """
    n = n_agents
    r = d_bar(n, y)
    y2 = y * y
    radical_coeff = (-3 * n**7 + 8 * n**6 * y2 + 5 * n**6 + 4 * n**5 * y2 + 2 * n**5
                     - 20 * n**4 * y2 - 6 * n**4 - 14 * n**3 * y2 + n**3
                     + 10 * n**2 * y2 + n**2 + 10 * n * y2 + 2 * y2)
    y3 = y2 * y
    rest = (4 * n**6 * y3 - 24 * n**4 * y3 - 8 * n**3 * y3 + 18 * n**2 * y3
            - 4 * n**7 * y + 17 * n**6 * y - 10 * n**5 * y - 12 * n**4 * y
            + 6 * n**3 * y + 3 * n**2 * y + 12 * n * y3 + 2 * y3)
    return r, radical_coeff, rest


def gamma_limit(n_agents: int, y: float) -> float:
    """Gamma(N, y), whose zero in the admissible interval is delta*_N."""
    r, a, b = gamma_parts(n_agents, y)
    return r * a + b


def _gamma_scale(n_agents: int, y: float) -> float:
    """Sum of the absolute values of the monomials making up Gamma(N, y)."""
    n = n_agents
    r = d_bar(n, y)
    y = abs(y)
    y2, y3 = y * y, y * y * y
    radical_abs = (3 * n**7 + 8 * n**6 * y2 + 5 * n**6 + 4 * n**5 * y2 + 2 * n**5
                   + 20 * n**4 * y2 + 6 * n**4 + 14 * n**3 * y2 + n**3
                   + 10 * n**2 * y2 + n**2 + 10 * n * y2 + 2 * y2)
    rest_abs = (4 * n**6 * y3 + 24 * n**4 * y3 + 8 * n**3 * y3 + 18 * n**2 * y3
                + 4 * n**7 * y + 17 * n**6 * y + 10 * n**5 * y + 12 * n**4 * y
                + 6 * n**3 * y + 3 * n**2 * y + 12 * n * y3 + 2 * y3)
    return r * radical_abs + rest_abs


def xi_limit(n_agents: int, y: float, gamma_: float = 1.0) -> float:
    """Denominator Xi(N, y) of the lambda -> 0 limit of Phi_N."""
    n = n_agents
    sg = math.sqrt(gamma_)
    r = sg * d_bar(n, y)
    return 4 * (n - 1) * n**4 * (n * n * r - r + sg * (n * n * y - n * y - y))


def phi_limit(n_agents: int, y: float, gamma_: float = 1.0) -> float:
    """Phi_N(0, y) = gamma^{3/2} Gamma(N, y) / Xi(N, y)."""
    xi = xi_limit(n_agents, y, gamma_)
    if xi == 0:
        raise DomainError("Xi(N, y) vanishes")
    return gamma_**1.5 * gamma_limit(n_agents, y) / xi


def cubic_candidates(n_agents: int) -> list[float]:
    """Real, positive Cardano roots of P_N mapped to y = sqrt(z) inside the bound."""
    coeffs = p_cubic(n_agents)
    ub = y_bound(n_agents)
    scale = max(abs(c) for c in coeffs)
    out = []
    for z in cardano_roots([float(c) for c in coeffs]):
        if abs(z.imag) > 1e-9 * max(1.0, abs(z.real)):
            continue
        zr = z.real
        if zr <= 0:
            continue
        zr = min(zr, ub * ub)
        # one more real Newton step in exact-coefficient arithmetic
        dp = (3 * coeffs[0] * zr + 2 * coeffs[1]) * zr + coeffs[2]
        if dp != 0:
            z_new = zr - eval_cubic(coeffs, zr) / dp
            if 0 < z_new <= ub * ub and abs(eval_cubic(coeffs, z_new)) <= abs(eval_cubic(coeffs, zr)):
                zr = z_new
        if abs(eval_cubic(coeffs, zr)) > 1e-9 * scale * max(1.0, zr**3):
            continue
        out.append(math.sqrt(zr))
    return sorted(out)


def filter_candidates(n_agents: int, candidates, rtol: float = GAMMA_FILTER_RTOL) -> list[float]:
    return [y for y in candidates
            if abs(gamma_limit(n_agents, y)) <= rtol * _gamma_scale(n_agents, y)]


@lru_cache(maxsize=None)
def delta_star(n_agents: int) -> float:
    """The unique root of Phi_N(0, .) in (0, y_bound(N)].

    Raises
    ------
    NoAdmissibleRoot
        If no Cardano candidate, or more than one even after tightening the
        filter tolerance a hundredfold, zeroes Gamma.
    """
    n = int(n_agents)
    if n < 2:
        raise DomainError("n_agents must be >= 2")
    candidates = cubic_candidates(n)
    passing = filter_candidates(n, candidates)
    if len(passing) > 1:
        passing = filter_candidates(n, candidates, GAMMA_FILTER_RTOL / 100.0)
    if len(passing) != 1:
        raise NoAdmissibleRoot(
            f"N={n}: {len(passing)} of {len(candidates)} cubic candidates zero Gamma")
    return passing[0]


def dphi_limit_dy(n_agents: int, y: float, h: float = 1e-6, gamma_: float = 1.0) -> float:
    """Central finite difference of phi_limit in y."""
    step = h * max(1.0, abs(y))
    ub = y_bound(n_agents)
    hi = min(y + step, ub)
    lo = y - step
    return (phi_limit(n_agents, hi, gamma_) - phi_limit(n_agents, lo, gamma_)) / (hi - lo)
