"""Safeguarded Newton iteration on a sign-change bracket."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from ..errors import NoConvergence


@dataclass
class RootResult:
    root: float
    fval: float
    iterations: int
    converged: bool


def expand_bracket(f: Callable[[float], float], x0: float, lo_limit: float, hi_limit: float,
                   width: float, max_doublings: int = 60) -> tuple[float, float, float, float]:
    """Grow [x0 - w, x0 + w] inside the limits until f changes sign.

    Returns ``(lo, hi, f(lo), f(hi))``.
    """
    w = width
    for _ in range(max_doublings):
        lo = max(x0 - w, lo_limit)
        hi = min(x0 + w, hi_limit)
        flo, fhi = f(lo), f(hi)
        if flo == 0 or fhi == 0 or (flo < 0) != (fhi < 0):
            return lo, hi, flo, fhi
        if lo == lo_limit and hi == hi_limit:
            break
        w *= 2.0
    raise NoConvergence(f"no sign change of the residual in [{lo_limit:g}, {hi_limit:g}] around {x0:g}")


def safeguarded_newton(f: Callable[[float], float], fprime: Callable[[float], float],
                       lo: float, hi: float, x0: float, *, ftol: Callable[[float], float] | float,
                       xtol: float = 1e-12, max_iter: int = 200,
                       flo: float | None = None, fhi: float | None = None) -> RootResult:
    """Newton's method that falls back to bisection whenever a step leaves the bracket.

    Convergence requires both ``|f(x)| <= ftol`` and a step no larger than
    ``xtol * (1 + |x|)``.  ``ftol`` may be a callable of x for tolerances
    relative to the local scale of f.
    """
    flo = f(lo) if flo is None else flo
    fhi = f(hi) if fhi is None else fhi
    if flo == 0:
        return RootResult(lo, 0.0, 0, True)
    if fhi == 0:
        return RootResult(hi, 0.0, 0, True)
    if (flo < 0) == (fhi < 0):
        raise NoConvergence("initial interval does not bracket a root")
    tol = ftol if callable(ftol) else (lambda _x, _t=ftol: _t)
    x = min(max(x0, lo), hi)
    fx = f(x)
    for it in range(1, max_iter + 1):
        if fx == 0:
            return RootResult(x, 0.0, it, True)
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        d = fprime(x)
        newton_ok = d != 0 and math.isfinite(d)
        x_new = x - fx / d if newton_ok else 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        step = abs(x_new - x)
        x = x_new
        fx = f(x)
        if abs(fx) <= tol(x) and step <= xtol * (1.0 + abs(x)):
            return RootResult(x, fx, it, True)
        if hi - lo <= 4 * math.ulp(max(abs(lo), abs(hi))):
            return RootResult(x, fx, it, abs(fx) <= tol(x))
    raise NoConvergence(f"safeguarded Newton did not converge in {max_iter} iterations")
