import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clnash.equilibrium.limit import (cardano_roots, cubic_candidates, d_bar, delta_star,
                                      dphi_limit_dy, eval_cubic, filter_candidates, gamma_limit,
                                      gamma_parts, p_cubic, phi_limit, y_bound)
from clnash.equilibrium.phi import phi_hat
from clnash.errors import DegenerateCubic, DomainError

N_RANGE = range(2, 51)


@pytest.mark.parametrize("n", N_RANGE)
def test_constant_term(n):
    assert p_cubic(n)[3] == -(n - 1) ** 6 * (3 * n + 1) ** 2


@pytest.mark.parametrize("n", [2, 3, 7, 10, 50])
def test_cardano_agrees_with_companion_roots(n):
    coeffs = [float(c) for c in p_cubic(n)]
    ours = np.sort_complex(np.array(cardano_roots(coeffs)))
    ref = np.sort_complex(np.roots(coeffs))
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(ours - ref)) <= 1e-9 * scale


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.floats(0.1, 10).map(lambda x: x * (1 if x > 0 else -1)))
@settings(max_examples=200, deadline=None)
def test_cardano_residuals_small(roots, lead):
    coeffs = np.poly(roots) * lead
    for z in cardano_roots(coeffs):
        scale = sum(abs(c) * abs(z) ** (3 - i) for i, c in enumerate(coeffs))
        assert abs(eval_cubic(coeffs, z)) <= 1e-9 * max(scale, 1.0)


def test_cardano_rejects_quadratic():
    with pytest.raises(DegenerateCubic):
        cardano_roots([0.0, 1.0, 2.0, 3.0])


@pytest.mark.parametrize("n", N_RANGE)
def test_delta_star_unique_and_in_interval(n):
    y = delta_star(n)
    assert 0 < y <= y_bound(n)
    assert len(filter_candidates(n, cubic_candidates(n))) == 1
    assert dphi_limit_dy(n, y) > 0


@pytest.mark.parametrize("n", [2, 3, 10, 50])
def test_gamma_changes_sign_once_across_interval(n):
    assert gamma_limit(n, 1e-9) < 0 < gamma_limit(n, y_bound(n))
    from scipy.optimize import brentq
    ref = brentq(lambda y: gamma_limit(n, y), 1e-9, y_bound(n), xtol=1e-15, rtol=1e-15)
    assert delta_star(n) == pytest.approx(ref, rel=1e-10)


@given(st.integers(2, 60), st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_squared_gamma_is_cubic(n, frac):
    # separating the radical and squaring gives 2 N^6 P_N(y^2)
    y = frac * y_bound(n)
    r, a, b = gamma_parts(n, y)
    lhs = b * b - r * r * a * a
    rhs = 2 * n**6 * eval_cubic(p_cubic(n), y * y)
    scale = b * b + r * r * a * a + 2 * n**6 * sum(
        abs(c) * (y * y) ** (3 - i) for i, c in enumerate(p_cubic(n)))
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(st.integers(2, 40), st.floats(0.01, 0.99), st.floats(1e-12, 1.0))
@settings(max_examples=100, deadline=None)
def test_limit_equals_rescaled_phi_at_zero_eps(n, frac, gamma_):
    y = frac * y_bound(n)
    ref = phi_limit(n, y, gamma_)
    ours = gamma_ * phi_hat(n, 0.0, y)
    assert ours == pytest.approx(ref, rel=1e-9, abs=1e-12 * gamma_ * n**2)


def test_d_bar_outside_interval():
    with pytest.raises(DomainError):
        d_bar(3, 1.01 * y_bound(3))
    assert d_bar(3, y_bound(3)) == 0.0


def test_small_agent_count_rejected():
    with pytest.raises(DomainError):
        p_cubic(1)
    with pytest.raises(DomainError):
        delta_star(1)


def test_bound_formula():
    assert y_bound(2) == pytest.approx(math.sqrt(2) * 2 * math.sqrt(1 / 7), rel=1e-15)


def test_cubic_at_interval_end():
    from fractions import Fraction
    c = p_cubic(2)
    z = Fraction(8, 7)
    assert ((c[0] * z + c[1]) * z + c[2]) * z + c[3] == Fraction(841, 343)


def test_cardano_simple_factorisation():
    roots = sorted(r.real for r in cardano_roots([1.0, -6.0, 11.0, -6.0]))
    assert roots == pytest.approx([1.0, 2.0, 3.0], abs=1e-13)


def test_cardano_conjugate_pair():
    roots = cardano_roots([1.0, 0.0, 1.0, 1.0])
    real = [r for r in roots if r.imag == 0]
    pair = [r for r in roots if r.imag != 0]
    assert len(real) == 1 and len(pair) == 2
    assert pair[0] == pytest.approx(pair[1].conjugate(), abs=1e-14)
    assert real[0].real == pytest.approx(-0.6823278038280193, abs=1e-14)


def test_two_agent_cubic_needs_the_gamma_filter():
    # all three roots of P_2 lie in (0, 8/7); squaring introduced two of them
    c = [float(x) for x in p_cubic(2)]
    inside = sorted(r.real for r in cardano_roots(c) if r.imag == 0 and 0 < r.real < 8 / 7)
    assert len(inside) == 3
    assert len(filter_candidates(2, [math.sqrt(z) for z in inside])) == 1
    assert delta_star(2) ** 2 == pytest.approx(inside[0], rel=1e-14)
