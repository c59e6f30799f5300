import math

import numpy as np
import pytest

from clnash import benchmarks as bm
from clnash.equilibrium import closed_loop_policy
from clnash.errors import ConfigError
from clnash.model import EquilibriumKind, Policy
from clnash.simulate import (FeedbackRule, Perturbation, SimConfig, deviation_experiment,
                             estimate_value, exact_transition, exact_value, path_values,
                             simulate_paths, simulate_positions, simulate_signal, symmetric_rules)
from clnash.valuation import closed_form_value


@pytest.fixture(scope="module")
def cl_policy(synthetic):
    return closed_loop_policy(synthetic)[0]


def test_config_validation():
    for bad in (dict(dt=0.0), dict(dt=-1.0), dict(horizon=0.1), dict(n_paths=0),
                dict(scheme="rk4"), dict(dt=float("nan"))):
        kwargs = dict(dt=0.25, horizon=200.0, n_paths=10)
        kwargs.update(bad)
        with pytest.raises(ConfigError):
            SimConfig(**kwargs)


def test_discount_coverage(synthetic, cl_policy):
    short = SimConfig(dt=0.25, horizon=50.0, n_paths=10)
    with pytest.raises(ConfigError, match="too short"):
        estimate_value(synthetic, cl_policy, 0, short)
    SimConfig(dt=0.25, horizon=200.0, n_paths=10).check_discount(synthetic.rho)


def test_noise_free_signal_decays(synthetic):
    p = synthetic.with_(sigma=0.0)
    cfg = SimConfig(dt=0.5, horizon=40.0, n_paths=3, mu0=1.0)
    mu = simulate_signal(p, cfg)
    assert mu.shape == (3, cfg.n_steps + 1)
    np.testing.assert_allclose(mu, np.exp(-p.beta * cfg.times)[None, :].repeat(3, 0), rtol=1e-12)


def test_signal_variance_and_autocorrelation(synthetic):
    p = synthetic
    cfg = SimConfig(dt=1.0, horizon=120.0, n_paths=10000, seed=3)
    mu = simulate_signal(p, cfg)
    n = cfg.n_paths
    t, lag = 100, 5
    var = mu[:, t].var()
    ref = p.sigma**2 / (2 * p.beta) * (1 - math.exp(-2 * p.beta * t))
    assert abs(var - ref) <= 3 * ref * math.sqrt(2 / n)
    corr = np.corrcoef(mu[:, t], mu[:, t + lag])[0, 1]
    expected = math.exp(-p.beta * lag)
    assert abs(corr - expected) <= 3 * (1 - expected**2) / math.sqrt(n)


def _tracking_solution(m_rate, a_bar, beta, m0, t):
    # int_0^t e^{-M (t-s)} a_bar m0 e^{-beta s} ds
    return a_bar * m0 * (np.exp(-beta * t) - np.exp(-m_rate * t)) / (m_rate - beta)


def test_exact_scheme_tracks_variation_of_constants(synthetic, cl_policy):
    p = synthetic.with_(sigma=0.0)
    cfg = SimConfig(dt=0.25, horizon=30.0, n_paths=2, mu0=1e-3)
    bundle = simulate_paths(p, cl_policy, cfg)
    a_bar = cl_policy.feedback[0]
    ref = _tracking_solution(cl_policy.m_rate, a_bar, p.beta, cfg.mu0, cfg.times)
    for i in range(3):
        np.testing.assert_allclose(bundle.phi[0, :, i], ref, rtol=1e-9, atol=1e-12 * np.max(ref))


def test_euler_positions_first_order(synthetic):
    p = synthetic.with_(sigma=0.0)
    pol = bm.open_loop_policy(p)
    a_bar = pol.m_rate * pol.m_aim / p.gamma_
    errors = []
    for dt in (0.02, 0.01, 0.005):
        cfg = SimConfig(dt=dt, horizon=5.0, n_paths=1, mu0=1e-3)
        mu = cfg.mu0 * np.exp(-p.beta * cfg.times)[None, :]
        bundle = simulate_positions(p, pol, mu, cfg)
        ref = _tracking_solution(pol.m_rate, a_bar, p.beta, cfg.mu0, cfg.times)
        errors.append(np.max(np.abs(bundle.phi[0, :, 0] - ref)))
        np.testing.assert_array_equal(bundle.phi[:, 1:], bundle.phi[:, :-1] + bundle.rates[:, :-1] * dt)
    assert errors[0] / errors[1] == pytest.approx(2.0, rel=0.05)
    assert errors[1] / errors[2] == pytest.approx(2.0, rel=0.05)


def test_zero_policy_keeps_flat(synthetic):
    zero = Policy(m_rate=0.0, m_aim=0.0, kind=EquilibriumKind.OPEN_LOOP)
    cfg = SimConfig(dt=0.5, horizon=20.0, n_paths=4)
    mu = simulate_signal(synthetic, cfg)
    assert not np.any(simulate_positions(synthetic, zero, mu, cfg).phi)


def test_symmetric_inventories_agree(synthetic, cl_policy):
    cfg = SimConfig(dt=0.25, horizon=20.0, n_paths=50, seed=1)
    bundle = simulate_paths(synthetic, cl_policy, cfg)
    scale = np.max(np.abs(bundle.phi))
    for i in (1, 2):
        np.testing.assert_allclose(bundle.phi[..., i], bundle.phi[..., 0], rtol=0, atol=1e-13 * scale)
    np.testing.assert_array_equal(bundle.phi[:, 0, :], 0.0)


def test_signal_shared_by_both_schemes(synthetic, cl_policy):
    cfg = SimConfig(dt=0.25, horizon=10.0, n_paths=5, seed=9)
    mu = simulate_signal(synthetic, cfg)
    np.testing.assert_array_equal(simulate_paths(synthetic, cl_policy, cfg).mu, mu)
    euler = SimConfig(dt=0.25, horizon=10.0, n_paths=5, seed=9, scheme="euler")
    np.testing.assert_array_equal(simulate_paths(synthetic, cl_policy, euler).mu, mu)


def test_deterministic_across_threads_and_chunks(synthetic, cl_policy, monkeypatch):
    base = path_values(synthetic, cl_policy, 0, SimConfig(dt=0.25, horizon=200.0, n_paths=300, seed=5))
    monkeypatch.setenv("CLNASH_THREADS", "4")
    other = path_values(synthetic, cl_policy, 0,
                        SimConfig(dt=0.25, horizon=200.0, n_paths=300, seed=5, chunk_size=37))
    np.testing.assert_array_equal(base, other)


def test_zero_signal_estimate(synthetic, cl_policy):
    est = estimate_value(synthetic.with_(sigma=0.0), cl_policy, 0,
                         SimConfig(dt=0.25, horizon=200.0, n_paths=50))
    assert est.mean == 0.0 and est.std_error == 0.0


@pytest.mark.parametrize("kind", ["closed_loop", "open_loop"])
def test_estimate_within_three_se(synthetic, kind):
    pol = closed_loop_policy(synthetic)[0] if kind == "closed_loop" else bm.open_loop_policy(synthetic)
    est = estimate_value(synthetic, pol, 1, SimConfig(dt=0.25, horizon=200.0, n_paths=2000, seed=11))
    assert est.within(closed_form_value(synthetic, pol))
    assert est.std_error > 0


def test_planner_beats_open_loop_on_common_paths(synthetic):
    cfg = SimConfig(dt=0.25, horizon=200.0, n_paths=2000, seed=2)
    cp = path_values(synthetic, bm.central_planner_policy(synthetic), 0, cfg)
    ol = path_values(synthetic, bm.open_loop_policy(synthetic), 0, cfg)
    diff = cp - ol
    assert diff.mean() > 0
    assert diff.mean() > 3 * diff.std(ddof=1) / math.sqrt(diff.size)


def test_identity_deviation_is_bitwise_equal(synthetic, cl_policy):
    res = deviation_experiment(synthetic, SimConfig(dt=0.25, horizon=200.0, n_paths=200),
                               Perturbation(), policy=cl_policy)
    assert res.difference == 0.0
    assert res.equilibrium == res.deviant


def test_deviant_feeds_back_into_others(synthetic, cl_policy):
    # the others' rates must move with the deviator's inventory
    rules = symmetric_rules(synthetic, cl_policy)
    dev = FeedbackRule.from_policy(cl_policy, 0, 3, synthetic.gamma_, rate=1.2)
    assert dev.K[0] == pytest.approx(1.2 * rules[0].K[0])
    assert rules[1].K[0] == pytest.approx(cl_policy.feedback[1])
    assert rules[1].K[0] != 0


@pytest.mark.parametrize("target,factor", [("rate", 1.2), ("aim", 0.8)])
def test_deviation_does_not_pay(synthetic, cl_policy, target, factor):
    cfg = SimConfig(dt=0.25, horizon=200.0, n_paths=2000, seed=4)
    res = deviation_experiment(synthetic, cfg, Perturbation(**{target: factor}), policy=cl_policy)
    assert res.deviation_gain_bounded
    assert exact_value(synthetic, [FeedbackRule.from_policy(cl_policy, 0, 3, synthetic.gamma_,
                                                            **{target: factor})]
                       + symmetric_rules(synthetic, cl_policy)[1:], 0) < exact_value(synthetic, cl_policy, 0)


def _expected_estimator(params, policy, dt, horizon):
    """Exact mean of the trapezoidal estimator through the second-moment recursion."""
    rules = symmetric_rules(params, policy)
    trans, fac = exact_transition(params, rules, dt)
    q = fac @ fac.T
    m = trans.shape[0]
    rates = np.zeros((len(rules), m))
    for i, r in enumerate(rules):
        rates[i, 0], rates[i, 1:] = r.k, r.K
    own = np.zeros(m)
    own[1] = 1.0
    sig = np.zeros(m)
    sig[0] = 1.0
    agg = rates.sum(axis=0)
    rew = (0.5 * (np.outer(sig, own) + np.outer(own, sig)) - 0.5 * params.gamma_ * np.outer(own, own)
           - 0.5 * params.lambda_ * (np.outer(rates[0], agg) + np.outer(agg, rates[0])))
    steps = int(round(horizon / dt))
    cov = np.zeros((m, m))
    total = 0.0
    for k in range(steps + 1):
        w = 0.5 if k in (0, steps) else 1.0
        total += w * dt * math.exp(-params.rho * k * dt) * np.sum(rew * cov)
        cov = trans @ cov @ trans.T + q
    return total


def test_step_halving_drift_below_one_se(synthetic, cl_policy):
    coarse = _expected_estimator(synthetic, cl_policy, 0.25, 200.0)
    fine = _expected_estimator(synthetic, cl_policy, 0.125, 200.0)
    est = estimate_value(synthetic, cl_policy, 0, SimConfig(dt=0.25, horizon=200.0, n_paths=10000))
    assert abs(coarse - fine) < est.std_error
    assert coarse == pytest.approx(exact_value(synthetic, cl_policy, 0), rel=1e-3)


def test_exact_value_rejects_unstable(synthetic):
    from clnash.errors import DomainError
    bad = Policy(m_rate=-1.0, m_aim=1.0, kind=EquilibriumKind.OPEN_LOOP)
    with pytest.raises(DomainError):
        exact_value(synthetic, bad, 0)
