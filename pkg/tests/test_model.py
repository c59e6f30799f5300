import math

import pytest

from clnash.errors import ConfigError, DomainError
from clnash.model import (EquilibriumKind, ModelParams, Policy, ScalingMode, apply_scaling,
                          default_config_path, load_config, params_from_mapping)


def test_table1_defaults():
    p = ModelParams.table1(3)
    assert p.gamma_ == pytest.approx(2.5e-8 * 0.0088**2, rel=1e-15)
    assert p.n_agents == 3
    assert p.frictionless_value == pytest.approx(
        p.sigma**2 / (2 * p.rho * p.gamma_ * (2 * p.beta + p.rho)), rel=1e-15)


@pytest.mark.parametrize("field,value", [
    ("beta", 0.0), ("rho", -1.0), ("gamma_", 0.0), ("lambda_", 0.0),
    ("sigma", -1e-3), ("beta", float("nan")), ("lambda_", float("inf")),
])
def test_invalid_fields_raise(field, value):
    with pytest.raises(DomainError):
        ModelParams.table1(2, **{field: value})


@pytest.mark.parametrize("n", [1, 0, 2.5, True])
def test_invalid_agent_count(n):
    with pytest.raises(DomainError):
        ModelParams.table1(n)


def test_zero_sigma_allowed():
    assert ModelParams.table1(2, sigma=0.0).frictionless_value == 0.0


def test_mean_field_scaling_divides_lambda_once():
    p = ModelParams.table1(5)
    mf = apply_scaling(p, ScalingMode.MEAN_FIELD)
    assert mf.lambda_ == pytest.approx(p.lambda_ / 5, rel=1e-15)
    assert mf.mean_field_scaled
    with pytest.raises(ValueError):
        apply_scaling(mf, ScalingMode.MEAN_FIELD)
    assert apply_scaling(p, "raw") == p


@pytest.mark.parametrize("text,mode", [("raw", ScalingMode.RAW), ("MeanField", ScalingMode.MEAN_FIELD),
                                       ("mean-field", ScalingMode.MEAN_FIELD), ("mf", ScalingMode.MEAN_FIELD)])
def test_scaling_parse(text, mode):
    assert ScalingMode.parse(text) is mode


def test_scaling_parse_rejects_unknown():
    with pytest.raises(ConfigError):
        ScalingMode.parse("log")


def test_bundled_config_matches_table1():
    params, scaling = load_config(default_config_path())
    assert scaling is ScalingMode.RAW
    ref = ModelParams.table1(2)
    for name in ("beta", "sigma", "rho", "lambda_", "sigma_p"):
        assert getattr(params, name) == getattr(ref, name)
    assert params.gamma_ == pytest.approx(ref.gamma_, rel=1e-15)


def test_synthetic_config():
    params, _ = load_config(default_config_path("synthetic_mc.ini"))
    assert (params.rho, params.beta, params.sigma, params.gamma_, params.lambda_, params.n_agents) == \
        (0.05, 0.1, 0.01, 1e-4, 1e-6, 3)


def _base():
    return {"beta": "0.1", "sigma": "0.01", "rho": "0.05", "gamma_": "1e-4",
            "lambda_": "1e-6", "n_agents": "3"}


@pytest.mark.parametrize("change", [
    {"beta": "abc"}, {"n_agents": "2.5"}, {"bogus": "1"}, {"scaling": "weird"},
    {"beta": "-1"}, {"gamma_per_sigma_p_sq": "1"},
])
def test_bad_mappings(change):
    values = _base()
    values.update(change)
    with pytest.raises(ConfigError):
        params_from_mapping(values)


def test_missing_key():
    values = _base()
    del values["rho"]
    with pytest.raises(ConfigError, match="rho"):
        params_from_mapping(values)


def test_gamma_from_multiplier():
    values = _base()
    del values["gamma_"]
    values.update(sigma_p="0.01", gamma_per_sigma_p_sq="2")
    params, _ = params_from_mapping(values)
    assert params.gamma_ == pytest.approx(2e-4, rel=1e-15)


def test_malformed_file(tmp_path):
    path = tmp_path / "x.ini"
    path.write_text("beta = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    path.write_text("[other]\nbeta = 1\n")
    with pytest.raises(ConfigError, match="model"):
        load_config(path)


def test_policy_feedback_defaults():
    pol = Policy(m_rate=0.2, m_aim=0.5, kind=EquilibriumKind.OPEN_LOOP)
    a_bar, b_bar, c_bar = pol.feedback_coefficients(2.0)
    assert (a_bar, b_bar, c_bar) == (0.05, 0.0, 0.2)
    assert pol.to_dict() == {"kind": "open_loop", "m_rate": 0.2, "m_aim": 0.5}
    assert math.isclose(ModelParams.table1(2).impact_ratio,
                        math.sqrt(1.88e-10 / ModelParams.table1(2).gamma_))


def test_mean_field_table1_impact():
    mf = apply_scaling(ModelParams.table1(2), ScalingMode.MEAN_FIELD)
    assert mf.lambda_ == pytest.approx(9.4e-11, rel=1e-14)


def test_planner_under_mean_field_uses_two_lambda():
    from clnash.benchmarks import central_planner_policy, tracking_rule
    p = ModelParams.table1(7)
    pol = central_planner_policy(apply_scaling(p, ScalingMode.MEAN_FIELD))
    assert (pol.m_rate, pol.m_aim) == pytest.approx(
        tracking_rule(p.gamma_, p.rho, p.beta, 2 * p.lambda_), rel=1e-14)
