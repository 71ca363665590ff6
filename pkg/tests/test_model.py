import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifeins.errors import KappaNonPositive, ModelRejected
from lifeins.model import (
    ModelParams,
    SimConfig,
    derive_constants,
    human_capital,
    premium_rate,
    simulate_paths,
    truncation_horizon,
    utility,
    validate_assumptions,
)

BASE = ModelParams()


def test_market_price_of_risk_and_kappa():
    dc = derive_constants(BASE)
    assert dc.theta == pytest.approx(0.04 / 0.22, rel=1e-15)
    # r = mu_y, so kappa reduces to sigma_y * theta
    assert dc.kappa == pytest.approx(0.1 * 0.04 / 0.22, rel=1e-14)
    assert human_capital(1.0, dc) == pytest.approx(55.0, rel=1e-12)


def test_consumption_rate_against_hand_formula():
    p = BASE
    th = (p.mu - p.r) / p.sigma
    g = p.gamma
    K = (p.rho + p.m - p.r * (1 - g) - (1 - g) / (2 * g) * th ** 2) / g
    assert derive_constants(p).K == pytest.approx(K, rel=1e-14)


def test_exponents_match_numpy_roots():
    dc = derive_constants(BASE)
    half = 0.5 * dc.theta ** 2
    ref = np.sort(np.roots([half, BASE.rho - BASE.r + BASE.m - half, -(BASE.rho + BASE.m)]).real)
    assert dc.alpha1 == pytest.approx(ref[0], rel=1e-12)
    assert dc.alpha2 == pytest.approx(ref[1], rel=1e-12)
    assert dc.alpha1 == pytest.approx(-1.3196, abs=5e-5)


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0.02, 0.15), sigma=st.floats(0.05, 0.5), m=st.floats(0.001, 0.2),
       rho=st.floats(0.001, 0.1), gamma=st.floats(0.2, 5.0).filter(lambda g: abs(g - 1) > 1e-3))
def test_exponents_are_roots_with_the_right_signs(mu, sigma, m, rho, gamma):
    p = BASE.with_(mu=mu, sigma=sigma, m=m, rho=rho, gamma=gamma)
    dc = derive_constants(p)
    half = 0.5 * dc.theta ** 2
    for a in (dc.alpha1, dc.alpha2):
        res = half * a * a + (p.rho - p.r + p.m - half) * a - (p.rho + p.m)
        assert abs(res) < 1e-10 * max(1.0, a * a)
    assert dc.alpha1 < 0
    assert dc.alpha2 > (1.0 if p.rho + p.m > p.r else 0.0)


def test_validation_accepts_baseline():
    assert validate_assumptions(BASE) == []


@pytest.mark.parametrize("change, code", [
    ({"gamma": 1.0}, "GAMMA_EQUALS_ONE"),
    ({"mu_y": 0.2}, "KAPPA_NONPOSITIVE"),
    ({"sigma": 0.0}, "SIGMA_NONPOSITIVE"),
    ({"mu": 0.005}, "MU_NOT_ABOVE_R"),
    ({"rho": 0.001, "m": 0.001, "r": 0.05, "mu": 0.08}, "RHO_PLUS_M_NOT_ABOVE_R"),
])
def test_validation_names_each_violation(change, code):
    assert code in validate_assumptions(BASE.with_(**change))


def test_discount_condition():
    # very low discounting with gamma < 1 makes utility unbounded
    codes = validate_assumptions(BASE.with_(rho=0.0001, m=0.0001, gamma=0.3, mu=0.12))
    assert "DISCOUNT_TOO_LOW" in codes


def test_derive_constants_rejects():
    with pytest.raises(KappaNonPositive):
        derive_constants(BASE.with_(mu_y=0.2))
    with pytest.raises(ModelRejected):
        derive_constants(BASE.with_(gamma=1.0))


def test_utility_and_premium():
    assert utility(4.0, 0.5) == pytest.approx(4.0)
    assert utility(2.0, 2.0) == pytest.approx(-0.5)
    assert premium_rate(5.0, 0.0175) == pytest.approx(0.0875)
    with pytest.raises(ValueError):
        premium_rate(-1.0, 0.01)


def test_truncation_horizon_bounds_the_tail():
    dc = derive_constants(BASE)
    T = truncation_horizon(dc, 1e-5)
    rate = min(dc.K, dc.gamma * dc.K, dc.disc)
    assert math.exp(-rate * T) == pytest.approx(1e-5, rel=1e-9)


def test_stretched_grid():
    sim = SimConfig(dt=1 / 12, horizon_T=100.0, dt_max=4.0, stretch=0.03)
    t = sim.time_grid()
    steps = np.diff(t)
    assert t[0] == 0 and t[-1] == 100.0
    assert steps.max() <= 4.0 + 1e-12
    assert steps[0] == pytest.approx(1 / 12)
    uniform = SimConfig(dt=0.5, horizon_T=10.0).time_grid()
    assert np.allclose(np.diff(uniform), 0.5)


def test_sim_config_rejects_bad_settings():
    with pytest.raises(ValueError):
        SimConfig(n_paths=3, antithetic=True)
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)


def test_simulated_state_price_density_is_a_martingale_after_discounting():
    dc = derive_constants(BASE)
    sim = SimConfig(n_paths=40_000, dt=0.5, horizon_T=10.0, seed=3, antithetic=True)
    bundle = simulate_paths(BASE, dc, sim)
    t = bundle.t[-1]
    discounted = bundle.xi[:, -1] * math.exp(BASE.r * t)
    assert discounted.mean() == pytest.approx(1.0, abs=4 * discounted.std() / math.sqrt(sim.n_paths))
    # Z is xi grown at rho + m
    ratio = bundle.Z[:, -1] / bundle.xi[:, -1]
    assert np.allclose(ratio, math.exp((BASE.rho + BASE.m) * t))


def test_simulation_is_reproducible():
    dc = derive_constants(BASE)
    sim = SimConfig(n_paths=100, dt=1.0, horizon_T=5.0, seed=11)
    a = simulate_paths(BASE, dc, sim)
    b = simulate_paths(BASE, dc, sim)
    assert np.array_equal(a.W, b.W)
