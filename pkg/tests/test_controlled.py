import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from lifeins import controlled as ctl
from lifeins.model import ModelParams, derive_constants, validate_assumptions

BASE = ModelParams()
DC = derive_constants(BASE)


def test_value_constant_is_D_to_the_gamma():
    p = BASE
    g = p.gamma
    D = 1 / DC.K + p.m * (p.l * p.r) ** ((1 - g) / g) * (p.rho + p.m) ** (-1 / g)
    sol = ctl.solve_controlled(DC)
    assert sol.D == pytest.approx(D, rel=1e-14)
    assert sol.value_coefficient == pytest.approx(D ** g, rel=1e-14)


def test_reference_policy():
    d = ctl.policy_B(1.0, 1.0, DC)
    assert d.bequest == pytest.approx(0.351, abs=5e-3)
    assert d.investment == pytest.approx(32.216, abs=5e-3)
    assert d.consumption == pytest.approx(1.479, abs=5e-3)


def test_bequest_maximises_the_purchase_objective():
    z = ctl.z_star_B(1.0, 1.0, DC)
    best = ctl.bequest_star(z, DC)
    grid = best * np.linspace(0.5, 1.5, 101)
    vals = [ctl.bequest_objective(B, z, DC) for B in grid]
    assert grid[int(np.argmax(vals))] == pytest.approx(best, rel=0.011)


def test_value_is_the_minimised_dual():
    x, y = 3.0, 1.0
    g = DC.gamma

    def dual(s):
        z = math.exp(s)
        merton = g / (1 - g) * z ** ((g - 1) / g) / DC.K
        return merton + ctl.bar_u(z, DC) + z * (x + y / DC.kappa)

    res = minimize_scalar(dual, bracket=(-3.0, 0.0), tol=1e-12)
    assert ctl.value_B(x, y, DC) == pytest.approx(res.fun, rel=1e-10)
    assert ctl.z_star_B(x, y, DC) == pytest.approx(math.exp(res.x), rel=1e-6)


def test_alternative_constant_differs():
    sol = ctl.solve_controlled(DC)
    assert abs(sol.value_coefficient - 1 / sol.D) / sol.value_coefficient > 0.05


@settings(max_examples=25, deadline=None)
@given(l=st.floats(0.1, 0.9), step=st.floats(0.01, 0.1))
def test_bequest_rises_with_weight(l, step):
    b = lambda v: ctl.policy_B(1.0, 1.0, derive_constants(BASE.with_(l=v))).bequest  # noqa: E731
    assert b(l + step) > b(l)


@settings(max_examples=25, deadline=None)
@given(g=st.floats(0.3, 0.9), step=st.floats(0.005, 0.05))
def test_bequest_rises_with_risk_aversion(g, step):
    assume(not validate_assumptions(BASE.with_(gamma=g), free_boundary=False))
    b = lambda v: ctl.policy_B(1.0, 1.0, derive_constants(BASE.with_(gamma=v))).bequest  # noqa: E731
    assert b(g + step) > b(g)
