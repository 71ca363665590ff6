import math

import numpy as np
import pytest

from lifeins import earmarked as ear
from lifeins import predetermined as pre
from lifeins.errors import DegenerateBoundary, DomainError, UnsupportedRegime
from lifeins.model import ModelParams, derive_constants, utility
from lifeins.reproduce import FIG9_PARAMS
from lifeins.verification import hjb_residual_earmarked_controlled, hjb_residual_earmarked_predetermined

BASE = ModelParams()


def test_fixed_amount_boundary_against_direct_formula():
    p = FIG9_PARAMS
    dc = derive_constants(p)
    q, B = p.earmark_q, p.bequest_B
    a1 = dc.alpha1
    gain = p.m * (utility(p.l * (B + q), p.gamma) - utility(q, p.gamma))
    h = p.m * B
    b = gain * p.r * a1 / ((p.rho + p.m) * h * (a1 - 1))
    sol = ear.earmarked_boundary(dc, q, B)
    assert sol.b_bar == pytest.approx(b, rel=1e-13)
    assert 0 < sol.b_bar < math.inf


@pytest.mark.parametrize("params", [BASE.with_(earmark_q=1.0), FIG9_PARAMS])
def test_fixed_amount_smooth_fit_and_residuals(params):
    dc = derive_constants(params)
    q, B = params.earmark_q, params.bequest_B
    sol = ear.earmarked_boundary(dc, q, B)
    z = sol.b_bar * (1 + 1e-13)
    assert abs(ear.earmarked_w(z, sol, dc, q, B)) < 1e-9
    assert abs(ear.earmarked_w_z(z, sol, dc, q, B)) < 1e-9
    assert hjb_residual_earmarked_predetermined(sol, dc, q, B).passes(1e-8)


def test_small_earmark_approaches_plain_boundary_for_low_risk_aversion():
    dc = derive_constants(BASE)
    b = pre.solve(dc).b
    gaps = [abs(ear.earmarked_boundary(dc, q, BASE.bequest_B).b_bar / b - 1) for q in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(a > c for a, c in zip(gaps, gaps[1:]))
    # the gap shrinks like (q / (l B))^(1 - gamma)
    ratio = (1e-8 / (BASE.l * BASE.bequest_B)) ** (1 - BASE.gamma)
    assert gaps[-1] == pytest.approx(ratio, rel=0.05)


def test_small_earmark_blows_up_for_high_risk_aversion():
    dc = derive_constants(BASE.with_(gamma=1.8))
    big = ear.earmarked_boundary(dc, 1e-8, 5.0).b_bar
    ref = ear.earmarked_boundary(dc, 1.0, 5.0).b_bar
    assert big > 1e3 * ref


def test_fixed_amount_errors():
    dc = derive_constants(BASE)
    with pytest.raises(DomainError):
        ear.earmarked_boundary(dc, 0.0, 5.0)
    with pytest.raises(DegenerateBoundary):
        ear.earmarked_boundary(dc, 1.0, 0.0)


def test_chosen_amount_solution():
    dc = derive_constants(FIG9_PARAMS)
    sol = ear.smooth_fit_solve(dc, FIG9_PARAMS.earmark_q)
    assert sol.conditions_ok
    assert 0 < sol.b_tilde < sol.L_bar
    assert sol.L_bar == pytest.approx(ear.threshold_L(dc, FIG9_PARAMS.earmark_q))
    assert sol.F_at_boundary <= 0
    at_b = ear.tilde_w_branches(sol.b_tilde, sol)["middle"]
    assert abs(at_b[0]) < 1e-9 and abs(at_b[1]) < 1e-9
    at_l = ear.tilde_w_branches(sol.L_bar, sol)
    assert at_l["middle"][0] == pytest.approx(at_l["upper"][0], abs=1e-9)
    assert at_l["middle"][1] == pytest.approx(at_l["upper"][1], abs=1e-9)
    assert hjb_residual_earmarked_controlled(sol, dc, FIG9_PARAMS.earmark_q).passes(1e-8)


def test_chosen_amount_value_is_nonnegative_and_zero_below_boundary():
    dc = derive_constants(FIG9_PARAMS)
    sol = ear.smooth_fit_solve(dc, FIG9_PARAMS.earmark_q)
    z = np.geomspace(sol.b_tilde / 10, sol.L_bar * 10, 500)
    w = ear.tilde_w_array(z, sol)
    assert np.all(w >= -1e-12)
    assert np.all(w[z <= sol.b_tilde] == 0)
    assert ear.tilde_w(sol.L_bar * 2, sol) > 0


def test_extra_amount_vanishes_at_threshold():
    dc = derive_constants(FIG9_PARAMS)
    q = FIG9_PARAMS.earmark_q
    L = ear.threshold_L(dc, q)
    assert ear.tilde_u(L * (1 - 1e-12), dc, q)[1] == pytest.approx(0.0, abs=1e-9)
    assert ear.tilde_u(L * 0.5, dc, q)[1] > 0


def test_regime_with_several_boundaries_is_reported():
    p = FIG9_PARAMS.with_(l=2.0)
    with pytest.raises(UnsupportedRegime):
        ear.smooth_fit_solve(derive_constants(p), p.earmark_q)
