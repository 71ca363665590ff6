"""Fixed-bequest problem: dual free boundary, value function and feedback rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import AdmissibilityViolated, DomainError, ImmediatePurchase, NeedsRhoPlusMGreaterR
from .model import DerivedConstants, utility
from .roots import log_root


class Region(str, Enum):
    CONTINUE = "continue"
    STOP = "stop"


@dataclass(frozen=True)
class PolicyDecision:
    region: Region
    consumption: float
    investment: float
    z_star: float
    bequest: float


@dataclass(frozen=True)
class PredeterminedSolution:
    """Dual boundary ``b`` and coefficient ``C1``; both NaN when purchase is immediate."""

    b: float
    C1: float
    immediate_purchase: bool
    bequest_utility_flow: float  # m * u(l B), paid as a stream after purchase

    def corrupted(self, factor: float, dc: DerivedConstants) -> "PredeterminedSolution":
        """Copy with the boundary scaled by ``factor`` (negative control for verification)."""
        b = self.b * factor
        return replace(self, b=b, C1=_coefficient(b, dc))


def _coefficient(b: float, dc: DerivedConstants) -> float:
    return -(dc.h / (dc.params.r * dc.alpha1)) * b ** (1.0 - dc.alpha1)


def solve(dc: DerivedConstants) -> PredeterminedSolution:
    """Closed-form boundary from value matching and smooth fit."""
    p = dc.params
    flow = p.m * utility(p.l * p.bequest_B, p.gamma) if p.bequest_B > 0 else 0.0
    if p.gamma > 1:
        return PredeterminedSolution(math.nan, math.nan, True, float(flow))
    if not dc.discount_exceeds_rate:
        raise NeedsRhoPlusMGreaterR("rho + m <= r: the purchase boundary is not characterised")
    if p.bequest_B <= 0:
        raise DomainError("the free boundary needs a positive bequest")
    a1 = dc.alpha1
    b = flow * p.r * a1 / (dc.disc * dc.h * (a1 - 1.0))
    return PredeterminedSolution(float(b), float(_coefficient(b, dc)), False, float(flow))


def dual_w_hat(z: float, sol: PredeterminedSolution, dc: DerivedConstants) -> float:
    """Value of the purchase-timing problem in the dual variable."""
    if sol.immediate_purchase or z <= sol.b:
        return 0.0
    return sol.C1 * z ** dc.alpha1 + dc.h_over_r * z - sol.bequest_utility_flow / dc.disc


def dual_w_hat_z(z: float, sol: PredeterminedSolution, dc: DerivedConstants) -> float:
    if sol.immediate_purchase or z <= sol.b:
        return 0.0
    return sol.C1 * dc.alpha1 * z ** (dc.alpha1 - 1.0) + dc.h_over_r


def _merton_dual(z: float, dc: DerivedConstants) -> float:
    g = dc.gamma
    return g * z ** ((g - 1.0) / g) / ((1.0 - g) * dc.K)


def dual_v(z: float, y: float, sol: PredeterminedSolution, dc: DerivedConstants) -> float:
    """Dual value function v(z, y)."""
    if not z > 0:
        raise DomainError("z must be positive")
    base = _merton_dual(z, dc) + z * y / dc.kappa
    if not sol.immediate_purchase and z > sol.b:
        return sol.C1 * z ** dc.alpha1 + base
    return base - dc.h_over_r * z + sol.bequest_utility_flow / dc.disc


def dual_v_z(z: float, y: float, sol: PredeterminedSolution, dc: DerivedConstants) -> float:
    if not z > 0:
        raise DomainError("z must be positive")
    base = -z ** (-1.0 / dc.gamma) / dc.K + y / dc.kappa
    if not sol.immediate_purchase and z > sol.b:
        return sol.C1 * dc.alpha1 * z ** (dc.alpha1 - 1.0) + base
    return base - dc.h_over_r


def primal_boundary(y: float, sol: PredeterminedSolution, dc: DerivedConstants) -> float:
    """Wealth level at which insurance is bought, given income ``y``."""
    if sol.immediate_purchase:
        raise ImmediatePurchase("gamma > 1: purchase happens immediately")
    return sol.b ** (-1.0 / dc.gamma) / dc.K - y / dc.kappa + dc.h_over_r


def in_stopping_region(x: float, y: float, sol: PredeterminedSolution, dc: DerivedConstants) -> bool:
    return sol.immediate_purchase or x >= primal_boundary(y, sol, dc)


def _check_domain(x: float, y: float, dc: DerivedConstants) -> None:
    if not x > -y / dc.kappa:
        raise DomainError(f"x = {x} must exceed -y/kappa = {-y / dc.kappa}")


def z_star(x: float, y: float, sol: PredeterminedSolution, dc: DerivedConstants) -> float:
    """Shadow price of wealth at (x, y)."""
    _check_domain(x, y, dc)
    g = dc.gamma
    if in_stopping_region(x, y, sol, dc):
        net = x - dc.h_over_r + y / dc.kappa
        if not net > 0:
            raise AdmissibilityViolated("x + y/kappa must exceed h/r after purchase")
        return (net * dc.K) ** (-g)
    a1 = dc.alpha1
    ck = sol.C1 * a1
    target = y / dc.kappa + x

    def fdf(z: float) -> tuple[float, float]:
        val = ck * z ** (a1 - 1.0) - z ** (-1.0 / g) / dc.K + target
        der = ck * (a1 - 1.0) * z ** (a1 - 2.0) + z ** (-1.0 / g - 1.0) / (g * dc.K)
        return val, der

    lo = sol.b * (1.0 + 1e-12)
    return log_root(fdf, lo, 2.0 * sol.b)


def value(x: float, y: float, sol: PredeterminedSolution, dc: DerivedConstants) -> float:
    """Optimal lifetime utility V(x, y)."""
    _check_domain(x, y, dc)
    g = dc.gamma
    if in_stopping_region(x, y, sol, dc):
        net = x - dc.h_over_r + y / dc.kappa
        if not net > 0:
            raise AdmissibilityViolated("x + y/kappa must exceed h/r after purchase")
        return net ** (1.0 - g) * dc.K ** (-g) / (1.0 - g) + sol.bequest_utility_flow / dc.disc
    z = z_star(x, y, sol, dc)
    return sol.C1 * z ** dc.alpha1 + _merton_dual(z, dc) + (y / dc.kappa + x) * z


def policy(x: float, y: float, sol: PredeterminedSolution, dc: DerivedConstants) -> PolicyDecision:
    """Optimal consumption, risky investment and purchase decision at (x, y)."""
    _check_domain(x, y, dc)
    p = dc.params
    g, th = dc.gamma, dc.theta
    hedge = p.sigma_y * y / dc.kappa
    if in_stopping_region(x, y, sol, dc):
        net = x - dc.h_over_r + y / dc.kappa
        if not net > 0:
            raise AdmissibilityViolated("x + y/kappa must exceed h/r after purchase")
        return PolicyDecision(
            region=Region.STOP,
            consumption=dc.K * net,
            investment=(th * net / g - hedge) / p.sigma,
            z_star=(net * dc.K) ** (-g),
            bequest=p.bequest_B,
        )
    z = z_star(x, y, sol, dc)
    a1 = dc.alpha1
    curvature = sol.C1 * a1 * (a1 - 1.0) * z ** (a1 - 1.0) + z ** (-1.0 / g) / (dc.K * g)
    return PolicyDecision(
        region=Region.CONTINUE,
        consumption=z ** (-1.0 / g),
        investment=(th * curvature - hedge) / p.sigma,
        z_star=z,
        bequest=p.bequest_B,
    )
