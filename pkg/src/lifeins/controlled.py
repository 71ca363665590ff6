"""Bequest chosen at purchase: immediate purchase with a closed-form optimal amount."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .model import DerivedConstants, utility
from .predetermined import PolicyDecision, Region


@dataclass(frozen=True)
class ControlledSolution:
    """``D`` scales total wealth into consumption; ``value_coefficient`` multiplies (x+y/kappa)^(1-gamma)/(1-gamma)."""

    D: float
    value_coefficient: float


def solve_controlled(dc: DerivedConstants) -> ControlledSolution:
    p = dc.params
    g = p.gamma
    D = 1.0 / dc.K + p.m * (p.l * p.r) ** ((1.0 - g) / g) * dc.disc ** (-1.0 / g)
    return ControlledSolution(D=D, value_coefficient=D ** g)


def _bequest_scale(dc: DerivedConstants) -> float:
    # B0* = scale * z^(-1/gamma)
    p = dc.params
    g = p.gamma
    return (dc.disc / p.r) ** (-1.0 / g) * p.l ** ((1.0 - g) / g)


def bar_u(z: float, dc: DerivedConstants) -> float:
    """Insurance-adjusted bequest utility after optimising the amount at shadow price z."""
    p = dc.params
    g = p.gamma
    return (p.m * p.l ** ((1.0 - g) / g) * g / (1.0 - g) * p.r ** ((1.0 - g) / g)
            * dc.disc ** (-1.0 / g) * z ** ((g - 1.0) / g))


def bequest_star(z: float, dc: DerivedConstants) -> float:
    """Bequest amount maximising m u(l B)/(rho+m) - z m B / r."""
    if not z > 0:
        raise DomainError("z must be positive")
    return _bequest_scale(dc) * z ** (-1.0 / dc.gamma)


def bequest_objective(B: float, z: float, dc: DerivedConstants) -> float:
    p = dc.params
    return p.m * utility(p.l * B, p.gamma) / dc.disc - z * p.m * B / p.r


def _total_wealth(x: float, y: float, dc: DerivedConstants) -> float:
    w = x + y / dc.kappa
    if not w > 0:
        raise DomainError(f"x = {x} must exceed -y/kappa = {-y / dc.kappa}")
    return w


def z_star_B(x: float, y: float, dc: DerivedConstants) -> float:
    sol = solve_controlled(dc)
    return (_total_wealth(x, y, dc) / sol.D) ** (-dc.gamma)


def policy_B(x: float, y: float, dc: DerivedConstants) -> PolicyDecision:
    """Consume a fixed fraction 1/D of total wealth and buy B0* now."""
    p = dc.params
    sol = solve_controlled(dc)
    w = _total_wealth(x, y, dc)
    c = w / sol.D
    return PolicyDecision(
        region=Region.STOP,
        consumption=c,
        investment=c * dc.theta / (dc.gamma * dc.K * p.sigma) - p.sigma_y * y / (dc.kappa * p.sigma),
        z_star=c ** (-dc.gamma),
        bequest=c * _bequest_scale(dc),
    )


def value_B(x: float, y: float, dc: DerivedConstants) -> float:
    """Optimal lifetime utility with the bequest amount chosen at purchase."""
    sol = solve_controlled(dc)
    w = _total_wealth(x, y, dc)
    return sol.value_coefficient * w ** (1.0 - dc.gamma) / (1.0 - dc.gamma)


def value_B_printed_variant(x: float, y: float, dc: DerivedConstants) -> float:
    """The alternative constant 1/D in place of D^gamma; kept only for adjudication tests."""
    sol = solve_controlled(dc)
    w = _total_wealth(x, y, dc)
    return w ** (1.0 - dc.gamma) / ((1.0 - dc.gamma) * sol.D)
