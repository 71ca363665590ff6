"""Earmarked inheritance q: the uninsured bequest is u(q) instead of u(0).

Two problems are covered: a fixed insured amount B on top of q (a finite
purchase boundary exists for every gamma), and an amount chosen at purchase,
whose dual value is pasted together at two points, the boundary ``b_tilde``
and the level ``L_bar`` above which buying extra cover is not worth it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateBoundary, DomainError, UnsupportedRegime
from .model import DerivedConstants, utility


@dataclass(frozen=True)
class EarmarkedPredeterminedSolution:
    b_bar: float
    C1_bar: float
    gain_constant: float  # (m u(l(B+q)) - m u(q)) / (rho+m)


def _require_q(q: float) -> None:
    if not q > 0:
        raise DomainError("earmarked amount q must be positive")


def earmarked_boundary(dc: DerivedConstants, q: float, B: float) -> EarmarkedPredeterminedSolution:
    """Purchase boundary with bequest q + B after purchase and q before."""
    _require_q(q)
    p = dc.params
    if not dc.discount_exceeds_rate:
        raise DomainError("rho + m must exceed r")
    if B < 0:
        raise DomainError("B must be nonnegative")
    g = p.gamma
    numerator = p.m * utility(p.l * (B + q), g) - p.m * utility(q, g)
    h = p.m * B
    if not numerator > 0 or not h > 0:
        raise DegenerateBoundary("buying insurance brings no bequest gain")
    a1 = dc.alpha1
    b = numerator * p.r * a1 / (dc.disc * h * (a1 - 1.0))
    C1 = -(h / (p.r * a1)) * b ** (1.0 - a1)
    return EarmarkedPredeterminedSolution(float(b), float(C1), float(numerator / dc.disc))


def earmarked_w(z: float, sol: EarmarkedPredeterminedSolution, dc: DerivedConstants, q: float, B: float) -> float:
    if z <= sol.b_bar:
        return 0.0
    h = dc.params.m * B
    return sol.C1_bar * z ** dc.alpha1 + h / dc.params.r * z - sol.gain_constant


def earmarked_w_z(z: float, sol: EarmarkedPredeterminedSolution, dc: DerivedConstants, q: float, B: float) -> float:
    if z <= sol.b_bar:
        return 0.0
    h = dc.params.m * B
    return sol.C1_bar * dc.alpha1 * z ** (dc.alpha1 - 1.0) + h / dc.params.r


# ---------------------------------------------------------------- controlled


def threshold_L(dc: DerivedConstants, q: float) -> float:
    """Shadow price above which topping up the earmarked bequest is not worthwhile."""
    _require_q(q)
    p = dc.params
    return q ** (-p.gamma) * p.l ** (1.0 - p.gamma) * p.r / dc.disc


def _power_coefficient(dc: DerivedConstants) -> float:
    p = dc.params
    g = p.gamma
    return (p.m * p.l ** ((1.0 - g) / g) * g / (1.0 - g) * p.r ** ((1.0 - g) / g)
            * dc.disc ** (-1.0 / g))


def tilde_u(z: float, dc: DerivedConstants, q: float) -> tuple[float, float]:
    """Post-purchase bequest value and the extra amount bought, at shadow price z."""
    p = dc.params
    g = p.gamma
    L = threshold_L(dc, q)
    if z < L:
        pw = (g - 1.0) / g
        val = _power_coefficient(dc) * z ** pw + z * p.m * q / p.r
        extra = (z * dc.disc / p.r) ** (-1.0 / g) * p.l ** ((1.0 - g) / g) - q
        return val, extra
    return p.m * utility(p.l * q, g) / dc.disc, 0.0


def tilde_u_z(z: float, dc: DerivedConstants, q: float) -> float:
    p = dc.params
    g = p.gamma
    if z < threshold_L(dc, q):
        pw = (g - 1.0) / g
        return _power_coefficient(dc) * pw * z ** (pw - 1.0) + p.m * q / p.r
    return 0.0


@dataclass(frozen=True)
class EarmarkedControlledSolution:
    b_tilde: float
    A1: float
    A2: float
    B1: float
    L_bar: float
    Delta: float
    C: float
    E: float
    conditions_ok: bool
    F_at_boundary: float
    min_w_on_grid: float
    alpha1: float
    alpha2: float
    power: float


class _System:
    """The pasting conditions with A1, A2, B1 eliminated for a trial boundary."""

    def __init__(self, dc: DerivedConstants, q: float):
        p = dc.params
        g = p.gamma
        self.a1, self.a2 = dc.alpha1, dc.alpha2
        self.pw = (g - 1.0) / g
        self.C = _power_coefficient(dc)
        self.E = p.m * utility(q, g) / dc.disc
        self.Delta = (p.m * utility(q, g) - p.m * utility(p.l * q, g)) / dc.disc
        self.L = threshold_L(dc, q)

    def scaled(self, b: float) -> tuple[float, float, float, float]:
        """Return (A1 b^a1, A2 b^a2, B1 L^a1, residual of value matching at L)."""
        a1, a2, pw, C, E, L = self.a1, self.a2, self.pw, self.C, self.E, self.L
        cb = C * b ** pw
        # value and slope vanish at b
        s2 = (pw * cb - a1 * (cb - E)) / (a2 - a1)
        s1 = (cb - E) - s2
        ratio = L / b
        t1 = s1 * ratio ** a1
        t2 = s2 * ratio ** a2
        cl = C * L ** pw
        upper = (a1 * t1 + a2 * t2 - pw * cl) / a1  # slope match at L gives B1 L^a1
        resid = t1 + t2 + E - cl - upper - self.Delta
        return s1, s2, upper, resid

    def residual(self, b: float) -> float:
        return self.scaled(b)[3]


def smooth_fit_solve(dc: DerivedConstants, q: float, n_scan: int = 4000,
                     grid_points: int = 10_000) -> EarmarkedControlledSolution:
    """Solve the four pasting conditions for (A1, A2, B1, b_tilde).

    The boundary is located by scanning the reduced residual on a log grid
    over (0, L_bar) and refining the sign change with Brent's method.

    Raises
    ------
    UnsupportedRegime
        If there is no sign change below L_bar, or more than one.
    """
    _require_q(q)
    if dc.gamma == 1.0:
        raise DomainError("gamma = 1 is not supported")
    sysm = _System(dc, q)
    L = sysm.L
    zs = L * np.logspace(-12, math.log10(1.0 - 1e-9), n_scan)
    res = np.array([sysm.residual(z) for z in zs])
    ok = np.isfinite(res)
    flips = [i for i in range(n_scan - 1) if ok[i] and ok[i + 1] and res[i] * res[i + 1] < 0]
    exact = [i for i in range(n_scan) if res[i] == 0]
    if not flips and not exact:
        raise UnsupportedRegime("no boundary below L_bar: the purchase rule needs several boundaries")
    roots = [zs[i] for i in exact] + [brentq(sysm.residual, zs[i], zs[i + 1], xtol=1e-300, rtol=1e-15)
                                      for i in flips]
    if len(roots) > 1:
        raise UnsupportedRegime(f"several candidate boundaries below L_bar: {roots}")
    b = float(roots[0])
    s1, s2, upper, _ = sysm.scaled(b)
    A1 = s1 * b ** (-sysm.a1)
    A2 = s2 * b ** (-sysm.a2)
    B1 = upper * L ** (-sysm.a1)
    p = dc.params
    F = p.m * utility(q, p.gamma) - dc.K * tilde_u(b, dc, q)[0] + b * dc.K * p.m * q / p.r
    draft = EarmarkedControlledSolution(
        b_tilde=b, A1=A1, A2=A2, B1=B1, L_bar=L, Delta=sysm.Delta, C=sysm.C, E=sysm.E,
        conditions_ok=True, F_at_boundary=float(F), min_w_on_grid=math.nan,
        alpha1=sysm.a1, alpha2=sysm.a2, power=sysm.pw,
    )
    grid = np.logspace(math.log10(b * 1e-2), math.log10(L * 1e2), grid_points)
    wmin = float(np.min(tilde_w_array(grid, draft)))
    # tiny negative values are rounding noise around the pasting point
    scale = max(abs(sysm.E), abs(sysm.Delta), 1.0)
    ok_all = b < L and F <= 0 and wmin >= -1e-12 * scale
    return EarmarkedControlledSolution(**{**draft.__dict__, "conditions_ok": bool(ok_all), "min_w_on_grid": wmin})


def tilde_w_array(z: np.ndarray, sol: EarmarkedControlledSolution) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    mid = (z > sol.b_tilde) & (z <= sol.L_bar)
    up = z > sol.L_bar
    zm = z[mid]
    out[mid] = sol.A1 * zm ** sol.alpha1 + sol.A2 * zm ** sol.alpha2 + sol.E - sol.C * zm ** sol.power
    out[up] = sol.B1 * z[up] ** sol.alpha1 + sol.Delta
    return out


def tilde_w(z: float, sol: EarmarkedControlledSolution) -> float:
    """Dual value of the purchase-timing problem with an amount chosen at purchase."""
    if not sol.conditions_ok:
        raise UnsupportedRegime("solution does not satisfy the single-boundary conditions")
    return float(tilde_w_array(np.array([z]), sol)[0])


def tilde_w_branches(z: float, sol: EarmarkedControlledSolution) -> dict[str, tuple[float, float]]:
    """Value and slope of the middle and upper formulas at z (used for pasting checks)."""
    a1, a2, pw = sol.alpha1, sol.alpha2, sol.power
    mid = (sol.A1 * z ** a1 + sol.A2 * z ** a2 + sol.E - sol.C * z ** pw,
           a1 * sol.A1 * z ** (a1 - 1) + a2 * sol.A2 * z ** (a2 - 1) - pw * sol.C * z ** (pw - 1))
    up = (sol.B1 * z ** a1 + sol.Delta, a1 * sol.B1 * z ** (a1 - 1))
    return {"middle": mid, "upper": up}
