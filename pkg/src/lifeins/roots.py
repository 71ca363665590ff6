"""Bracketed root finding: Newton steps guarded by bisection."""

from __future__ import annotations

import math
from typing import Callable

from .errors import NoRoot


def safeguarded_newton(fdf: Callable[[float], tuple[float, float]], lo: float, hi: float,
                       xtol: float = 1e-14, max_iter: int = 200) -> float:
    """Root of a function on a sign-changing bracket [lo, hi].

    ``fdf(s)`` returns the value and derivative.  A Newton step is taken when
    it stays inside the current bracket and shrinks it fast enough; otherwise
    the midpoint is used.
    """
    flo, _ = fdf(lo)
    fhi, _ = fdf(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise NoRoot(f"bracket [{lo}, {hi}] does not change sign")
    if flo > 0:
        lo, hi = hi, lo  # keep f(lo) < 0 < f(hi)
    s = 0.5 * (lo + hi)
    width_old = abs(hi - lo)
    width = width_old
    fs, dfs = fdf(s)
    for _ in range(max_iter):
        newton_bad = dfs == 0 or ((s - hi) * dfs - fs) * ((s - lo) * dfs - fs) > 0
        if newton_bad or abs(2.0 * fs) > abs(width_old * dfs):
            width_old = width
            width = 0.5 * (hi - lo)
            s = lo + width
        else:
            width_old = width
            width = fs / dfs
            s = s - width
        if abs(width) < xtol:
            return s
        fs, dfs = fdf(s)
        if fs == 0:
            return s
        if fs < 0:
            lo = s
        else:
            hi = s
        if abs(hi - lo) < xtol:
            return s
    raise NoRoot("safeguarded Newton did not converge")


def log_root(fdf_z: Callable[[float], tuple[float, float]], z_lo: float, z_hi_guess: float,
             rtol: float = 1e-12) -> float:
    """Root in z > 0 found on log z, growing the upper end until the sign changes.

    ``fdf_z(z)`` returns the value and dz-derivative.
    """

    def fdf_s(s: float) -> tuple[float, float]:
        z = math.exp(s)
        v, d = fdf_z(z)
        return v, d * z

    s_lo = math.log(z_lo)
    f_lo = fdf_s(s_lo)[0]
    s_hi = math.log(max(z_hi_guess, z_lo * 2.0))
    step = s_hi - s_lo
    for _ in range(400):
        if f_lo * fdf_s(s_hi)[0] <= 0:
            break
        step *= 2.0
        s_hi = s_lo + step
    else:
        raise NoRoot("could not bracket root in log z")
    s = safeguarded_newton(fdf_s, s_lo, s_hi, xtol=rtol * 1e-2)
    return math.exp(s)
