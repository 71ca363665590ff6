"""Lattice dynamic programming for one-dimensional dual stopping problems.

Solves sup over stopping times of E[int_0^eta e^{-(rho+m)s} g(Z_s) ds] for a
gain rate g that is a sum of power terms, independently of any closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from .errors import NoConvergence
from .model import DerivedConstants, utility


@dataclass(frozen=True)
class GainRate:
    """g(z) = sum of coef * z**power."""

    terms: tuple[tuple[float, float], ...]

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return sum(c * z ** k for c, k in self.terms)

    def zero_crossing(self) -> float | None:
        """Positive root for a gain of the form c1 z + c0 with c1 > 0 > c0."""
        lin = dict((k, c) for c, k in self.terms)
        if set(lin) <= {0.0, 1.0} and lin.get(1.0, 0.0) > 0 and lin.get(0.0, 0.0) < 0:
            return -lin[0.0] / lin[1.0]
        return None


def predetermined_gain(dc: DerivedConstants) -> GainRate:
    p = dc.params
    return GainRate(((dc.h, 1.0), (-p.m * utility(p.l * p.bequest_B, p.gamma), 0.0)))


def earmarked_gain(dc: DerivedConstants, q: float, B: float) -> GainRate:
    p = dc.params
    const = p.m * utility(q, p.gamma) - p.m * utility(p.l * (B + q), p.gamma)
    return GainRate(((p.m * B, 1.0), (float(const), 0.0)))


def controlled_gain(dc: DerivedConstants) -> GainRate:
    from .controlled import bar_u

    g = dc.gamma
    pw = (g - 1.0) / g
    return GainRate(((-dc.K * bar_u(1.0, dc), pw),))


@dataclass(frozen=True)
class DpGrid:
    z_grid: np.ndarray
    dt: float
    value: np.ndarray | None = None
    boundary: float = math.nan
    bellman_residual: float = math.nan
    iterations: int = 0


def make_grid(gain: GainRate, n_nodes: int = 600, dt: float = 1.0 / 250.0,
              half_width: float = 3.5, center: float | None = None) -> DpGrid:
    """Log-spaced grid centred on the gain's zero crossing (or on ``center``)."""
    if center is None:
        center = gain.zero_crossing() or 1.0
    x = np.linspace(math.log(center) - half_width, math.log(center) + half_width, n_nodes)
    return DpGrid(z_grid=np.exp(x), dt=dt)


def _power_growth(k: float, dc: DerivedConstants) -> float:
    """Rate a with E[Z_t^k] = z^k e^{a t}."""
    p = dc.params
    nu = p.rho - p.r + p.m - 0.5 * dc.theta ** 2
    return k * nu + 0.5 * k * k * dc.theta ** 2


def never_stop_value(gain: GainRate, z, dc: DerivedConstants):
    """Value of never stopping, exact for power-term gains."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for c, k in gain.terms:
        rate = dc.disc - _power_growth(k, dc)
        if not rate > 0:
            raise ValueError("never-stop value is infinite for this gain")
        out += c * z ** k / rate
    return out


def step_kernel(mean: float, var: float, dx: float, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Discrete distribution on lattice offsets with the given mean and variance.

    Weights are Gaussian cell probabilities whose location and scale are
    adjusted until the discrete mean and variance match the targets (plain
    cell rounding would add about dx^2/12 of spurious variance).
    """
    mu_t, var_t = mean / dx, var / (dx * dx)
    half = int(math.ceil(9.0 * math.sqrt(var_t) + abs(mu_t))) + 2
    offs = np.arange(-half, half + 1, dtype=float)
    loc, scale = mu_t, math.sqrt(var_t)
    for _ in range(200):
        w = np.diff(ndtr((np.concatenate([offs - 0.5, [offs[-1] + 0.5]]) - loc) / scale))
        w /= w.sum()
        m1 = float(w @ offs)
        v1 = float(w @ (offs - m1) ** 2)
        if abs(m1 - mu_t) < tol and abs(v1 - var_t) < tol * var_t:
            break
        loc += mu_t - m1
        scale *= math.sqrt(var_t / v1)
    else:
        raise NoConvergence("could not match transition moments")
    return offs.astype(int), w


def dp_dual_oracle(dc: DerivedConstants, grid: DpGrid, payoff: GainRate,
                   max_iter: int = 500) -> DpGrid:
    """Howard policy iteration for the discretised stopping problem.

    log Z moves on the lattice with a moment-matched kernel.  Mass leaving
    below the grid is treated as stopped (value 0); mass leaving above gets
    the never-stop value at its landing point, or 0 if that is negative.
    The returned boundary is the largest grid z with value 0.
    """
    p = dc.params
    z = np.asarray(grid.z_grid, dtype=float)
    x = np.log(z)
    n = len(x)
    dx = (x[-1] - x[0]) / (n - 1)
    dt = grid.dt
    th = dc.theta
    nu = p.rho - p.r + p.m - 0.5 * th * th
    beta = math.exp(-dc.disc * dt)
    offs, w = step_kernel(nu * dt, th * th * dt, dx)

    P = np.zeros((n, n))
    far = np.zeros(n)
    clip_far = never_stop_value(payoff, z[-1:], dc)[0] <= 0
    for o, wo in zip(offs, w):
        lo, hi = max(0, -o), min(n, n - o)
        if hi > lo:
            rows = np.arange(lo, hi)
            P[rows, rows + o] += wo
        if o > 0 and not clip_far:
            rows = np.arange(max(n - o, 0), n)
            far[rows] += wo * never_stop_value(payoff, np.exp(x[rows] + o * dx), dc)

    # expected running gain over one step, exact for power terms
    reward = np.zeros(n)
    for c, k in payoff.terms:
        rate = dc.disc - _power_growth(k, dc)
        reward += c * z ** k * (1.0 - math.exp(-rate * dt)) / rate
    rhs_const = reward + beta * far

    cont = rhs_const > 0
    V = np.zeros(n)
    for it in range(1, max_iter + 1):
        V = np.zeros(n)
        idx = np.flatnonzero(cont)
        if idx.size:
            A = np.eye(idx.size) - beta * P[np.ix_(idx, idx)]
            V[idx] = np.linalg.solve(A, rhs_const[idx])
        q = rhs_const + beta * (P @ V)
        new_cont = q > 0
        if np.array_equal(new_cont, cont):
            break
        cont = new_cont
    else:
        raise NoConvergence("policy iteration did not settle", last=V)
    resid = float(np.max(np.abs(V - np.maximum(0.0, rhs_const + beta * (P @ V)))))
    scale = max(1.0, float(np.max(np.abs(V))))
    if resid > 1e-8 * scale:
        raise NoConvergence(f"Bellman residual {resid:.3g} too large", last=V, movement=resid)
    zero = np.flatnonzero(V <= 0.0)
    boundary = float(z[zero[-1]]) if zero.size else math.nan
    return replace(grid, value=V, boundary=boundary, bellman_residual=resid, iterations=it)
