"""Purchase boundary when the force of mortality grows exponentially with age.

The dual stopping problem has two states, the shadow price Z and the force of
mortality M_t = m e^{a t}.  Because M is deterministic given its starting
level, the boundary is a function b(m) of the current mortality level and is
pinned down by requiring, at every level m,

    0 = E_{b(m), m}[ int_0^T e^{-int_0^t (rho+M)} M_t (du + Z_t B) 1{Z_t >= b(M_t)} dt ]

with du = u(q) - u(l(q+B)).  Only the law of Z_t at each fixed time enters, so
the expectation splits into a term under the physical measure and a Z-linear
term that, after a change of measure, becomes z B int M_t e^{-rt} Q(...) dt.

When a > r the premium stream m e^{at} B outgrows discounting and the
expectation diverges, so the problem is posed with a terminal age: the level
M_max at which the survival discount from the lowest grid level has fallen
below ``tail``.  Every node integrates up to the time M reaches M_max.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from . import kernels
from .errors import DegenerateBoundary, DomainError, NoConvergence
from .model import ModelParams, PathBundle, SimConfig, brownian_increments, fmt, utility
from .verification import sample_stats

DEFAULT_TAIL = 1e-6
# horizon_T is unused: every node integrates to its own horizon
DEFAULT_SIM = SimConfig(n_paths=40_000, dt=1.0 / 52.0, horizon_T=1.0, seed=7, antithetic=True,
                        dt_max=4.0, stretch=0.03)


@dataclass(frozen=True)
class GompertzParams:
    """Market and preference inputs plus the mortality law M_t = m0 e^{a t}."""

    params: ModelParams

    def __post_init__(self):
        p = self.params
        if p.gompertz_a < 0:
            raise DomainError("gompertz_a must be nonnegative")
        if not p.bequest_B > 0:
            raise DomainError("bequest_B must be positive")
        if p.earmark_q < 0 or (p.gamma > 1 and not p.earmark_q > 0):
            raise DomainError("earmark_q must be positive when gamma > 1")
        if not p.mu > p.r or not p.sigma > 0:
            raise DomainError("need mu > r and sigma > 0")
        if not self.utility_gap < 0:
            raise DegenerateBoundary("insured bequest is not worth more than the earmarked amount")

    @property
    def a(self) -> float:
        return self.params.gompertz_a

    @property
    def m0(self) -> float:
        return self.params.m

    @property
    def theta(self) -> float:
        return (self.params.mu - self.params.r) / self.params.sigma

    @property
    def utility_gap(self) -> float:
        """u(q) - u(l(q+B)); negative whenever insurance is of any use."""
        p = self.params
        return float(utility(p.earmark_q, p.gamma) - utility(p.l * (p.earmark_q + p.bequest_B), p.gamma))

    @property
    def gain_zero(self) -> float:
        """Shadow price at which the running gain changes sign (any m)."""
        return -self.utility_gap / self.params.bequest_B

    def integrated_mortality(self, t, m: float):
        t = np.asarray(t, dtype=float)
        if self.a == 0:
            return m * t
        return m / self.a * np.expm1(self.a * t)

    def mortality(self, t, m: float):
        return m * np.exp(self.a * np.asarray(t, dtype=float))


def cutoff_level(gp: GompertzParams, m_lo: float, tail: float = DEFAULT_TAIL) -> float:
    """Mortality level at which the survival discount from ``m_lo`` drops below ``tail``."""
    if gp.a == 0:
        return math.inf
    rho = gp.params.rho
    target = math.log(1.0 / tail)
    f = lambda T: rho * T + float(gp.integrated_mortality(T, m_lo)) - target
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    T = brentq(f, 0.0, hi, xtol=1e-12)
    return m_lo * math.exp(gp.a * T)


def node_horizon(gp: GompertzParams, m: float, m_max: float, tail: float = DEFAULT_TAIL) -> float:
    """Integration horizon for a problem started at mortality level m."""
    if gp.a == 0:
        # both the survival discount and the premium discount must have died out
        return math.log(1.0 / tail) / min(gp.params.rho + m, gp.params.r)
    return max(0.0, math.log(m_max / m) / gp.a)


@dataclass(frozen=True)
class MortalityBoundary:
    """Boundary values on an increasing grid of mortality levels.

    Between nodes the boundary is linear in log m; beyond the grid it is held
    at the end values.
    """

    m_grid: np.ndarray
    b_values: np.ndarray
    m_max: float = math.inf
    iterations: int = 0
    movement: float = math.nan
    history: tuple = field(default=(), repr=False)
    residual: np.ndarray | None = None
    residual_stderr: np.ndarray | None = None
    boundary_stderr: np.ndarray | None = None  # residual stderr mapped to the b scale

    def __call__(self, m):
        return np.interp(np.log(m), np.log(self.m_grid), self.b_values)

    def replaced(self, index: int, value: float) -> "MortalityBoundary":
        b = self.b_values.copy()
        b[index] = value
        return MortalityBoundary(self.m_grid, b, self.m_max)


def mortality_grid(gp: GompertzParams, m_lo: float, m_hi: float, n: int,
                   tail: float = DEFAULT_TAIL) -> tuple[np.ndarray, float]:
    """Log-spaced grid on [m_lo, m_hi], extended (same spacing) up to the cutoff level."""
    if not 0 < m_lo < m_hi or n < 2:
        raise DomainError("need 0 < m_grid_lo < m_grid_hi and at least two nodes")
    m_max = cutoff_level(gp, m_lo, tail)
    grid = np.geomspace(m_lo, m_hi, n)
    if math.isfinite(m_max):
        step = math.log(m_hi / m_lo) / (n - 1)
        grid = grid[grid < m_max * (1 - 1e-9)]
        k = len(grid)
        while grid[-1] * math.exp(step) < m_max * (1 - 1e-9):
            grid = np.append(grid, m_lo * math.exp(step * k))
            k += 1
        grid = np.append(grid, m_max)
    return grid, m_max


def simulate_ZM(gp: GompertzParams, z0: float, sim: SimConfig) -> PathBundle:
    """Exact simulation of (Z, M) together with income and the state-price density."""
    p = gp.params
    th = gp.theta
    t = sim.time_grid()
    W = np.zeros((sim.n_paths, len(t)))
    np.cumsum(brownian_increments(sim, t), axis=1, out=W[:, 1:])
    log_xi = -(p.r + 0.5 * th * th) * t - th * W
    Z = z0 * np.exp(log_xi + p.rho * t + gp.integrated_mortality(t, gp.m0))
    Y = p.y0 * np.exp((p.mu_y - 0.5 * p.sigma_y ** 2) * t + p.sigma_y * W)
    M = np.broadcast_to(gp.mortality(t, gp.m0), W.shape).copy()
    return PathBundle(t=t, W=W, Y=Y, xi=np.exp(log_xi), Z=Z, M=M, meta={"seed": sim.seed, "z": z0})


@dataclass(frozen=True)
class ResidualEstimate:
    mean: float
    stderr: float
    constant_part: float = math.nan
    linear_part: float = math.nan  # coefficient of the start value z in the Z-linear term


def shared_time_grid(horizons: np.ndarray, sim: SimConfig) -> np.ndarray:
    """Stretched grid up to the longest horizon that also contains every node horizon."""
    T = float(np.max(horizons))
    base = SimConfig(n_paths=sim.n_paths, dt=min(sim.dt, T), horizon_T=T, seed=sim.seed,
                     antithetic=sim.antithetic, dt_max=sim.dt_max, stretch=sim.stretch).time_grid()
    pts = np.union1d(base, horizons[horizons > 0])
    # drop grid points that crowd a node horizon
    keep = np.ones(len(pts), dtype=bool)
    for h in horizons[horizons > 0]:
        near = (np.abs(pts - h) < 1e-3 * sim.dt) & (pts != h)
        keep &= ~near
    return pts[keep]


class NodeProblem:
    """Weights and drifts for the boundary equation started at one mortality level.

    ``bm`` is theta * W on a shared grid; this node reads its first
    ``len(self.t)`` columns.
    """

    def __init__(self, gp: GompertzParams, m: float, t: np.ndarray, sim: SimConfig,
                 bm: np.ndarray | None = None, sorted_rows: np.ndarray | None = None):
        p = gp.params
        self.gp, self.m, self.sim, self.t = gp, m, sim, t
        self.degenerate = len(t) < 2
        self.bm = bm
        self.sorted_rows = sorted_rows
        if self.degenerate:
            return
        wt = np.zeros(len(t))
        d = np.diff(t)
        wt[:-1] += 0.5 * d
        wt[1:] += 0.5 * d
        th = gp.theta
        integ = gp.integrated_mortality(t, m)
        self.M = gp.mortality(t, m)
        self.w_const = gp.utility_gap * self.M * np.exp(-p.rho * t - integ) * wt
        self.w_lin = p.bequest_B * self.M * np.exp(-p.r * t) * wt
        base = (p.rho - p.r) * t + integ
        self.drift_p = base - 0.5 * th * th * t
        self.drift_q = base + 0.5 * th * th * t
        self.vol = th * np.sqrt(t)

    def log_boundary(self, boundary: MortalityBoundary) -> np.ndarray:
        return np.log(boundary(self.M))

    def _start(self, log_z: float, log_b: np.ndarray) -> float:
        # Z_0 sits exactly on the boundary when solving; the indicator's limit there is 1/2
        if log_z == log_b[0]:
            return 0.5
        return float(log_z >= log_b[0])

    def mc(self, log_z: float, log_b: np.ndarray, parts: bool = False) -> ResidualEstimate:
        if self.degenerate:
            return ResidualEstimate(0.0, 0.0, 0.0, 0.0)
        if self.bm is None:
            raise ValueError("node was built without Brownian samples")
        z = math.exp(log_z)
        bm = self.bm[:, 1:]
        out = np.empty(self.sim.n_paths)
        kernels.gompertz_sums(bm, self.drift_p[1:], self.drift_q[1:], log_b[1:],
                              self.w_const[1:], self.w_lin[1:], log_z, out)
        first = self._start(log_z, log_b)
        out += first * (self.w_const[0] + z * self.w_lin[0])
        mean, se = sample_stats(out, self.sim.antithetic)
        if not parts:
            return ResidualEstimate(mean, se)
        zero = np.zeros(len(self.t) - 1)
        kernels.gompertz_sums(bm, self.drift_p[1:], self.drift_q[1:], log_b[1:],
                              self.w_const[1:], zero, log_z, out)
        const = float(np.mean(out)) + first * self.w_const[0]
        return ResidualEstimate(mean, se, const, (mean - const) / z)

    def mc_mean(self, log_z: float, log_b: np.ndarray) -> float:
        """Sample mean of :meth:`mc` from order statistics of each time column.

        The estimator only involves the indicator of each path at each time, so
        counting samples below a threshold per column gives the same average
        at O(log n) cost per column.
        """
        if self.degenerate:
            return 0.0
        if self.sorted_rows is None:
            return self.mc(log_z, log_b).mean
        nt = len(self.t) - 1
        rows = self.sorted_rows[1:nt + 1]
        cnt_p = np.empty(nt, dtype=np.int64)
        cnt_q = np.empty(nt, dtype=np.int64)
        kernels.column_counts(rows, log_z + self.drift_p[1:] - log_b[1:], cnt_p)
        kernels.column_counts(rows, log_z + self.drift_q[1:] - log_b[1:], cnt_q)
        n = self.sim.n_paths
        z = math.exp(log_z)
        first = self._start(log_z, log_b)
        const = float(self.w_const[1:] @ cnt_p) / n + first * self.w_const[0]
        lin = float(self.w_lin[1:] @ cnt_q) / n + first * self.w_lin[0]
        return const + z * lin

    def quadrature(self, log_z: float, log_b: np.ndarray) -> ResidualEstimate:
        """Same expectation with the exact normal marginal of log Z_t at each grid time."""
        if self.degenerate:
            return ResidualEstimate(0.0, 0.0, 0.0, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            pp = ndtr((log_z + self.drift_p - log_b) / self.vol)
            pq = ndtr((log_z + self.drift_q - log_b) / self.vol)
        pp[0] = pq[0] = self._start(log_z, log_b)
        const = float(self.w_const @ pp)
        lin = float(self.w_lin @ pq)
        return ResidualEstimate(const + math.exp(log_z) * lin, 0.0, const, lin)


class BoundaryProblem:
    """All nodes of a mortality grid sharing one time grid and one set of paths."""

    def __init__(self, gp: GompertzParams, m_grid: np.ndarray, m_max: float, sim: SimConfig,
                 tail: float = DEFAULT_TAIL, with_paths: bool = True):
        self.gp, self.sim, self.m_max, self.tail = gp, sim, m_max, tail
        self.m_grid = np.asarray(m_grid, dtype=float)
        self.horizons = np.array([node_horizon(gp, m, m_max, tail) for m in self.m_grid])
        self.t = shared_time_grid(self.horizons, sim)
        self.bm = self.sorted_rows = None
        if with_paths:
            bm = np.zeros((sim.n_paths, len(self.t)))
            np.cumsum(brownian_increments(sim, self.t), axis=1, out=bm[:, 1:])
            bm *= gp.theta
            self.bm = bm
            self.sorted_rows = np.ascontiguousarray(np.sort(bm.T, axis=1))
        self.nodes = [self.node_at(m, h) for m, h in zip(self.m_grid, self.horizons)]

    def node_at(self, m: float, horizon: float | None = None) -> NodeProblem:
        if horizon is None:
            horizon = node_horizon(self.gp, m, self.m_max, self.tail)
        end = int(np.searchsorted(self.t, horizon * (1 + 1e-12), side="right"))
        if end >= 2 and not math.isclose(self.t[end - 1], horizon, rel_tol=1e-9):
            raise ValueError(f"level m={m:g} has horizon {horizon:g} off the shared grid")
        return NodeProblem(self.gp, m, self.t[:end], self.sim, self.bm, self.sorted_rows)


def boundary_residual(candidate: MortalityBoundary, m: float, gp: GompertzParams, sim: SimConfig,
                      z: float | None = None, tail: float = DEFAULT_TAIL,
                      method: str = "mc") -> ResidualEstimate:
    """Right side of the boundary equation at level m, started from z (default candidate(m))."""
    prob = BoundaryProblem(gp, np.array([m]), candidate.m_max, sim, tail, with_paths=(method == "mc"))
    node = prob.nodes[0]
    if node.degenerate:
        return ResidualEstimate(0.0, 0.0, 0.0, 0.0)
    log_b = node.log_boundary(candidate)
    log_z = math.log(float(candidate(m)) if z is None else z)
    if method == "mc":
        return node.mc(log_z, log_b, parts=True)
    if method == "quadrature":
        return node.quadrature(log_z, log_b)
    raise ValueError(f"unknown method {method!r}")


def _node_root(node: NodeProblem, boundary: MortalityBoundary, index: int, guess: float,
               method: str, xtol: float) -> float:
    """Boundary value at one node, with that node's own value inside the indicator set to the trial."""

    def resid(s: float) -> float:
        log_b = node.log_boundary(boundary.replaced(index, math.exp(s)))
        return node.mc_mean(s, log_b) if method == "mc" else node.quadrature(s, log_b).mean

    # the previous sweep's value is close, so start with a narrow bracket and widen it
    lo = hi = math.log(guess)
    f_lo = f_hi = resid(lo)
    step = 0.01
    for _ in range(60):
        if f_lo < 0:
            break
        lo -= step
        step *= 2.0
        f_lo = resid(lo)
    step = 0.01
    for _ in range(60):
        if f_hi > 0:
            break
        hi += step
        step *= 2.0
        f_hi = resid(hi)
    if not (f_lo < 0 < f_hi):
        raise NoConvergence(f"no sign change for the boundary at m={node.m:g}")
    return math.exp(brentq(resid, lo, hi, xtol=xtol))


def solve_boundary(gp: GompertzParams, m_grid: np.ndarray, m_max: float, sim: SimConfig,
                   max_iters: int = 60, tol: float = 1e-6, damping: float = 0.5,
                   tail: float = DEFAULT_TAIL, method: str = "mc",
                   initial: np.ndarray | None = None) -> MortalityBoundary:
    """Damped fixed-point iteration on the boundary equation.

    Each sweep visits nodes from the highest mortality level down, since M only
    increases and a node depends only on boundary values at levels above it.
    At a node the scalar equation is solved in the start value with the other
    nodes held at their latest values.  The same Brownian samples are reused in
    every sweep, so the iteration is not disturbed by fresh noise.
    """
    prob = BoundaryProblem(gp, m_grid, m_max, sim, tail, with_paths=(method == "mc"))
    m_grid = prob.m_grid
    b = np.full(len(m_grid), gp.gain_zero) if initial is None else np.asarray(initial, dtype=float).copy()
    history = [b.copy()]
    movement = math.inf
    for it in range(1, max_iters + 1):
        new = b.copy()
        for j in reversed(range(len(m_grid))):
            node = prob.nodes[j]
            if node.degenerate:
                # zero horizon: only the instantaneous gain matters
                new[j] = gp.gain_zero
                continue
            current = MortalityBoundary(m_grid, new, m_max)
            root = _node_root(node, current, j, new[j], method, xtol=0.01 * tol)
            new[j] = (1.0 - damping) * b[j] + damping * root
        movement = float(np.max(np.abs(new - b) / b))
        b = new
        history.append(b.copy())
        if movement < tol:
            res, se, bse = _final_residuals(prob, MortalityBoundary(m_grid, b, m_max), method)
            return MortalityBoundary(m_grid, b, m_max, it, movement, tuple(history), res, se, bse)
    raise NoConvergence(f"boundary moved by {movement:.3g} after {max_iters} sweeps",
                        last=MortalityBoundary(m_grid, b, m_max, max_iters, movement, tuple(history)),
                        movement=movement)


def _final_residuals(prob: BoundaryProblem, boundary: MortalityBoundary, method: str):
    """Residual and its stderr at every node, plus the stderr expressed in b units.

    The slope used for the conversion comes from the quadrature evaluator, which
    is smooth in b (the Monte Carlo residual is piecewise constant).
    """
    n = len(prob.m_grid)
    res, se, bse = np.zeros(n), np.zeros(n), np.zeros(n)
    for j, node in enumerate(prob.nodes):
        if node.degenerate:
            continue
        b = float(boundary.b_values[j])
        if method == "mc":
            est = node.mc(math.log(b), node.log_boundary(boundary))
            res[j], se[j] = est.mean, est.stderr
        else:
            res[j] = node.quadrature(math.log(b), node.log_boundary(boundary)).mean
        h = 1e-4
        up = node.quadrature(math.log(b) + h, node.log_boundary(boundary.replaced(j, b * math.exp(h)))).mean
        dn = node.quadrature(math.log(b) - h, node.log_boundary(boundary.replaced(j, b * math.exp(-h)))).mean
        slope = (up - dn) / (b * (math.exp(h) - math.exp(-h)))
        bse[j] = se[j] / abs(slope) if slope != 0 else math.inf
    return res, se, bse


def constant_mortality_boundary(gp: GompertzParams, m: float) -> float:
    """Closed-form boundary for a flat force of mortality m (a = 0)."""
    from .model import derive_constants

    p = gp.params.with_(m=m, gompertz_a=0.0)
    dc = derive_constants(p)
    if p.earmark_q > 0:
        from .earmarked import earmarked_boundary

        return earmarked_boundary(dc, p.earmark_q, p.bequest_B).b_bar
    from .predetermined import solve

    return solve(dc).b


def write_boundary_csv(boundary: MortalityBoundary, out: TextIO, per_iteration: bool = True) -> None:
    """Columns iteration, m, b; the converged boundary is labelled ``final``."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["iteration", "m", "b"])
    if per_iteration:
        for k, vals in enumerate(boundary.history):
            for m, b in zip(boundary.m_grid, vals):
                w.writerow([str(k), fmt(m), fmt(b)])
    for m, b in zip(boundary.m_grid, boundary.b_values):
        w.writerow(["final", fmt(m), fmt(b)])
