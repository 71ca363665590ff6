"""Independent checks of the closed-form solutions.

Monte Carlo valuation of feedback rules, duality gaps, HJB residuals,
boundary perturbation tests and budget identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from . import predetermined as pre
from .errors import NonFiniteUtility
from .feedback import FeedbackRule, optimal_predetermined, never_purchase
from .model import DerivedConstants, SimConfig, bridge_uniforms, normal_blocks, truncation_horizon, utility


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    horizon_T: float
    seed: int
    tail_bound: float
    n_flagged: int = 0

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.mean - target) <= n_se * self.stderr


@dataclass
class MonteCarloRun:
    t: np.ndarray
    values: np.ndarray
    purchase_time: np.ndarray
    flags: np.ndarray
    budget: np.ndarray | None = None
    wealth: np.ndarray | None = None
    antithetic: bool = False
    extra: dict = field(default_factory=dict)


def sample_stats(values: np.ndarray, antithetic: bool) -> tuple[float, float]:
    """Mean and standard error; antithetic pairs are averaged first."""
    if antithetic:
        pairs = []
        start = 0
        from .model import BLOCK_PATHS

        n = len(values)
        while start < n:
            blk = values[start:start + BLOCK_PATHS]
            half = len(blk) // 2
            pairs.append(0.5 * (blk[:half] + blk[half:]))
            start += BLOCK_PATHS
        values = np.concatenate(pairs)
    n = len(values)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return mean, se


def mc_run(rule: FeedbackRule, x: float, y: float, dc: DerivedConstants, sim: SimConfig,
           record: bool = False, budget: bool = False, backend=None) -> MonteCarloRun:
    """Simulate a feedback rule from financial wealth x and income y."""
    simulate = kernels.simulate_policy if backend is None else backend.simulate_policy
    t = sim.time_grid()
    n_steps = len(t) - 1
    w0 = x + y / dc.kappa
    prm = rule.param_vector(dc)
    vals = np.empty(sim.n_paths)
    tau = np.empty(sim.n_paths)
    flags = np.empty(sim.n_paths, dtype=np.int64)
    bud = np.empty(sim.n_paths) if budget else None
    rec = np.empty((sim.n_paths, n_steps + 1)) if record else None
    empty1 = np.empty(0)
    empty2 = np.empty((0, 0))
    for start, eps in normal_blocks(sim, n_steps):
        n = len(eps)
        sl = slice(start, start + n)
        v = np.empty(n)
        ta = np.empty(n)
        fl = np.empty(n, dtype=np.int64)
        bo = np.empty(n) if budget else empty1
        ro = np.empty((n, n_steps + 1)) if record else empty2
        unif = bridge_uniforms(sim, start, n, n_steps) if rule.watches_boundary else empty2
        simulate(np.ascontiguousarray(eps), t, w0, y, prm, v, ta, fl, bo, ro, unif)
        vals[sl], tau[sl], flags[sl] = v, ta, fl
        if budget:
            bud[sl] = bo
        if record:
            rec[sl] = ro
    if not np.all(np.isfinite(vals)):
        raise NonFiniteUtility("simulation produced non-finite utility")
    return MonteCarloRun(t=t, values=vals, purchase_time=tau, flags=flags, budget=bud,
                         wealth=rec, antithetic=sim.antithetic)


def mc_value(rule: FeedbackRule, x: float, y: float, dc: DerivedConstants, sim: SimConfig,
             backend=None) -> McEstimate:
    """Expected discounted utility of a feedback rule, with standard error."""
    run = mc_run(rule, x, y, dc, sim, backend=backend)
    return estimate_from_run(run, dc, sim)


def estimate_from_run(run: MonteCarloRun, dc: DerivedConstants, sim: SimConfig) -> McEstimate:
    mean, se = sample_stats(run.values, run.antithetic)
    rate = min(dc.K, dc.gamma * dc.K, dc.disc)
    return McEstimate(mean=mean, stderr=se, n_paths=sim.n_paths, horizon_T=sim.horizon_T,
                      seed=sim.seed, tail_bound=abs(mean) * math.exp(-rate * sim.horizon_T),
                      n_flagged=int(run.flags.sum()))


def default_sim(dc: DerivedConstants, n_paths: int = 200_000, seed: int = 20240611,
                tail: float = 1e-5, dt: float = 1.0 / 12.0, dt_max: float = 4.0,
                stretch: float = 0.03) -> SimConfig:
    """Simulation settings used by the verification suite.

    The horizon is the truncation horizon for ``tail``; steps start at ``dt``
    and stretch to ``dt_max`` once discounting has made late errors small.
    """
    return SimConfig(n_paths=n_paths, dt=dt, horizon_T=truncation_horizon(dc, tail), seed=seed,
                     antithetic=n_paths % 2 == 0, dt_max=dt_max, stretch=stretch)


# ------------------------------------------------------------ perturbation


@dataclass(frozen=True)
class PerturbationReport:
    optimal: McEstimate
    shifted: dict[str, McEstimate]
    paired_diff: dict[str, tuple[float, float]]  # (mean of shifted - optimal, stderr)

    def passes(self, n_se: float = 3.0) -> bool:
        # "shifted <= optimal within n_se stderr" on the paired difference
        return all(d <= n_se * se for d, se in self.paired_diff.values())


def perturbation_test(x: float, y: float, dc: DerivedConstants, sim: SimConfig,
                      shifts=(0.2, 0.5), include_never: bool = True,
                      sol: pre.PredeterminedSolution | None = None) -> PerturbationReport:
    """Compare the optimal rule with rules whose purchase boundary is moved.

    All rules share random numbers, so paired differences isolate the effect
    of the boundary.
    """
    sol = pre.solve(dc) if sol is None else sol
    base_rule = optimal_predetermined(dc, sol)
    base = mc_run(base_rule, x, y, dc, sim)
    base_est = estimate_from_run(base, dc, sim)
    rules = {}
    for s in shifts:
        for sign in (+1, -1):
            f = 1.0 + sign * s
            rules[f"b x {f:g}"] = optimal_predetermined(dc, sol, boundary_factor=f)
    if include_never:
        rules["never purchase"] = never_purchase(dc)
    shifted, diffs = {}, {}
    for name, rule in rules.items():
        run = mc_run(rule, x, y, dc, sim)
        shifted[name] = estimate_from_run(run, dc, sim)
        diffs[name] = sample_stats(run.values - base.values, sim.antithetic)
    return PerturbationReport(base_est, shifted, diffs)


# ------------------------------------------------------------ duality gap


def duality_gap(x: float, y: float, dc: DerivedConstants,
                sol: pre.PredeterminedSolution | None = None) -> tuple[float, float]:
    """Return (min_z [v(z,y) + z x] - V(x,y), minimiser).

    A log-spaced grid brackets the minimum, bounded Brent refinement in log z
    finishes it; strict convexity of z -> v + zx makes the minimum global.
    """
    sol = pre.solve(dc) if sol is None else sol

    def obj(s: float) -> float:
        z = math.exp(s)
        return pre.dual_v(z, y, sol, dc) + z * x

    grid = np.linspace(-30.0, 30.0, 6001)
    vals = np.array([obj(s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    best = min(res.fun, vals[i])
    return best - pre.value(x, y, sol, dc), math.exp(res.x)


# ------------------------------------------------------------ HJB residuals


def generator_power(c: float, k: float, dc: DerivedConstants) -> float:
    """Coefficient of z^k after applying (L_Z - (rho+m)) to c z^k."""
    th2 = dc.theta ** 2
    p = dc.params
    return c * (0.5 * th2 * k * (k - 1.0) + (p.rho - p.r + p.m) * k - dc.disc)


def _apply_operator(terms, z: np.ndarray, dc: DerivedConstants) -> np.ndarray:
    """(L_Z - (rho+m)) applied to a sum of c z^k terms; terms are (c, k) pairs."""
    out = np.zeros_like(z)
    for c, k in terms:
        out += generator_power(c, k, dc) * z ** k
    return out


@dataclass(frozen=True)
class ResidualReport:
    max_equation_residual: float
    max_obstacle_violation: float
    n_points: int

    def passes(self, tol: float = 1e-8) -> bool:
        return self.max_equation_residual < tol and self.max_obstacle_violation <= 0.0


def hjb_residual_predetermined(sol: pre.PredeterminedSolution, dc: DerivedConstants,
                               z: np.ndarray | None = None, relative: bool = False) -> ResidualReport:
    """Variational-inequality residuals of the fixed-bequest dual value on a z grid.

    Continuation side: the equation residual; stopping side: the running gain
    h z - m u(lB) must be nonpositive.  Points within 1e-6 (relative) of the
    boundary are skipped.
    """
    z = np.logspace(math.log10(sol.b) - 3, math.log10(sol.b) + 4, 2001) if z is None else np.asarray(z)
    near = np.abs(z / sol.b - 1.0) < 1e-6
    cont = (z > sol.b) & ~near
    stop = (z < sol.b) & ~near
    flow = sol.bequest_utility_flow
    zc = z[cont]
    # the constant -flow/(rho+m) maps to +flow under the operator
    op = _apply_operator([(sol.C1, dc.alpha1), (dc.h_over_r, 1.0)], zc, dc) + flow
    res = op + dc.h * zc - flow
    if relative:
        res = res / np.maximum(1.0, np.abs(dc.h * zc))
    gain_stop = dc.h * z[stop] - flow
    return ResidualReport(float(np.max(np.abs(res))) if res.size else 0.0,
                          float(np.max(gain_stop)) if gain_stop.size else -math.inf,
                          int(z.size))


def hjb_residual_earmarked_controlled(sol, dc: DerivedConstants, q: float,
                                      z: np.ndarray | None = None) -> ResidualReport:
    """Residuals of the chosen-amount earmarked dual value on both pieces."""
    from .earmarked import tilde_u

    p = dc.params
    if z is None:
        z = np.logspace(math.log10(sol.b_tilde) - 2, math.log10(sol.L_bar) + 2, 4001)
    nb = np.abs(z / sol.b_tilde - 1.0) < 1e-6
    nl = np.abs(z / sol.L_bar - 1.0) < 1e-6
    mid = (z > sol.b_tilde) & (z < sol.L_bar) & ~nb & ~nl
    up = (z > sol.L_bar) & ~nl
    stop = (z < sol.b_tilde) & ~nb
    u_q = p.m * utility(q, p.gamma)
    zm = z[mid]
    op_mid = _apply_operator([(sol.A1, sol.alpha1), (sol.A2, sol.alpha2), (-sol.C, sol.power)], zm, dc)
    op_mid -= dc.disc * sol.E
    tu = np.array([tilde_u(v, dc, q)[0] for v in zm])
    r_mid = op_mid + u_q - dc.K * tu + zm * dc.K * p.m * q / p.r
    zu = z[up]
    op_up = _apply_operator([(sol.B1, sol.alpha1)], zu, dc) - dc.disc * sol.Delta
    r_up = op_up + u_q - p.m * utility(p.l * q, p.gamma)
    zs = z[stop]
    tus = np.array([tilde_u(v, dc, q)[0] for v in zs])
    gain = u_q - dc.K * tus + zs * dc.K * p.m * q / p.r
    eq = np.concatenate([r_mid, r_up])
    return ResidualReport(float(np.max(np.abs(eq))) if eq.size else 0.0,
                          float(np.max(gain)) if gain.size else -math.inf, int(z.size))


def hjb_residual_earmarked_predetermined(sol, dc: DerivedConstants, q: float, B: float,
                                         z: np.ndarray | None = None) -> ResidualReport:
    p = dc.params
    h = p.m * B
    b = sol.b_bar
    z = np.logspace(math.log10(b) - 3, math.log10(b) + 4, 2001) if z is None else np.asarray(z)
    near = np.abs(z / b - 1.0) < 1e-6
    cont = (z > b) & ~near
    stop = (z < b) & ~near
    gain_const = p.m * utility(q, p.gamma) - p.m * utility(p.l * (B + q), p.gamma)
    zc = z[cont]
    op = _apply_operator([(sol.C1_bar, dc.alpha1), (h / p.r, 1.0)], zc, dc) + dc.disc * sol.gain_constant
    res = op + h * zc + gain_const
    gain_stop = h * z[stop] + gain_const
    return ResidualReport(float(np.max(np.abs(res))) if res.size else 0.0,
                          float(np.max(gain_stop)) if gain_stop.size else -math.inf, int(z.size))


# ------------------------------------------------------------ pathwise identities


def optimal_wealth_identity(x: float, y: float, dc: DerivedConstants, sim: SimConfig,
                            sol: pre.PredeterminedSolution | None = None) -> float:
    """Largest relative gap between simulated wealth and -v_z along dual paths.

    Wealth comes from integrating the feedback rule; the dual path is
    Z_t = z* xi_t e^{(rho+m) t} started at the shadow price of (x, y), and the
    predicted financial wealth is -v_z(Z_t, Y_t) before purchase and
    Z_t^(-1/gamma)/K + h/r - Y_t/kappa after.  Once the purchase rule fires
    the dual path is followed with the post-purchase formula, so the check
    covers both regimes.
    """
    from .model import brownian_increments

    sol = pre.solve(dc) if sol is None else sol
    rule = optimal_predetermined(dc, sol)
    run = mc_run(rule, x, y, dc, sim, record=True)
    p = dc.params
    t = run.t
    dW = brownian_increments(sim, t)
    Wb = np.zeros((sim.n_paths, len(t)))
    np.cumsum(dW, axis=1, out=Wb[:, 1:])
    th = dc.theta
    z0 = pre.z_star(x, y, sol, dc)
    Z = z0 * np.exp((p.rho + p.m - p.r - 0.5 * th * th) * t - th * Wb)
    Y = y * np.exp((p.mu_y - 0.5 * p.sigma_y ** 2) * t + p.sigma_y * Wb)
    X_sim = run.wealth - Y / dc.kappa
    g = dc.gamma
    bought = t[None, :] >= run.purchase_time[:, None]
    X_post = Z ** (-1.0 / g) / dc.K + dc.h_over_r - Y / dc.kappa
    if sol.immediate_purchase:
        X_dual = X_post
    else:
        a1 = dc.alpha1
        X_pre = -(sol.C1 * a1 * Z ** (a1 - 1.0) - Z ** (-1.0 / g) / dc.K + Y / dc.kappa)
        X_dual = np.where(bought, X_post, X_pre)
    W_sim = X_sim + Y / dc.kappa
    W_dual = X_dual + Y / dc.kappa
    return float(np.max(np.abs(W_sim - W_dual) / W_dual))


def budget_identity(rule: FeedbackRule, x: float, y: float, dc: DerivedConstants,
                    sim: SimConfig) -> McEstimate:
    """Estimate E[xi_T X_T + int xi (c + h 1{bought} - Y) dt], which should equal x."""
    run = mc_run(rule, x, y, dc, sim, budget=True)
    mean, se = sample_stats(run.budget, sim.antithetic)
    return McEstimate(mean, se, sim.n_paths, sim.horizon_T, sim.seed, math.nan, int(run.flags.sum()))
