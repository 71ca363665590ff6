"""Pure numpy versions of the simulation kernels.

Both backends share one calling convention so they can be swapped at import
time; see :mod:`lifeins.kernels`.
"""

from __future__ import annotations

import numpy as np

# indices into the policy parameter vector
GAMMA, K, THETA, R, DISC, A, ALPHA1, W_BUY, T_BUY, HR, BEQ, CTL, L, M, CF, EF, MU_Y, SIG_Y, KAPPA = range(19)
N_PARAMS = 19

NEWTON_TOL = 1e-10
NEWTON_MAX = 100


def _solve_log_z(w, s, amp, a1, g, Kc):
    """Newton on s = log z for A e^{(a1-1)s} + e^{-s/g}/K = w (convex, decreasing)."""
    for _ in range(NEWTON_MAX):
        e1 = amp * np.exp((a1 - 1.0) * s)
        e2 = np.exp(-s / g) / Kc
        f = e1 + e2 - w
        df = (a1 - 1.0) * e1 - e2 / g
        step = f / df
        s = s - step
        if np.max(np.abs(step), initial=0.0) < NEWTON_TOL:
            break
    return s, e1, e2


def step_integral(f0, f1, dt, var):
    """E[int_0^dt f] given the endpoints, when log f is Brownian with variance rate var."""
    f0 = np.asarray(f0, dtype=float)
    f1 = np.asarray(f1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = f1 / f0
        x = np.log(np.where(ratio > 0, ratio, 1.0))
        shape = np.where(np.abs(x) < 1e-10, 1.0 + 0.5 * x, np.expm1(x) / np.where(x == 0, 1.0, x))
    smooth = dt * f0 * shape * np.exp(var * dt / 12.0)
    return np.where((f0 != 0) & (ratio > 0), smooth, 0.5 * dt * (f0 + f1))


def simulate_policy(eps, tgrid, w0, y0, prm, value_out, tau_out, flag_out, budget_out, w_rec, unif):
    n, n_steps = eps.shape
    g, Kc, th, r, disc = prm[GAMMA], prm[K], prm[THETA], prm[R], prm[DISC]
    amp, a1 = prm[A], prm[ALPHA1]
    w_buy, t_buy = prm[W_BUY], prm[T_BUY]
    ctl, cf, ef = prm[CTL], prm[CF], prm[EF]
    want_budget = budget_out.shape[0] > 0
    want_rec = w_rec.shape[0] > 0
    one_g = 1.0 - g
    log_k, log_cf = np.log(Kc), np.log(cf)
    lw_buy = np.log(w_buy) if w_buy > 0 else -np.inf
    tgrid = np.asarray(tgrid)
    dsc = np.exp(-disc * tgrid)
    dts = np.diff(tgrid)
    sqs = np.sqrt(dts)
    post_drift = r + th * th / g - Kc - 0.5 * th * th / (g * g)
    post_vol = th / g
    var_dual = (one_g * th / g) ** 2
    var_fixed = (one_g * ef) ** 2
    # crossing of the purchase level between grid dates (Brownian bridge in log z)
    bridge = unif.shape[0] > 0 and amp > 0 and w_buy > 0
    if bridge:
        ls_buy = _solve_log_z(np.array([w_buy]), np.array([-g * np.log(Kc * w_buy)]), amp, a1, g, Kc)[0][0]
    crossed = np.zeros(n, dtype=bool)

    lw = np.full(n, np.log(w0))
    hr = np.zeros(n)
    bought = np.zeros(n, dtype=bool)
    flags = np.zeros(n, dtype=np.int64)
    tau = np.full(n, np.inf)
    acc = np.zeros(n)
    s = np.full(n, -g * np.log(Kc * w0)) if amp > 0 else np.zeros(n)
    ratio = np.zeros(n)
    cw = np.zeros(n)
    aw = np.zeros(n)
    u = np.zeros(n)
    if want_budget:
        xi = np.ones(n)
        Y = np.full(n, float(y0))
        bud = np.zeros(n)
        bud_prev = np.zeros(n)

    def try_buy(k, t):
        want = ~bought & (crossed | (lw >= lw_buy) | (t >= t_buy - 1e-12))
        if not want.any():
            return want
        W = np.exp(lw[want])
        hr_new = ctl * W if ctl >= 0 else np.full(W.shape, prm[HR])
        good = W - hr_new > 0
        idx = np.flatnonzero(want)
        flags[idx[~good]] = 1
        idx = idx[good]
        hr[idx] = hr_new[good]
        if ctl >= 0:
            B = hr[idx] * r / prm[M]
            beq = prm[M] * np.exp(one_g * np.log(prm[L] * B)) / one_g
        else:
            beq = prm[BEQ]
        lw[idx] = np.log(W[good] - hr_new[good])
        bought[idx] = True
        tau[idx] = t
        acc[idx] += beq * (dsc[k] - dsc[-1]) / disc
        out = np.zeros(n, dtype=bool)
        out[idx] = True
        return out

    def evaluate(sel, predict):
        # consumption/exposure per unit wealth and utility flow on the selected paths
        post = sel & bought
        cw[post] = Kc
        aw[post] = post_vol
        u[post] = np.exp(one_g * (log_k + lw[post])) / one_g
        pre = sel & ~bought
        if amp > 0:
            if pre.any():
                W = np.exp(lw[pre])
                start = s[pre] + predict[pre] * ratio[pre]
                sp, e1, e2 = _solve_log_z(W, start, amp, a1, g, Kc)
                s[pre] = sp
                cw[pre] = Kc * e2 / W
                aw[pre] = th * (e1 * (1.0 - a1) + e2 / g) / W
                ratio[pre] = (e1 + e2) / ((a1 - 1.0) * e1 - e2 / g)
                u[pre] = np.exp(-one_g * sp / g) / one_g
        else:
            cw[pre] = cf
            aw[pre] = ef
            u[pre] = np.exp(one_g * (log_cf + lw[pre])) / one_g

    no_move = np.zeros(n)
    try_buy(0, 0.0)
    if want_rec:
        w_rec[:, 0] = np.exp(lw) + hr
    evaluate(np.ones(n, dtype=bool), no_move)
    if want_budget:
        bud_prev[:] = xi * (cw * np.exp(lw) + hr * r - Y)
    for k in range(n_steps):
        dt, sq = dts[k], sqs[k]
        e = eps[:, k]
        u_prev = u.copy()
        lw_old = lw.copy()
        s_old = s.copy()
        lw += np.where(bought, post_drift * dt + post_vol * sq * e,
                       (r + th * aw - cw - 0.5 * aw * aw) * dt + aw * sq * e)
        evaluate(np.ones(n, dtype=bool), lw - lw_old)
        if bridge:
            gap_old, gap_new = s_old - ls_buy, s - ls_buy
            with np.errstate(over="ignore"):
                p_cross = np.exp(-2.0 * gap_old * gap_new / (th * th * dt))
            crossed = ~bought & (gap_old > 0) & (gap_new > 0) & (unif[:, k] < p_cross)
        acc += step_integral(dsc[k] * u_prev, dsc[k + 1] * u, dt,
                             np.where(bought | (amp > 0), var_dual, var_fixed))
        if want_budget:
            xi *= np.exp(-(r + 0.5 * th * th) * dt - th * sq * e)
            Y *= np.exp((prm[MU_Y] - 0.5 * prm[SIG_Y] ** 2) * dt + prm[SIG_Y] * sq * e)
            bud_now = xi * (cw * np.exp(lw) + hr * r - Y)
            bud += 0.5 * dt * (bud_prev + bud_now)
            bud_prev = bud_now
        changed = try_buy(k + 1, tgrid[k + 1])
        if want_rec:
            w_rec[:, k + 1] = np.exp(lw) + hr
        if changed.any():
            evaluate(changed, no_move)
            if want_budget:
                bud_prev[changed] = (xi * (cw * np.exp(lw) + hr * r - Y))[changed]
    value_out[:] = acc
    tau_out[:] = tau
    flag_out[:] = flags
    if want_budget:
        budget_out[:] = xi * (np.exp(lw) + hr - Y / prm[KAPPA]) + bud


def gompertz_sums(bm, drift_p, drift_q, log_b, w_const, w_lin, log_z, out):
    x = log_z - bm[:, :len(drift_p)]
    on_p = x + drift_p >= log_b
    on_q = x + drift_q >= log_b
    out[:] = on_p @ w_const + np.exp(log_z) * (on_q @ w_lin)


def column_counts(sorted_rows, thresholds, out):
    for k in range(len(thresholds)):
        out[k] = np.searchsorted(sorted_rows[k], thresholds[k], side="right")
