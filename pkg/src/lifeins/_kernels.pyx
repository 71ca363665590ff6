# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels; same calling convention as ``_kernels_py``."""

from libc.math cimport exp, expm1, log, sqrt, fabs, INFINITY

cdef enum:
    GAMMA = 0
    K = 1
    THETA = 2
    R = 3
    DISC = 4
    A = 5
    ALPHA1 = 6
    W_BUY = 7
    T_BUY = 8
    HR = 9
    BEQ = 10
    CTL = 11
    L = 12
    M = 13
    CF = 14
    EF = 15
    MU_Y = 16
    SIG_Y = 17
    KAPPA = 18

cdef double NEWTON_TOL = 1e-10
cdef int NEWTON_MAX = 100


cdef inline double solve_log_z(double w, double s, double amp, double a1, double g, double Kc,
                               double* e1_out, double* e2_out) noexcept nogil:
    """Newton on s = log z for A e^{(a1-1)s} + e^{-s/g}/K = w.

    The map is convex and decreasing in s, so Newton converges from any start.
    The returned e1, e2 are the two terms at the last evaluation point.
    """
    cdef double e1 = 0.0, e2 = 0.0, f, df, step
    cdef int it
    for it in range(NEWTON_MAX):
        e1 = amp * exp((a1 - 1.0) * s)
        e2 = exp(-s / g) / Kc
        f = e1 + e2 - w
        df = (a1 - 1.0) * e1 - e2 / g
        step = f / df
        s -= step
        if fabs(step) < NEWTON_TOL:
            break
    e1_out[0] = e1
    e2_out[0] = e2
    return s


cdef inline double step_integral(double f0, double f1, double dt, double var) noexcept nogil:
    """E[int_0^dt f] given the endpoints, when log f is Brownian with variance rate var.

    Exponential interpolation between the endpoints times the bridge factor
    exp(var dt / 12); falls back to the trapezoid rule if f changes sign.
    """
    cdef double x
    if f0 == 0.0 or f1 / f0 <= 0.0:
        return 0.5 * dt * (f0 + f1)
    x = log(f1 / f0)
    if fabs(x) < 1e-10:
        return dt * f0 * (1.0 + 0.5 * x) * exp(var * dt / 12.0)
    return dt * f0 * expm1(x) / x * exp(var * dt / 12.0)


def simulate_policy(const double[:, ::1] eps, const double[::1] tgrid, double w0, double y0,
                    const double[::1] prm, double[::1] value_out, double[::1] tau_out,
                    long[::1] flag_out, double[::1] budget_out, double[:, ::1] w_rec,
                    const double[:, ::1] unif):
    cdef Py_ssize_t n = eps.shape[0]
    cdef Py_ssize_t n_steps = eps.shape[1]
    cdef Py_ssize_t i, k
    cdef double g = prm[GAMMA], Kc = prm[K], th = prm[THETA], r = prm[R], disc = prm[DISC]
    cdef double amp = prm[A], a1 = prm[ALPHA1], w_buy = prm[W_BUY], t_buy = prm[T_BUY]
    cdef double ctl = prm[CTL], cf = prm[CF], ef = prm[EF]
    cdef double mu_y = prm[MU_Y], sig_y = prm[SIG_Y], kappa = prm[KAPPA]
    cdef bint want_budget = budget_out.shape[0] > 0
    cdef bint want_rec = w_rec.shape[0] > 0
    cdef double T = tgrid[n_steps]
    cdef double one_g = 1.0 - g
    cdef double log_k = log(Kc)
    cdef double log_cf = log(cf)
    cdef double lw_buy = log(w_buy) if w_buy > 0 else -INFINITY
    cdef double disc_T = exp(-disc * T)
    cdef double lw, lw_old, W, hr, beq, acc, s, tau, cw, aw, c, u_prev, u_now, dt, sq, e
    cdef double xi = 1.0, Y = y0, bud = 0.0, bud_prev = 0.0, bud_now, e1 = 0.0, e2 = 0.0
    cdef double hr_new, Bq, t, ratio
    cdef bint bought, changed
    cdef long flag
    cdef double ydrift = mu_y - 0.5 * sig_y * sig_y
    cdef double xdrift = r + 0.5 * th * th
    cdef double post_drift = r + th * th / g - Kc - 0.5 * th * th / (g * g)
    cdef double post_vol = th / g
    # variance rate of log utility: dual dynamics, or the fixed exposure
    cdef double var_dual = (one_g * th / g) ** 2
    cdef double var_fixed = (one_g * ef) ** 2
    # crossing of the purchase level between grid dates (Brownian bridge in log z)
    cdef bint bridge = unif.shape[0] > 0 and amp > 0 and w_buy > 0
    cdef double ls_buy = 0.0, s_old, gap_old, gap_new, two_th2 = 2.0 / (th * th)
    cdef bint crossed
    if bridge:
        ls_buy = solve_log_z(w_buy, -g * log(Kc * w_buy), amp, a1, g, Kc, &e1, &e2)

    import numpy as np
    dsc_arr = np.exp(-disc * np.asarray(tgrid))
    dt_arr = np.diff(np.asarray(tgrid))
    sq_arr = np.sqrt(dt_arr)
    cdef const double[::1] dsc = dsc_arr
    cdef const double[::1] dts = dt_arr
    cdef const double[::1] sqs = sq_arr

    with nogil:
        for i in range(n):
            lw = log(w0)
            hr = 0.0
            beq = 0.0
            acc = 0.0
            tau = INFINITY
            flag = 0
            bought = False
            s = -g * log(Kc * w0) if amp > 0 else 0.0
            ratio = 0.0
            cw = 0.0
            aw = 0.0
            u_now = 0.0
            if want_budget:
                xi = 1.0
                Y = y0
                bud = 0.0
            t = 0.0
            k = -1
            crossed = False
            # purchase check at t = 0 and after every step
            while True:
                changed = False
                if not bought and (crossed or lw >= lw_buy or t >= t_buy - 1e-12):
                    W = exp(lw)
                    hr_new = ctl * W if ctl >= 0 else prm[HR]
                    if W - hr_new > 0:
                        hr = hr_new
                        if ctl >= 0:
                            Bq = hr * r / prm[M]
                            beq = prm[M] * exp(one_g * log(prm[L] * Bq)) / one_g
                        else:
                            beq = prm[BEQ]
                        lw = log(W - hr)
                        bought = True
                        changed = True
                        tau = t
                        acc += beq * (dsc[k + 1] - disc_T) / disc
                    else:
                        flag = 1
                if want_rec:
                    w_rec[i, k + 1] = exp(lw) + hr
                if k < 0 or changed:
                    if bought:
                        cw = Kc
                        aw = post_vol
                        u_now = exp(one_g * (log_k + lw)) / one_g
                    elif amp > 0:
                        W = exp(lw)
                        s = solve_log_z(W, s, amp, a1, g, Kc, &e1, &e2)
                        cw = Kc * e2 / W
                        aw = th * (e1 * (1.0 - a1) + e2 / g) / W
                        ratio = (e1 + e2) / ((a1 - 1.0) * e1 - e2 / g)
                        u_now = exp(-one_g * s / g) / one_g
                    else:
                        cw = cf
                        aw = ef
                        u_now = exp(one_g * (log_cf + lw)) / one_g
                    if want_budget:
                        bud_prev = xi * (cw * exp(lw) + hr * r - Y)
                u_prev = u_now
                k += 1
                if k >= n_steps:
                    break
                dt = dts[k]
                sq = sqs[k]
                e = eps[i, k]
                lw_old = lw
                if bought:
                    lw += post_drift * dt + post_vol * sq * e
                    u_now = exp(one_g * (log_k + lw)) / one_g
                elif amp > 0:
                    lw += (r + th * aw - cw - 0.5 * aw * aw) * dt + aw * sq * e
                    W = exp(lw)
                    s_old = s
                    s = solve_log_z(W, s + (lw - lw_old) * ratio, amp, a1, g, Kc, &e1, &e2)
                    cw = Kc * e2 / W
                    aw = th * (e1 * (1.0 - a1) + e2 / g) / W
                    ratio = (e1 + e2) / ((a1 - 1.0) * e1 - e2 / g)
                    u_now = exp(-one_g * s / g) / one_g
                    if bridge:
                        gap_old = s_old - ls_buy
                        gap_new = s - ls_buy
                        crossed = (gap_old > 0 and gap_new > 0
                                   and unif[i, k] < exp(-two_th2 * gap_old * gap_new / dt))
                else:
                    lw += (r + th * aw - cw - 0.5 * aw * aw) * dt + aw * sq * e
                    u_now = exp(one_g * (log_cf + lw)) / one_g
                acc += step_integral(dsc[k] * u_prev, dsc[k + 1] * u_now, dt,
                                     var_dual if (bought or amp > 0) else var_fixed)
                if want_budget:
                    xi *= exp(-xdrift * dt - th * sq * e)
                    Y *= exp(ydrift * dt + sig_y * sq * e)
                    bud_now = xi * (cw * exp(lw) + hr * r - Y)
                    bud += 0.5 * dt * (bud_prev + bud_now)
                    bud_prev = bud_now
                t = tgrid[k + 1]
            value_out[i] = acc
            tau_out[i] = tau
            flag_out[i] = flag
            if want_budget:
                budget_out[i] = xi * (exp(lw) + hr - Y / kappa) + bud


def gompertz_sums(const double[:, :] bm, const double[::1] drift_p, const double[::1] drift_q,
                  const double[::1] log_b, const double[::1] w_const, const double[::1] w_lin,
                  double log_z, double[::1] out):
    """Per-path discounted gain restricted to the continuation region.

    ``bm`` holds theta * W_t (cumulative Brownian motion scaled by the market
    price of risk) at the grid times; the physical-measure log dual process is
    ``log_z + drift_p - bm`` and the price-measure one ``log_z + drift_q - bm``.
    Only the first ``len(drift_p)`` columns of ``bm`` are read.
    """
    cdef Py_ssize_t n = bm.shape[0]
    cdef Py_ssize_t nt = drift_p.shape[0]
    cdef Py_ssize_t i, k
    cdef double acc, zlin, x
    cdef double z = exp(log_z)
    with nogil:
        for i in range(n):
            acc = 0.0
            zlin = 0.0
            for k in range(nt):
                x = log_z - bm[i, k]
                if x + drift_p[k] >= log_b[k]:
                    acc += w_const[k]
                if x + drift_q[k] >= log_b[k]:
                    zlin += w_lin[k]
            out[i] = acc + z * zlin


def column_counts(const double[:, ::1] sorted_rows, const double[::1] thresholds, long[::1] out):
    """For each row k (sorted ascending), the number of entries <= thresholds[k]."""
    cdef Py_ssize_t nt = thresholds.shape[0]
    cdef Py_ssize_t n = sorted_rows.shape[1]
    cdef Py_ssize_t k, lo, hi, mid
    cdef double x
    with nogil:
        for k in range(nt):
            x = thresholds[k]
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) >> 1
                if sorted_rows[k, mid] <= x:
                    lo = mid + 1
                else:
                    hi = mid
            out[k] = lo
