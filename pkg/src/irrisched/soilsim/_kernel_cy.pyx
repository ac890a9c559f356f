# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled daily Richards-equation kernel.

Same algorithm as ``_kernel_py`` (mixed-form backward Euler, full Newton,
Thomas solve); see that module for the discretization notes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, log, log1p, sqrt

cnp.import_array()

BACKEND = "cython"

STATUS_OK = 0
STATUS_NO_CONVERGENCE = 1
STATUS_NON_FINITE = 2

cdef double C_SAT = 1.0e-5
cdef double PSI_SAT_EPS = -1.0e-9
cdef double MAX_NEWTON_STEP = 2.0


cdef inline void vg_point(double psi, double Ks, double ts, double tr,
                          double alpha, double n, double m,
                          double* theta, double* cap, double* k, double* dk) nogil:
    cdef double ap, t, u, w, se, frac, inner, sqrt_se, dse, da, dk_dse
    if psi >= 0.0:
        theta[0] = ts
        cap[0] = C_SAT
        k[0] = Ks
        dk[0] = 0.0
        return
    ap = -alpha * psi
    t = log(ap)
    u = exp(n * t)
    w = log1p(u)
    se = exp(-m * w)
    theta[0] = tr + (ts - tr) * se
    cap[0] = (ts - tr) * m * n * alpha * (u / ap) * exp(-(m + 1.0) * w)
    frac = u / (1.0 + u)
    if frac > 0.0:
        inner = 1.0 - exp(m * log(frac))
    else:
        inner = 1.0
    sqrt_se = sqrt(se)
    k[0] = Ks * sqrt_se * inner * inner
    if psi >= PSI_SAT_EPS:
        dk[0] = 0.0
    else:
        dse = m * n * alpha * (u / ap) * exp(-(m + 1.0) * w)
        da = exp((m - 1.0) * log(frac)) * exp((1.0 / m - 1.0) * log(se))
        dk_dse = Ks * (inner * inner / (2.0 * sqrt_se) + 2.0 * sqrt_se * inner * da)
        dk[0] = dk_dse * dse


cdef inline double stress_point(double psi, double psi1, double psi2,
                                double psi3, double psi4) nogil:
    if psi >= psi1 or psi <= psi4:
        return 0.0
    if psi > psi2:
        return (psi1 - psi) / (psi1 - psi2)
    if psi >= psi3:
        return 1.0
    return (psi - psi4) / (psi3 - psi4)


cdef int newton_step(double[::1] psi_prev, double[::1] theta_prev, double h,
                     double Ks, double ts, double tr, double alpha, double n, double m,
                     double dz, double q_top, double[::1] sink, bint bottom_sealed,
                     double tol, int max_iter,
                     double[::1] psi, double[::1] theta,
                     double[::1] cap, double[::1] k, double[::1] dk,
                     double[::1] lower, double[::1] diag, double[::1] upper,
                     double[::1] res, double[::1] cp, double[::1] dp,
                     double* resnorm_out) nogil:
    """Returns 1 on convergence, 0 on failure; psi holds the last iterate."""
    cdef int nx = psi_prev.shape[0]
    cdef int i, it
    cdef double g, k_half, q_prev, q_cur, q_bot, dq_bot
    cdef double dq_dup_prev, dq_dlo_prev, dq_dup, dq_dlo
    cdef double denom, delta, resnorm
    cdef double th, ca, kk, dkk

    for i in range(nx):
        psi[i] = psi_prev[i]

    for it in range(max_iter):
        for i in range(nx):
            vg_point(psi[i], Ks, ts, tr, alpha, n, m, &th, &ca, &kk, &dkk)
            theta[i] = th
            cap[i] = ca
            k[i] = kk
            dk[i] = dkk

        # assemble residual and tridiagonal Jacobian row by row
        q_prev = q_top
        dq_dup_prev = 0.0
        dq_dlo_prev = 0.0
        for i in range(nx):
            if i < nx - 1:
                g = 1.0 - (psi[i + 1] - psi[i]) / dz
                k_half = 0.5 * (k[i] + k[i + 1])
                q_cur = k_half * g
                dq_dup = 0.5 * dk[i] * g + k_half / dz
                dq_dlo = 0.5 * dk[i + 1] * g - k_half / dz
            else:
                if bottom_sealed:
                    q_cur = 0.0
                    dq_bot = 0.0
                else:
                    q_cur = k[i]
                    dq_bot = dk[i]
                dq_dup = dq_bot
                dq_dlo = 0.0

            res[i] = (theta[i] - theta_prev[i]) * dz / h + sink[i] * dz - q_prev + q_cur
            diag[i] = cap[i] * dz / h + dq_dup
            if i > 0:
                diag[i] -= dq_dlo_prev
                lower[i] = -dq_dup_prev
            if i < nx - 1:
                upper[i] = dq_dlo

            q_prev = q_cur
            dq_dup_prev = dq_dup
            dq_dlo_prev = dq_dlo

        for i in range(nx):
            if not isfinite(res[i]):
                resnorm_out[0] = res[i]
                return 0

        # Thomas solve: J delta = -res
        cp[0] = upper[0] / diag[0]
        dp[0] = -res[0] / diag[0]
        for i in range(1, nx):
            denom = diag[i] - lower[i] * cp[i - 1]
            if i < nx - 1:
                cp[i] = upper[i] / denom
            else:
                cp[i] = 0.0
            dp[i] = (-res[i] - lower[i] * dp[i - 1]) / denom

        for i in range(nx - 2, -1, -1):
            dp[i] = dp[i] - cp[i] * dp[i + 1]

        resnorm = 0.0
        for i in range(nx):
            delta = dp[i]
            if delta > MAX_NEWTON_STEP:
                delta = MAX_NEWTON_STEP
            elif delta < -MAX_NEWTON_STEP:
                delta = -MAX_NEWTON_STEP
            psi[i] += delta
            if fabs(delta) > resnorm:
                resnorm = fabs(delta)

        if not isfinite(resnorm):
            resnorm_out[0] = resnorm
            return 0
        if resnorm <= tol:
            for i in range(nx):
                vg_point(psi[i], Ks, ts, tr, alpha, n, m, &th, &ca, &kk, &dkk)
                theta[i] = th
            resnorm_out[0] = resnorm
            return 1
        resnorm_out[0] = resnorm
    return 0


cdef int attempt(double[::1] psi_io, double h, int depth, int max_halvings,
                 double Ks, double ts, double tr, double alpha, double n, double m,
                 double dz, double supply, double ev_pot,
                 double[::1] base_sink,
                 double psi1, double psi2, double psi3, double psi4,
                 double ev_ramp_start, double ev_ramp_end,
                 bint top_sealed, bint bottom_sealed,
                 double tol, int max_iter,
                 double[::1] acc,
                 double[::1] theta_prev, double[::1] sink,
                 double[::1] psi_new, double[::1] theta,
                 double[::1] cap, double[::1] k, double[::1] dk,
                 double[::1] lower, double[::1] diag, double[::1] upper,
                 double[::1] res, double[::1] cp, double[::1] dp,
                 double* resnorm_out) nogil:
    cdef int nx = psi_io.shape[0]
    cdef int i, ok
    cdef double q_top, ev_eff, runoff_rate, supply_rate, net, cap_rate, ramp
    cdef double th, ca, kk, dkk, q_bot, sink_total

    for i in range(nx):
        vg_point(psi_io[i], Ks, ts, tr, alpha, n, m, &th, &ca, &kk, &dkk)
        theta_prev[i] = th

    if top_sealed:
        q_top = 0.0
        ev_eff = 0.0
        runoff_rate = 0.0
        supply_rate = 0.0
    else:
        supply_rate = supply
        if ev_ramp_start == ev_ramp_end:
            ramp = 1.0 if psi_io[0] >= ev_ramp_end else 0.0
        else:
            ramp = (psi_io[0] - ev_ramp_end) / (ev_ramp_start - ev_ramp_end)
            if ramp > 1.0:
                ramp = 1.0
            elif ramp < 0.0:
                ramp = 0.0
        ev_eff = ev_pot * ramp
        net = supply_rate - ev_eff
        if net > 0.0:
            cap_rate = Ks * (1.0 - 2.0 * (psi_io[0] if psi_io[0] < 0.0 else 0.0) / dz)
            q_top = net if net < cap_rate else cap_rate
            runoff_rate = net - q_top
        else:
            q_top = net
            runoff_rate = 0.0

    sink_total = 0.0
    for i in range(nx):
        sink[i] = base_sink[i] * stress_point(psi_io[i], psi1, psi2, psi3, psi4)
        sink_total += sink[i]

    ok = newton_step(psi_io, theta_prev, h, Ks, ts, tr, alpha, n, m, dz, q_top, sink,
                     bottom_sealed, tol, max_iter,
                     psi_new, theta, cap, k, dk, lower, diag, upper, res, cp, dp,
                     resnorm_out)
    if ok:
        for i in range(nx):
            psi_io[i] = psi_new[i]
        if bottom_sealed:
            q_bot = 0.0
        else:
            vg_point(psi_io[nx - 1], Ks, ts, tr, alpha, n, m, &th, &ca, &q_bot, &dkk)
        acc[0] += supply_rate * h
        acc[1] += runoff_rate * h
        acc[2] += ev_eff * h
        acc[3] += q_bot * h
        acc[4] += sink_total * dz * h
        return 1
    if depth < max_halvings:
        ok = attempt(psi_io, h / 2.0, depth + 1, max_halvings,
                     Ks, ts, tr, alpha, n, m, dz, supply, ev_pot, base_sink,
                     psi1, psi2, psi3, psi4, ev_ramp_start, ev_ramp_end,
                     top_sealed, bottom_sealed, tol, max_iter, acc,
                     theta_prev, sink, psi_new, theta, cap, k, dk,
                     lower, diag, upper, res, cp, dp, resnorm_out)
        if not ok:
            return 0
        return attempt(psi_io, h / 2.0, depth + 1, max_halvings,
                       Ks, ts, tr, alpha, n, m, dz, supply, ev_pot, base_sink,
                       psi1, psi2, psi3, psi4, ev_ramp_start, ev_ramp_end,
                       top_sealed, bottom_sealed, tol, max_iter, acc,
                       theta_prev, sink, psi_new, theta, cap, k, dk,
                       lower, diag, upper, res, cp, dp, resnorm_out)
    return 0


def day_step(double[::1] psi0, params, double dz, int n_steps, double dt,
             double supply, double ev_pot, double[::1] base_sink, feddes,
             double ev_ramp_start, double ev_ramp_end,
             bint top_sealed, bint bottom_sealed,
             double tol, int max_iter, int max_halvings):
    """Mirror of ``_kernel_py.day_step`` backed by C loops."""
    cdef double Ks = params[0]
    cdef double ts = params[1]
    cdef double tr = params[2]
    cdef double alpha = params[3]
    cdef double n = params[4]
    cdef double m = 1.0 - 1.0 / n
    cdef double psi1 = feddes[0]
    cdef double psi2 = feddes[1]
    cdef double psi3 = feddes[2]
    cdef double psi4 = feddes[3]
    cdef int nx = psi0.shape[0]

    psi_arr = np.array(psi0, dtype=np.float64)
    acc_arr = np.zeros(5, dtype=np.float64)
    cdef double[::1] psi = psi_arr
    cdef double[::1] acc = acc_arr

    scratch = np.zeros((13, nx), dtype=np.float64)
    cdef double[::1] theta_prev = scratch[0]
    cdef double[::1] sink = scratch[1]
    cdef double[::1] psi_new = scratch[2]
    cdef double[::1] theta = scratch[3]
    cdef double[::1] cap = scratch[4]
    cdef double[::1] k = scratch[5]
    cdef double[::1] dk = scratch[6]
    cdef double[::1] lower = scratch[7]
    cdef double[::1] diag = scratch[8]
    cdef double[::1] upper = scratch[9]
    cdef double[::1] res = scratch[10]
    cdef double[::1] cp = scratch[11]
    cdef double[::1] dp = scratch[12]

    cdef double resnorm = 0.0
    cdef int step, ok
    cdef int fail_step = -1

    with nogil:
        for step in range(n_steps):
            ok = attempt(psi, dt, 0, max_halvings, Ks, ts, tr, alpha, n, m, dz,
                         supply, ev_pot, base_sink, psi1, psi2, psi3, psi4,
                         ev_ramp_start, ev_ramp_end, top_sealed, bottom_sealed,
                         tol, max_iter, acc, theta_prev, sink, psi_new, theta,
                         cap, k, dk, lower, diag, upper, res, cp, dp, &resnorm)
            if not ok:
                fail_step = step
                break

    if fail_step >= 0:
        status = STATUS_NON_FINITE if not isfinite(resnorm) else STATUS_NO_CONVERGENCE
        return psi_arr, tuple(acc_arr), status, fail_step, resnorm
    return psi_arr, tuple(acc_arr), STATUS_OK, -1, 0.0
