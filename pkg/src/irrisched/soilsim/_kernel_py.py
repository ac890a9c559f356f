"""Pure-Python daily Richards-equation kernel.

Reference implementation of the hot inner loop; the compiled extension in
``_kernel_cy`` performs the same arithmetic. Selection happens at import
time in :mod:`irrisched.soilsim.solver`.

Discretization: vertex-centred nodes with equal control volumes dz, depth
increasing downward. Backward-Euler steps solve the mixed-form residual

    R_i = (theta_i - theta_i^prev) * dz / h - q_{i-1/2} + q_{i+1/2} + S_i * dz

with interface fluxes q = K_half * (1 - dpsi/dz) (positive downward),
full Newton iteration on heads, and a tridiagonal (Thomas) linear solve.
The mixed form keeps the discrete water balance exact at convergence
(Celia et al. 1990).
"""

from __future__ import annotations

import numpy as np

from .hydraulics import C_SAT, _PSI_SAT_EPS

BACKEND = "python"

STATUS_OK = 0
STATUS_NO_CONVERGENCE = 1
STATUS_NON_FINITE = 2

_MAX_NEWTON_STEP = 2.0  # m, elementwise clip on Newton updates


def _vg_all(psi, Ks, ts, tr, alpha, n):
    """theta, capacity, conductivity and dK/dpsi for a head vector."""
    m = 1.0 - 1.0 / n
    neg = np.minimum(psi, 0.0)
    ap = -alpha * neg
    u = np.power(ap, n)
    one_plus = 1.0 + u
    se = np.power(one_plus, -m)
    theta = tr + (ts - tr) * se

    with np.errstate(divide="ignore", invalid="ignore"):
        cap = (ts - tr) * m * n * alpha * np.where(ap > 0.0, u / ap, 0.0) * np.power(
            one_plus, -(m + 1.0)
        )
    cap = np.where(psi >= 0.0, C_SAT, cap)

    frac = u / one_plus
    inner = 1.0 - np.power(frac, m)
    k = Ks * np.sqrt(se) * inner * inner
    k = np.where(psi >= 0.0, Ks, k)

    sat = psi >= _PSI_SAT_EPS
    frac_safe = np.clip(frac, 1e-300, 1.0)
    se_safe = np.clip(se, 1e-300, 1.0)
    dse = m * n * alpha * np.where(ap > 0.0, u / ap, 0.0) * np.power(one_plus, -(m + 1.0))
    da = np.power(frac_safe, m - 1.0) * np.power(se_safe, 1.0 / m - 1.0)
    dk = Ks * (inner * inner / (2.0 * np.sqrt(se_safe)) + 2.0 * np.sqrt(se_safe) * inner * da)
    dk = np.where(sat, 0.0, dk * dse)
    return theta, cap, k, dk


def _stress(psi, psi1, psi2, psi3, psi4):
    rho = np.zeros_like(psi)
    wet = (psi > psi2) & (psi < psi1)
    rho = np.where(wet, (psi1 - psi) / (psi1 - psi2), rho)
    rho = np.where((psi <= psi2) & (psi >= psi3), 1.0, rho)
    dry = (psi < psi3) & (psi > psi4)
    rho = np.where(dry, (psi - psi4) / (psi3 - psi4), rho)
    return rho


def _thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system in place; returns the solution vector."""
    nx = diag.shape[0]
    cp = np.empty(nx)
    dp = np.empty(nx)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, nx):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom if i < nx - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.empty(nx)
    x[nx - 1] = dp[nx - 1]
    for i in range(nx - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _newton_step(psi_prev, theta_prev, h, params, dz, q_top, sink, bottom_sealed, tol, max_iter):
    """One backward-Euler step of size h. Returns (psi, theta, ok, resnorm)."""
    Ks, ts, tr, alpha, n = params
    nx = psi_prev.shape[0]
    psi = psi_prev.copy()
    resnorm = np.inf
    for _ in range(max_iter):
        theta, cap, k, dk = _vg_all(psi, Ks, ts, tr, alpha, n)
        g = 1.0 - (psi[1:] - psi[:-1]) / dz
        k_half = 0.5 * (k[:-1] + k[1:])
        q = k_half * g
        q_bot = 0.0 if bottom_sealed else k[nx - 1]
        dq_bot = 0.0 if bottom_sealed else dk[nx - 1]

        res = (theta - theta_prev) * dz / h + sink * dz
        res[0] += -q_top + q[0]
        res[1:-1] += -q[:-1] + q[1:]
        res[nx - 1] += -q[nx - 2] + q_bot

        lower = np.zeros(nx)
        diag = np.zeros(nx)
        upper = np.zeros(nx)
        # interface j couples nodes j and j+1
        dq_dup = 0.5 * dk[:-1] * g + k_half / dz    # d q_j / d psi_j
        dq_dlo = 0.5 * dk[1:] * g - k_half / dz     # d q_j / d psi_{j+1}
        diag[:] = cap * dz / h
        diag[:-1] += dq_dup
        diag[1:] += -dq_dlo
        diag[nx - 1] += dq_bot
        upper[:-1] = dq_dlo
        lower[1:] = -dq_dup

        if not np.all(np.isfinite(res)):
            return psi, theta, False, np.inf
        delta = _thomas(lower, diag, upper, -res)
        np.clip(delta, -_MAX_NEWTON_STEP, _MAX_NEWTON_STEP, out=delta)
        psi = psi + delta
        resnorm = float(np.max(np.abs(delta)))
        if not np.isfinite(resnorm):
            return psi, theta, False, np.inf
        if resnorm <= tol:
            theta, _, _, _ = _vg_all(psi, Ks, ts, tr, alpha, n)
            return psi, theta, True, resnorm
    return psi, theta, False, resnorm


def day_step(
    psi0,
    params,
    dz,
    n_steps,
    dt,
    supply,
    ev_pot,
    base_sink,
    feddes,
    ev_ramp_start,
    ev_ramp_end,
    top_sealed,
    bottom_sealed,
    tol,
    max_iter,
    max_halvings,
):
    """Advance one day (n_steps implicit steps of dt seconds).

    Returns (psi_final, fluxes, status, fail_step, fail_resnorm) where
    fluxes = (water_in, runoff, evaporation, drainage, uptake) in metres.
    """
    Ks = params[0]
    psi = np.array(psi0, dtype=float)
    psi1, psi2, psi3, psi4 = feddes
    acc = np.zeros(5)  # water_in, runoff, evaporation, drainage, uptake

    def attempt(psi_in, h, depth):
        theta_prev = _vg_all(psi_in, *params)[0]
        # explicit surface flux and sink, frozen over this (sub)step
        if top_sealed:
            q_top = 0.0
            ev_eff = 0.0
            runoff_rate = 0.0
            supply_rate = 0.0
        else:
            supply_rate = supply
            if ev_ramp_start == ev_ramp_end:
                ramp = 1.0 if psi_in[0] >= ev_ramp_end else 0.0
            else:
                ramp = min(1.0, max(0.0, (psi_in[0] - ev_ramp_end) / (ev_ramp_start - ev_ramp_end)))
            ev_eff = ev_pot * ramp
            net = supply_rate - ev_eff
            if net > 0.0:
                cap_rate = Ks * (1.0 - 2.0 * min(psi_in[0], 0.0) / dz)
                q_top = min(net, cap_rate)
                runoff_rate = net - q_top
            else:
                q_top = net
                runoff_rate = 0.0
        sink = base_sink * _stress(psi_in, psi1, psi2, psi3, psi4)

        psi_out, theta_out, ok, resnorm = _newton_step(
            psi_in, theta_prev, h, params, dz, q_top, sink, bottom_sealed, tol, max_iter
        )
        if ok:
            q_bot = 0.0 if bottom_sealed else _vg_all(psi_out, *params)[2][-1]
            acc[0] += supply_rate * h
            acc[1] += runoff_rate * h
            acc[2] += ev_eff * h
            acc[3] += q_bot * h
            acc[4] += float(np.sum(sink)) * dz * h
            return psi_out, True, resnorm
        if depth < max_halvings:
            mid, ok1, r1 = attempt(psi_in, h / 2.0, depth + 1)
            if not ok1:
                return mid, False, r1
            out, ok2, r2 = attempt(mid, h / 2.0, depth + 1)
            return out, ok2, r2
        return psi_out, False, resnorm

    for step in range(n_steps):
        psi, ok, resnorm = attempt(psi, float(dt), 0)
        if not ok:
            status = STATUS_NON_FINITE if not np.isfinite(resnorm) else STATUS_NO_CONVERGENCE
            return psi, tuple(acc), status, step, resnorm
    return psi, tuple(acc), STATUS_OK, -1, 0.0
