"""Pure-Python (numpy) twins of the compiled kernels.

Signatures and return conventions match ``_loglik`` and ``_simulate``
exactly; the dispatcher in ``nspot.kernels`` picks one set at import time.
"""

import math

import numpy as np

XI_EPS = 1e-8
EXP_GUARD = 700.0


def rate_part(CT, csum_e, r, grad=None):
    total = float(csum_e @ r)
    if CT.shape[1]:
        eta = r @ CT
        x = np.exp(-np.abs(eta))
        total -= float(np.sum(np.maximum(eta, 0.0) + np.log1p(x)))
        if grad is not None:
            grad[:] = csum_e - CT @ (np.where(eta >= 0.0, 1.0, x) / (1.0 + x))
    elif grad is not None:
        grad[:] = csum_e
    return total


def tail_model1(CeT, ye, theta):
    p = CeT.shape[0]
    if not CeT.shape[1]:
        return 0, 0.0
    s, k = theta[:p], theta[p : 2 * p]
    ls = s @ CeT
    xi = k @ CeT
    out_of_range = np.abs(ls) > EXP_GUARD
    lc = np.where(out_of_range, 0.0, ls)
    z = ye * np.exp(-lc)
    w = xi * z
    small = np.abs(xi) < XI_EPS
    outside = ~small & (w <= -1.0)
    xs = np.where(small, 1.0, xi)
    lg = np.log1p(np.where(outside, 0.0, w))
    term = np.where(small, -lc - z, -lc - (1.0 + 1.0 / xs) * lg)
    return int(np.count_nonzero(out_of_range | outside)), float(term.sum())


def min_linear(CT, w):
    return float(np.min(w @ CT)) if CT.shape[1] else math.inf


def tail_model2(CT, CeT, ye, theta, u, check=True):
    p = CT.shape[0]
    if p == 0:
        return 0, 0.0
    a, b, g = theta[:p], theta[p : 2 * p], theta[2 * p : 3 * p]
    w = a + u * b
    if check and CT.shape[1]:
        nbad = int(np.count_nonzero(w @ CT <= 0.0))
        if nbad:
            return nbad, 0.0
    if not CeT.shape[1]:
        return 0, 0.0
    v = w @ CeT
    beta = b @ CeT
    gam = g @ CeT
    out_of_range = (v <= 0.0) | (np.abs(gam) > EXP_GUARD)
    vs = np.where(out_of_range, 1.0, v)
    gs = np.where(out_of_range, 0.0, gam)
    eg = np.exp(gs)
    xi = beta * eg
    logsig = np.log(vs) + gs
    z = ye / (vs * eg)
    wz = beta * ye / vs
    small = np.abs(xi) < XI_EPS
    outside = ~small & (wz <= -1.0)
    xs = np.where(small, 1.0, xi)
    lg = np.log1p(np.where(outside, 0.0, wz))
    term = np.where(small, -logsig - z, -logsig - (1.0 + 1.0 / xs) * lg)
    return int(np.count_nonzero(out_of_range | outside)), float(term.sum())


def loglik_model1(CT, CeT, ye, csum_e, theta):
    p = CT.shape[0]
    nbad, tail = tail_model1(CeT, ye, theta)
    return nbad, rate_part(CT, csum_e, theta[2 * p : 3 * p]) + tail


def loglik_model2(CT, CeT, ye, csum_e, theta, u):
    p = CT.shape[0]
    nbad, tail = tail_model2(CT, CeT, ye, theta, u)
    if nbad or p == 0:
        return nbad, 0.0
    return 0, rate_part(CT, csum_e, theta[3 * p : 4 * p]) + tail


def simulate_path(kind, u, eta_exo, lag_coef, lag_mu, lag_sd, pool, pool_offsets,
                  fallback, u_event, u_gpd, u_pool, state, traj_start, out, exceeded):
    N = out.shape[0]
    n_traj, nblk = eta_exo.shape
    L = lag_mu.shape[0]
    per_row = pool_offsets.shape[0] > 0
    exo = eta_exo.tolist()
    coef = lag_coef.tolist()
    mu = lag_mu.tolist()
    sd = lag_sd.tolist()
    offsets = pool_offsets.tolist() if per_row else None
    pool_list = pool.tolist()
    fb = fallback.tolist()
    ue, ug, up = u_event.tolist(), u_gpd.tolist(), u_pool.tolist()
    st = state.tolist()
    rho_idx = 2 if kind == 1 else 3
    exp, log, expm1 = math.exp, math.log, math.expm1
    values = [0.0] * N
    flags = [0] * N
    status, fail_step = 0, -1
    for t in range(N):
        row = (traj_start + t) % n_traj
        lin = list(exo[row])
        for j in range(L):
            z = (st[j] - mu[j]) / sd[j]
            for bi in range(nblk):
                lin[bi] += coef[bi][j] * z
        eta = lin[rho_idx]
        rho = 1.0 / (1.0 + exp(-eta)) if eta > -700 else 0.0
        if rho > ue[t]:
            if kind == 1:
                sigma = exp(lin[0])
                xi = lin[1]
            else:
                v = lin[0] + u * lin[1]
                if v <= 0.0:
                    status, fail_step = 1, t
                    break
                eg = exp(lin[2])
                sigma = v * eg
                xi = lin[1] * eg
            q = ug[t]
            if abs(xi) < XI_EPS:
                x = -sigma * log(q)
            else:
                x = sigma * expm1(-xi * log(q)) / xi
            x += u
            flags[t] = 1
        else:
            if per_row:
                lo, hi = offsets[row], offsets[row + 1]
                if hi > lo:
                    pick = min(lo + int(up[t] * (hi - lo)), hi - 1)
                    x = pool_list[pick]
                else:
                    x = fb[row]
            else:
                hi = len(pool_list)
                if hi == 0:
                    status, fail_step = 2, t
                    break
                x = pool_list[min(int(up[t] * hi), hi - 1)]
        values[t] = x
        if L:
            st.insert(0, x)
            st.pop()
    out[:] = values
    exceeded[:] = flags
    state[:] = st
    return status, fail_step
