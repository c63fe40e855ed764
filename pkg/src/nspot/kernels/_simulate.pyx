# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Sequential exceedance simulator with autoregressive lag feedback."""

from libc.math cimport exp, log, expm1, fabs

cdef double XI_EPS = 1e-8


def simulate_path(int kind, double u,
                  const double[:, ::1] eta_exo,
                  const double[:, ::1] lag_coef,
                  const double[::1] lag_mu,
                  const double[::1] lag_sd,
                  const double[::1] pool,
                  const long[::1] pool_offsets,
                  const double[::1] fallback,
                  const double[::1] u_event,
                  const double[::1] u_gpd,
                  const double[::1] u_pool,
                  double[::1] state,
                  long traj_start,
                  double[::1] out,
                  unsigned char[::1] exceeded):
    """Advance the chain ``len(out)`` steps; returns ``(status, step)``.

    status 0 = ok, 1 = invalid link (Model II constraint), 2 = empty pool.
    ``state`` holds the most recent emitted values, newest first, and is
    updated in place so long runs can be processed in chunks.
    """
    cdef Py_ssize_t N = out.shape[0], n_traj = eta_exo.shape[0]
    cdef Py_ssize_t nblk = eta_exo.shape[1], L = lag_mu.shape[0]
    cdef Py_ssize_t t, j, b, row, lo, hi, pick
    cdef bint per_row = pool_offsets.shape[0] > 0
    cdef double e0, e1, e2, e3, z, rho, sigma, xi, v, x, eg, q
    cdef double lin[4]
    cdef int status = 0
    cdef Py_ssize_t fail_step = -1
    with nogil:
        for t in range(N):
            row = (traj_start + t) % n_traj
            for b in range(nblk):
                lin[b] = eta_exo[row, b]
            for j in range(L):
                z = (state[j] - lag_mu[j]) / lag_sd[j]
                for b in range(nblk):
                    lin[b] += lag_coef[b, j] * z
            if kind == 1:
                rho = 1.0 / (1.0 + exp(-lin[2]))
            else:
                rho = 1.0 / (1.0 + exp(-lin[3]))
            if rho > u_event[t]:
                if kind == 1:
                    sigma = exp(lin[0])
                    xi = lin[1]
                else:
                    v = lin[0] + u * lin[1]
                    if v <= 0.0:
                        status = 1
                        fail_step = t
                        break
                    eg = exp(lin[2])
                    sigma = v * eg
                    xi = lin[1] * eg
                q = u_gpd[t]
                if fabs(xi) < XI_EPS:
                    x = -sigma * log(q)
                else:
                    x = sigma * expm1(-xi * log(q)) / xi
                x = u + x
                exceeded[t] = 1
            else:
                if per_row:
                    lo = pool_offsets[row]
                    hi = pool_offsets[row + 1]
                    if hi > lo:
                        pick = lo + <Py_ssize_t>(u_pool[t] * (hi - lo))
                        if pick >= hi:
                            pick = hi - 1
                        x = pool[pick]
                    else:
                        x = fallback[row]
                else:
                    hi = pool.shape[0]
                    if hi == 0:
                        status = 2
                        fail_step = t
                        break
                    pick = <Py_ssize_t>(u_pool[t] * hi)
                    if pick >= hi:
                        pick = hi - 1
                    x = pool[pick]
                exceeded[t] = 0
            out[t] = x
            for j in range(L - 1, 0, -1):
                state[j] = state[j - 1]
            if L > 0:
                state[0] = x
    return status, fail_step
