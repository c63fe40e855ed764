# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log-likelihood kernels.

Built with -ffast-math, so these wrappers return ``(n_invalid, total)`` and
leave every finiteness decision to the pure-Python dispatcher.

The likelihood splits into a rate part (logistic terms in ``r`` over all
rows) and a tail part (GPD terms over exceedances, plus the Model II
positivity constraint). ``loglik_model*`` return their sum.
"""

from libc.stdlib cimport malloc, free

cdef extern from "_loglik_core.h" nogil:
    double nspot_softplus_total(const double *CT, long p, long n, const double *r, double *grad)
    double nspot_excess_model1(const double *CeT, long p, long ne, const double *ye,
                               const double *s, const double *k, long *nbad)
    long nspot_constraint_violations(const double *CT, long p, long n, const double *w)
    double nspot_min_linear(const double *CT, long p, long n, const double *w)
    double nspot_excess_model2(const double *CeT, long p, long ne, const double *ye,
                               const double *w, const double *b, const double *g, long *nbad)


cdef double _dot(const double[::1] a, const double *b, Py_ssize_t p) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(p):
        acc += a[j] * b[j]
    return acc


cdef double _rate(const double[:, ::1] CT, const double[::1] csum_e, const double *r,
                  double *grad) nogil:
    cdef Py_ssize_t p = CT.shape[0], n = CT.shape[1], j
    cdef double total = _dot(csum_e, r, p)
    if n > 0:
        total -= nspot_softplus_total(&CT[0, 0], p, n, r, grad)
    elif grad != NULL:
        for j in range(p):
            grad[j] = 0.0
    if grad != NULL:
        for j in range(p):
            grad[j] = csum_e[j] - grad[j]
    return total


cdef long _tail2(const double[:, ::1] CT, const double[:, ::1] CeT, const double[::1] ye,
                 const double *th, double u, double *total, bint check=True) nogil:
    cdef Py_ssize_t p = CT.shape[0], n = CT.shape[1], ne = CeT.shape[1], j
    cdef long nbad = 0
    cdef double *wp = <double *> malloc(p * sizeof(double))
    if wp == NULL:
        return -1
    for j in range(p):
        wp[j] = th[j] + u * th[p + j]
    if check and n > 0:
        nbad = nspot_constraint_violations(&CT[0, 0], p, n, wp)
    total[0] = 0.0
    if nbad == 0 and ne > 0:
        total[0] = nspot_excess_model2(&CeT[0, 0], p, ne, &ye[0], wp, th + p, th + 2 * p, &nbad)
    free(wp)
    return nbad


def rate_part(const double[:, ::1] CT, const double[::1] csum_e, const double[::1] r,
              double[::1] grad=None):
    """Rate log-likelihood; fills ``grad`` with its gradient when given."""
    cdef double total
    cdef double *g = NULL
    if grad is not None:
        g = &grad[0]
    with nogil:
        total = _rate(CT, csum_e, &r[0], g)
    return total


def tail_model1(const double[:, ::1] CeT, const double[::1] ye, const double[::1] theta):
    cdef Py_ssize_t p = CeT.shape[0], ne = CeT.shape[1]
    cdef long nbad = 0
    cdef double total = 0.0
    if ne > 0:
        with nogil:
            total = nspot_excess_model1(&CeT[0, 0], p, ne, &ye[0], &theta[0], &theta[p], &nbad)
    return nbad, total


def tail_model2(const double[:, ::1] CT, const double[:, ::1] CeT, const double[::1] ye,
                const double[::1] theta, double u, bint check=True):
    """GPD terms; ``check=False`` skips the all-rows positivity scan."""
    cdef long nbad
    cdef double total = 0.0
    if CT.shape[0] == 0:
        return 0, 0.0
    with nogil:
        nbad = _tail2(CT, CeT, ye, &theta[0], u, &total, check)
    if nbad < 0:
        raise MemoryError()
    return nbad, total


def loglik_model1(const double[:, ::1] CT, const double[:, ::1] CeT,
                  const double[::1] ye, const double[::1] csum_e,
                  const double[::1] theta):
    cdef Py_ssize_t p = CT.shape[0], ne = CeT.shape[1]
    cdef const double *th = &theta[0]
    cdef long nbad = 0
    cdef double total = 0.0
    with nogil:
        total = _rate(CT, csum_e, th + 2 * p, NULL)
        if ne > 0:
            total += nspot_excess_model1(&CeT[0, 0], p, ne, &ye[0], th, th + p, &nbad)
    return nbad, total


def loglik_model2(const double[:, ::1] CT, const double[:, ::1] CeT,
                  const double[::1] ye, const double[::1] csum_e,
                  const double[::1] theta, double u):
    cdef Py_ssize_t p = CT.shape[0]
    cdef const double *th = &theta[0]
    cdef long nbad
    cdef double tail = 0.0, total = 0.0
    if p == 0:
        return 0, 0.0
    with nogil:
        nbad = _tail2(CT, CeT, ye, th, u, &tail)
        if nbad == 0:
            total = _rate(CT, csum_e, th + 3 * p, NULL) + tail
    if nbad < 0:
        raise MemoryError()
    return nbad, total


def min_linear(const double[:, ::1] CT, const double[::1] w):
    """Smallest ``w . c_t`` over the columns of ``CT`` (``inf`` when empty)."""
    cdef double lo
    with nogil:
        lo = nspot_min_linear(&CT[0, 0], CT.shape[0], CT.shape[1], &w[0])
    return lo
