/*
 * Blocked log-likelihood loops for the covariate GPD models.
 *
 * Design matrices arrive transposed (p x n, row-major) so each covariate is a
 * contiguous column and the linear-predictor pass is a sequence of axpy
 * updates. The transcendental loops are written so GCC can map exp/log1p
 * onto glibc's vector math library; this file is compiled with -ffast-math,
 * so it never tests for inf/nan itself. Invalid rows are counted instead
 * and the caller turns a nonzero count into -inf.
 *
 * Summation order is fixed: a SIMD reduction inside each block of
 * NSPOT_BLOCK rows, then blocks are accumulated in order.
 */
#ifndef NSPOT_LOGLIK_CORE_H
#define NSPOT_LOGLIK_CORE_H

#include <math.h>

#define NSPOT_BLOCK 256
#define NSPOT_XI_EPS 1e-8
#define NSPOT_EXP_GUARD 700.0

typedef long nspot_idx;

static inline void nspot_linpred(const double *CT, nspot_idx p, nspot_idx n,
                                 nspot_idx t0, nspot_idx nb, const double *w,
                                 double *buf)
{
    const double *col = CT + t0;
    const double w0 = w[0];
    for (nspot_idx t = 0; t < nb; t++)
        buf[t] = col[t] * w0;
    for (nspot_idx j = 1; j < p; j++) {
        const double wj = w[j];
        if (wj == 0.0)
            continue;
        col = CT + j * n + t0;
        for (nspot_idx t = 0; t < nb; t++)
            buf[t] += col[t] * wj;
    }
}

/*
 * sum_t softplus(r . c_t). When grad is not NULL it also receives
 * sum_t expit(r . c_t) c_t, computed in the same pass.
 */
static double nspot_softplus_total(const double *CT, nspot_idx p, nspot_idx n,
                                   const double *r, double *grad)
{
    double buf[NSPOT_BLOCK];
    double total = 0.0;
    if (grad)
        for (nspot_idx j = 0; j < p; j++)
            grad[j] = 0.0;
    for (nspot_idx t0 = 0; t0 < n; t0 += NSPOT_BLOCK) {
        nspot_idx nb = n - t0 < NSPOT_BLOCK ? n - t0 : NSPOT_BLOCK;
        nspot_linpred(CT, p, n, t0, nb, r, buf);
        double acc = 0.0;
        if (!grad) {
#pragma omp simd reduction(+:acc)
            for (nspot_idx t = 0; t < nb; t++) {
                const double e = buf[t];
                acc += fmax(e, 0.0) + log1p(exp(-fabs(e)));
            }
        } else {
#pragma omp simd reduction(+:acc)
            for (nspot_idx t = 0; t < nb; t++) {
                const double e = buf[t];
                const double x = exp(-fabs(e));
                acc += fmax(e, 0.0) + log1p(x);
                buf[t] = (e >= 0.0 ? 1.0 : x) / (1.0 + x);
            }
            for (nspot_idx j = 0; j < p; j++) {
                const double *col = CT + j * n + t0;
                double gj = 0.0;
#pragma omp simd reduction(+:gj)
                for (nspot_idx t = 0; t < nb; t++)
                    gj += col[t] * buf[t];
                grad[j] += gj;
            }
        }
        total += acc;
    }
    return total;
}

/* Model I exceedance terms: log sigma = s.c, xi = k.c */
static double nspot_excess_model1(const double *CeT, nspot_idx p, nspot_idx ne,
                                  const double *ye, const double *s,
                                  const double *k, long *nbad)
{
    double ls[NSPOT_BLOCK], xi[NSPOT_BLOCK];
    double total = 0.0;
    long bad = 0;
    for (nspot_idx t0 = 0; t0 < ne; t0 += NSPOT_BLOCK) {
        nspot_idx nb = ne - t0 < NSPOT_BLOCK ? ne - t0 : NSPOT_BLOCK;
        nspot_linpred(CeT, p, ne, t0, nb, s, ls);
        nspot_linpred(CeT, p, ne, t0, nb, k, xi);
        const double *y = ye + t0;
        double acc = 0.0;
        long b = 0;
#pragma omp simd reduction(+:acc) reduction(+:b)
        for (nspot_idx t = 0; t < nb; t++) {
            const double l = ls[t];
            const double x = xi[t];
            const int out_of_range = (l < -NSPOT_EXP_GUARD) | (l > NSPOT_EXP_GUARD);
            const double lc = out_of_range ? 0.0 : l;
            const double z = y[t] * exp(-lc);
            const double w = x * z;
            const int small = fabs(x) < NSPOT_XI_EPS;
            const int outside = (!small) & (w <= -1.0);
            const double xs = small ? 1.0 : x;
            const double lg = log1p(outside ? 0.0 : w);
            const double term = small ? -lc - z : -lc - (1.0 + 1.0 / xs) * lg;
            acc += term;
            b += out_of_range | outside;
        }
        total += acc;
        bad += b;
    }
    *nbad += bad;
    return total;
}

/* Model II constraint over all rows: count rows with (a + u b) . c <= 0 */
static long nspot_constraint_violations(const double *CT, nspot_idx p, nspot_idx n,
                                        const double *w)
{
    double buf[NSPOT_BLOCK];
    long bad = 0;
    for (nspot_idx t0 = 0; t0 < n; t0 += NSPOT_BLOCK) {
        nspot_idx nb = n - t0 < NSPOT_BLOCK ? n - t0 : NSPOT_BLOCK;
        nspot_linpred(CT, p, n, t0, nb, w, buf);
        long b = 0;
#pragma omp simd reduction(+:b)
        for (nspot_idx t = 0; t < nb; t++)
            b += buf[t] <= 0.0;
        bad += b;
    }
    return bad;
}

/* min_t w . c_t over all rows */
static double nspot_min_linear(const double *CT, nspot_idx p, nspot_idx n, const double *w)
{
    double buf[NSPOT_BLOCK];
    double lo = INFINITY;
    for (nspot_idx t0 = 0; t0 < n; t0 += NSPOT_BLOCK) {
        nspot_idx nb = n - t0 < NSPOT_BLOCK ? n - t0 : NSPOT_BLOCK;
        nspot_linpred(CT, p, n, t0, nb, w, buf);
        double b = lo;
#pragma omp simd reduction(min:b)
        for (nspot_idx t = 0; t < nb; t++)
            b = fmin(b, buf[t]);
        lo = b;
    }
    return lo;
}

/*
 * Model II exceedance terms with v = alpha + u beta:
 *   log sigma = log v + gamma,  xi = beta e^gamma,  xi y / sigma = beta y / v
 */
static double nspot_excess_model2(const double *CeT, nspot_idx p, nspot_idx ne,
                                  const double *ye, const double *w,
                                  const double *b, const double *g, long *nbad)
{
    double vb[NSPOT_BLOCK], bb[NSPOT_BLOCK], gb[NSPOT_BLOCK];
    double total = 0.0;
    long bad = 0;
    for (nspot_idx t0 = 0; t0 < ne; t0 += NSPOT_BLOCK) {
        nspot_idx nb = ne - t0 < NSPOT_BLOCK ? ne - t0 : NSPOT_BLOCK;
        nspot_linpred(CeT, p, ne, t0, nb, w, vb);
        nspot_linpred(CeT, p, ne, t0, nb, b, bb);
        nspot_linpred(CeT, p, ne, t0, nb, g, gb);
        const double *y = ye + t0;
        double acc = 0.0;
        long nbd = 0;
#pragma omp simd reduction(+:acc) reduction(+:nbd)
        for (nspot_idx t = 0; t < nb; t++) {
            const double v = vb[t];
            const double gam = gb[t];
            const int out_of_range = (v <= 0.0) | (gam < -NSPOT_EXP_GUARD) | (gam > NSPOT_EXP_GUARD);
            const double vs = out_of_range ? 1.0 : v;
            const double gs = out_of_range ? 0.0 : gam;
            const double eg = exp(gs);
            const double x = bb[t] * eg;
            const double logsig = log(vs) + gs;
            const double z = y[t] / (vs * eg);
            const double wz = bb[t] * y[t] / vs;
            const int small = fabs(x) < NSPOT_XI_EPS;
            const int outside = (!small) & (wz <= -1.0);
            const double xs = small ? 1.0 : x;
            const double lg = log1p(outside ? 0.0 : wz);
            const double term = small ? -logsig - z : -logsig - (1.0 + 1.0 / xs) * lg;
            acc += term;
            nbd += out_of_range | outside;
        }
        total += acc;
        bad += nbd;
    }
    *nbad += bad;
    return total;
}

#endif
