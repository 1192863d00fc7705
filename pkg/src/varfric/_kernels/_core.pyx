# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled step kernels, signature-compatible with the pure-NumPy backend
in ``_py``.  Only closed-form catalog fields (kernel_id >= 0) are supported
here; callable fields stay in ``_py``.

Noise arrays are noise-major, shape (n_steps, P, d): the time loop is the
outer loop and the path loop the inner one, so the serial per-path update
chains of independent paths overlap in the pipeline and the per-step noise
slice is contiguous.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, cosh, exp, expm1, fabs, floor, isfinite, sin, sqrt, tanh

cdef double BLOWUP = 1e8
cdef double TWO_PI = 6.283185307179586476925286766559

DEF MAXD = 8


# sin/cos of 2*pi*x via range reduction and a degree-19 odd Taylor core on
# |r| <= 1/4 (|err| < 1e-12 over |x| < 1e3, dominated by reduction ulp).
# The Python backend evaluates the same Horner form; results agree with
# the compiled backend to a few ulps (FMA contraction differs).
cdef inline double c_sin2pi(double x) noexcept nogil:
    cdef double r = x - floor(x + 0.5)
    if r > 0.25:
        r = 0.5 - r
    elif r < -0.25:
        r = -0.5 - r
    cdef double w = r * r
    cdef double acc = -0.012031585942120619
    acc = acc * w + 0.10422916220813978
    acc = acc * w + -0.7181223017785001
    acc = acc * w + 3.8199525848482803
    acc = acc * w + -15.094642576822984
    acc = acc * w + 42.058693944897634
    acc = acc * w + -76.70585975306136
    acc = acc * w + 81.60524927607504
    acc = acc * w + -41.341702240399755
    acc = acc * w + 6.283185307179586
    return r * acc


cdef inline double c_cos2pi(double x) noexcept nogil:
    return c_sin2pi(x + 0.25)


cdef inline double c_lam(int kid, const double* par, const double* q, int d) noexcept nogil:
    cdef double acc = 0.0
    cdef double x
    cdef int j
    if kid == 0:
        return par[0]
    if kid == 1:
        for j in range(d):
            acc += par[2 + j] * q[j]
        return par[0] + par[1] * c_sin2pi(acc)
    if kid == 2:
        return par[0] + (par[1] - par[0]) * 0.5 * (1.0 + tanh(q[0] / par[2]))
    # kid == 3: clipped linear in the first coordinate
    x = q[0]
    if x > par[2]:
        x = par[2]
    elif x < -par[2]:
        x = -par[2]
    return par[0] + par[1] * x


cdef inline void c_lam_grad(int kid, const double* par, const double* q, int d,
                            double* g) noexcept nogil:
    cdef double acc = 0.0
    cdef double c
    cdef int j
    for j in range(d):
        g[j] = 0.0
    if kid == 1:
        for j in range(d):
            acc += par[2 + j] * q[j]
        c = TWO_PI * par[1] * c_cos2pi(acc)
        for j in range(d):
            g[j] = c * par[2 + j]
    elif kid == 2:
        c = cosh(q[0] / par[2])
        g[0] = (par[1] - par[0]) * 0.5 / (par[2] * c * c)
    elif kid == 3:
        if fabs(q[0]) <= par[2]:
            g[0] = par[1]


cdef inline double c_lam_with_grad(int kid, const double* par, const double* q,
                                   int d, double* g) noexcept nogil:
    """Fused value + gradient.  For the sinusoidal field the sin and cos
    Horner recurrences are interleaved so their latency chains overlap."""
    cdef double acc = 0.0
    cdef double rs, rc, ws, wc, hs, hc, cj
    cdef int j
    if kid != 1:
        c_lam_grad(kid, par, q, d, g)
        return c_lam(kid, par, q, d)
    for j in range(d):
        acc += par[2 + j] * q[j]
    rs = acc - floor(acc + 0.5)
    if rs > 0.25:
        rs = 0.5 - rs
    elif rs < -0.25:
        rs = -0.5 - rs
    rc = acc + 0.25
    rc = rc - floor(rc + 0.5)
    if rc > 0.25:
        rc = 0.5 - rc
    elif rc < -0.25:
        rc = -0.5 - rc
    ws = rs * rs
    wc = rc * rc
    hs = -0.012031585942120619
    hc = -0.012031585942120619
    hs = hs * ws + 0.10422916220813978
    hc = hc * wc + 0.10422916220813978
    hs = hs * ws - 0.7181223017785001
    hc = hc * wc - 0.7181223017785001
    hs = hs * ws + 3.8199525848482803
    hc = hc * wc + 3.8199525848482803
    hs = hs * ws - 15.094642576822984
    hc = hc * wc - 15.094642576822984
    hs = hs * ws + 42.058693944897634
    hc = hc * wc + 42.058693944897634
    hs = hs * ws - 76.70585975306136
    hc = hc * wc - 76.70585975306136
    hs = hs * ws + 81.60524927607504
    hc = hc * wc + 81.60524927607504
    hs = hs * ws - 41.341702240399755
    hc = hc * wc - 41.341702240399755
    hs = hs * ws + 6.283185307179586
    hc = hc * wc + 6.283185307179586
    cj = TWO_PI * par[1] * (rc * hc)
    for j in range(d):
        g[j] = cj * par[2 + j]
    return par[0] + par[1] * (rs * hs)


cdef inline void c_b(int bid, const double* par, const double* q, int d,
                     double* out) noexcept nogil:
    cdef int j
    if bid == 1:
        for j in range(d):
            out[j] = par[j]
    else:
        for j in range(d):
            out[j] = 0.0


cdef inline bint blown(const double* q, int d) noexcept nogil:
    cdef int j
    for j in range(d):
        if not isfinite(q[j]) or fabs(q[j]) > BLOWUP:
            return True
    return False


cdef inline double x_minus_f1(double x, double F1) noexcept nogil:
    """x - (1 - e^-x), series-protected for small x."""
    if x < 1e-3:
        return x * x * (0.5 - x / 6.0 + x * x / 24.0)
    return x - F1


cdef inline double cond_bracket(double x, double F1, double F2) noexcept nogil:
    """F2/2 - F1^2/x, the conditional-residual bracket; series for small x."""
    cdef double g
    if x < 1e-2:
        return x * x * x * (1.0 / 12.0 - x / 12.0 + 17.0 * x * x / 360.0)
    g = 0.5 * F2 - F1 * F1 / x
    return g if g > 0.0 else 0.0


def ou_pair_chunk(lam, bf, double sigma, double mu, double h,
                  double[:, ::1] q, double[:, ::1] p,
                  double[:, :, ::1] dW, double[:, :, ::1] z2,
                  qout=None, pout=None):
    cdef int kid = lam[0]
    cdef int bid = bf[0]
    cdef double[::1] lpar = np.ascontiguousarray(lam[1], dtype=np.float64)
    cdef double[::1] bpar = np.ascontiguousarray(bf[1], dtype=np.float64)
    cdef double[:, :, ::1] qo = qout
    cdef double[:, :, ::1] po = pout
    cdef bint store = qout is not None
    cdef Py_ssize_t n_steps = dW.shape[0], P = q.shape[0]
    cdef int d = <int>q.shape[1]
    cdef Py_ssize_t i, n
    cdef int j
    cdef double lv, kappa, x, E, F1, F2, xi, pbar, dp
    cdef double m0, m1, m2, m3, m4, m5
    cdef double bv[MAXD]
    # per-path cache of the frozen-coefficient moments, keyed on lam(q)
    cdef double[::1] lv_last = np.full(P, -1.0)
    cdef double[:, ::1] mom = np.empty((P, 6))
    cdef Py_ssize_t fail = -1
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernels")
    with nogil:
        if store:
            for i in range(P):
                for j in range(d):
                    qo[i, 0, j] = q[i, j]
                    po[i, 0, j] = p[i, j]
        for n in range(n_steps):
            for i in range(P):
                lv = c_lam(kid, &lpar[0], &q[i, 0], d)
                c_b(bid, &bpar[0], &q[i, 0], d, bv)
                if lv != lv_last[i]:
                    lv_last[i] = lv
                    kappa = lv / mu
                    x = kappa * h
                    E = exp(-x)
                    F1 = -expm1(-x)
                    F2 = F1 * (1.0 + E)
                    mom[i, 0] = E
                    mom[i, 1] = F1 / kappa                          # int_decay
                    mom[i, 2] = (sigma / lv) * x_minus_f1(x, F1) / x     # cqw_h
                    mom[i, 3] = (sigma / lv) * F1 / h                    # cpw_h
                    mom[i, 4] = (sigma / lv) * sqrt(cond_bracket(x, F1, F2) / kappa)
                    mom[i, 5] = kappa
                m0 = mom[i, 0]
                m1 = mom[i, 1]
                m2 = mom[i, 2]
                m3 = mom[i, 3]
                m4 = mom[i, 4]
                m5 = mom[i, 5]
                for j in range(d):
                    pbar = bv[j] / lv
                    dp = p[i, j] - pbar
                    q[i, j] += pbar * h + dp * m1
                    p[i, j] = pbar + dp * m0
                    if sigma > 0.0:
                        xi = m4 * z2[n, i, j]
                        q[i, j] += m2 * dW[n, i, j] + xi
                        p[i, j] += m3 * dW[n, i, j] - m5 * xi
                if blown(&q[i, 0], d):
                    fail = n
                    break
                if store:
                    for j in range(d):
                        qo[i, n + 1, j] = q[i, j]
                        po[i, n + 1, j] = p[i, j]
            if fail >= 0:
                break
    return fail


def expeuler_chunk(lam, bf, double sigma, double mu, double h,
                   double[:, ::1] q, double[:, ::1] p,
                   double[:, :, ::1] wdot, qout=None, pout=None):
    cdef int kid = lam[0]
    cdef int bid = bf[0]
    cdef double[::1] lpar = np.ascontiguousarray(lam[1], dtype=np.float64)
    cdef double[::1] bpar = np.ascontiguousarray(bf[1], dtype=np.float64)
    cdef double[:, :, ::1] qo = qout
    cdef double[:, :, ::1] po = pout
    cdef bint store = qout is not None
    cdef Py_ssize_t n_steps = wdot.shape[0], P = q.shape[0]
    cdef int d = <int>q.shape[1]
    cdef Py_ssize_t i, n
    cdef int j
    cdef double lv, E, f, p_new
    cdef double bv[MAXD]
    cdef Py_ssize_t fail = -1
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernels")
    with nogil:
        if store:
            for i in range(P):
                for j in range(d):
                    qo[i, 0, j] = q[i, j]
                    po[i, 0, j] = p[i, j]
        for n in range(n_steps):
            for i in range(P):
                lv = c_lam(kid, &lpar[0], &q[i, 0], d)
                c_b(bid, &bpar[0], &q[i, 0], d, bv)
                E = exp(-lv * h / mu)
                for j in range(d):
                    f = (bv[j] + sigma * wdot[n, i, j]) / lv
                    p_new = f + (p[i, j] - f) * E
                    q[i, j] += 0.5 * h * (p[i, j] + p_new)
                    p[i, j] = p_new
                if blown(&q[i, 0], d):
                    fail = n
                    break
                if store:
                    for j in range(d):
                        qo[i, n + 1, j] = q[i, j]
                        po[i, n + 1, j] = p[i, j]
            if fail >= 0:
                break
    return fail


cdef inline void ode_rhs(int kid, const double* lpar, int bid, const double* bpar,
                         double sigma, const double* qq, const double* wd,
                         int d, double* out) noexcept nogil:
    cdef double lv = c_lam(kid, lpar, qq, d)
    cdef double bv[MAXD]
    cdef int j
    c_b(bid, bpar, qq, d, bv)
    for j in range(d):
        out[j] = (bv[j] + sigma * wd[j]) / lv


def rk4_chunk(lam, bf, double sigma, double h, double[:, ::1] q,
              double[:, :, ::1] wdot_half, qout=None):
    cdef int kid = lam[0]
    cdef int bid = bf[0]
    cdef double[::1] lpar = np.ascontiguousarray(lam[1], dtype=np.float64)
    cdef double[::1] bpar = np.ascontiguousarray(bf[1], dtype=np.float64)
    cdef double[:, :, ::1] qo = qout
    cdef bint store = qout is not None
    cdef Py_ssize_t n_steps = (wdot_half.shape[0] - 1) // 2, P = q.shape[0]
    cdef int d = <int>q.shape[1]
    cdef Py_ssize_t i, n
    cdef int j
    cdef double k1[MAXD]
    cdef double k2[MAXD]
    cdef double k3[MAXD]
    cdef double k4[MAXD]
    cdef double tmp[MAXD]
    cdef Py_ssize_t fail = -1
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernels")
    with nogil:
        if store:
            for i in range(P):
                for j in range(d):
                    qo[i, 0, j] = q[i, j]
        for n in range(n_steps):
            for i in range(P):
                ode_rhs(kid, &lpar[0], bid, &bpar[0], sigma, &q[i, 0],
                        &wdot_half[2 * n, i, 0], d, k1)
                for j in range(d):
                    tmp[j] = q[i, j] + 0.5 * h * k1[j]
                ode_rhs(kid, &lpar[0], bid, &bpar[0], sigma, tmp,
                        &wdot_half[2 * n + 1, i, 0], d, k2)
                for j in range(d):
                    tmp[j] = q[i, j] + 0.5 * h * k2[j]
                ode_rhs(kid, &lpar[0], bid, &bpar[0], sigma, tmp,
                        &wdot_half[2 * n + 1, i, 0], d, k3)
                for j in range(d):
                    tmp[j] = q[i, j] + h * k3[j]
                ode_rhs(kid, &lpar[0], bid, &bpar[0], sigma, tmp,
                        &wdot_half[2 * n + 2, i, 0], d, k4)
                for j in range(d):
                    q[i, j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                if blown(&q[i, 0], d):
                    fail = n
                    break
                if store:
                    for j in range(d):
                        qo[i, n + 1, j] = q[i, j]
            if fail >= 0:
                break
    return fail


def em_chunk(lam, bf, double sigma, double h, double[:, ::1] q,
             double[:, :, ::1] dW, bint include_correction, qout=None):
    cdef int kid = lam[0]
    cdef int bid = bf[0]
    cdef double[::1] lpar = np.ascontiguousarray(lam[1], dtype=np.float64)
    cdef double[::1] bpar = np.ascontiguousarray(bf[1], dtype=np.float64)
    cdef double[:, :, ::1] qo = qout
    cdef bint store = qout is not None
    cdef Py_ssize_t n_steps = dW.shape[0], P = q.shape[0]
    cdef int d = <int>q.shape[1]
    cdef Py_ssize_t i, n
    cdef int j
    cdef double lv, r, half_s2h
    cdef double bv[MAXD]
    cdef double gv[MAXD]
    cdef Py_ssize_t fail = -1
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernels")
    half_s2h = 0.5 * sigma * sigma * h
    with nogil:
        if store:
            for i in range(P):
                for j in range(d):
                    qo[i, 0, j] = q[i, j]
        for n in range(n_steps):
            for i in range(P):
                if include_correction:
                    lv = c_lam_with_grad(kid, &lpar[0], &q[i, 0], d, gv)
                else:
                    lv = c_lam(kid, &lpar[0], &q[i, 0], d)
                c_b(bid, &bpar[0], &q[i, 0], d, bv)
                # single reciprocal per step; the drift, correction and noise
                # terms are all multiples of 1/lam or its powers
                r = 1.0 / lv
                for j in range(d):
                    if include_correction:
                        q[i, j] += r * (bv[j] * h - half_s2h * gv[j] * r * r
                                        + sigma * dW[n, i, j])
                    else:
                        q[i, j] += r * (bv[j] * h + sigma * dW[n, i, j])
                if blown(&q[i, 0], d):
                    fail = n
                    break
                if store:
                    for j in range(d):
                        qo[i, n + 1, j] = q[i, j]
            if fail >= 0:
                break
    return fail


def heun_chunk(lam, bf, double sigma, double h, double[:, ::1] q,
               double[:, :, ::1] dW, qout=None):
    cdef int kid = lam[0]
    cdef int bid = bf[0]
    cdef double[::1] lpar = np.ascontiguousarray(lam[1], dtype=np.float64)
    cdef double[::1] bpar = np.ascontiguousarray(bf[1], dtype=np.float64)
    cdef double[:, :, ::1] qo = qout
    cdef bint store = qout is not None
    cdef Py_ssize_t n_steps = dW.shape[0], P = q.shape[0]
    cdef int d = <int>q.shape[1]
    cdef Py_ssize_t i, n
    cdef int j
    cdef double lv, ls, g0, g1
    cdef double bv[MAXD]
    cdef double bs[MAXD]
    cdef double qs[MAXD]
    cdef Py_ssize_t fail = -1
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernels")
    with nogil:
        if store:
            for i in range(P):
                for j in range(d):
                    qo[i, 0, j] = q[i, j]
        for n in range(n_steps):
            for i in range(P):
                lv = c_lam(kid, &lpar[0], &q[i, 0], d)
                c_b(bid, &bpar[0], &q[i, 0], d, bv)
                g0 = sigma / lv
                for j in range(d):
                    qs[j] = q[i, j] + (bv[j] / lv) * h + g0 * dW[n, i, j]
                ls = c_lam(kid, &lpar[0], qs, d)
                c_b(bid, &bpar[0], qs, d, bs)
                g1 = sigma / ls
                for j in range(d):
                    q[i, j] += 0.5 * h * (bv[j] / lv + bs[j] / ls) \
                        + 0.5 * (g0 + g1) * dW[n, i, j]
                if blown(&q[i, 0], d):
                    fail = n
                    break
                if store:
                    for j in range(d):
                        qo[i, n + 1, j] = q[i, j]
            if fail >= 0:
                break
    return fail


def decomp_chunk(lam, bf, double sigma, double mu, double h,
                 double[:, ::1] p0, double[:, ::1] q, double[:, ::1] p,
                 double[:, ::1] J, double[:, ::1] K, double[::1] expA,
                 double[:, ::1] alpha, double[:, ::1] beta, double[:, ::1] gamma,
                 double[:, ::1] comp, double[:, ::1] compb,
                 double[:, :, ::1] dW, double[:, :, ::1] z2):
    cdef int kid = lam[0]
    cdef int bid = bf[0]
    cdef double[::1] lpar = np.ascontiguousarray(lam[1], dtype=np.float64)
    cdef double[::1] bpar = np.ascontiguousarray(bf[1], dtype=np.float64)
    cdef Py_ssize_t n_steps = dW.shape[0], P = q.shape[0]
    cdef int d = <int>q.shape[1]
    cdef Py_ssize_t i, n
    cdef int j
    cdef double lv, kappa, x, E, F1, F2, xi, pbar, dp
    cdef double m0, m1, m2, m3, m4, m5
    cdef double J_new, K_new, expA_new
    cdef double bv[MAXD]
    cdef double[::1] lv_last = np.full(P, -1.0)
    cdef double[:, ::1] mom = np.empty((P, 6))
    cdef Py_ssize_t fail = -1
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernels")
    with nogil:
        for n in range(n_steps):
            for i in range(P):
                lv = c_lam(kid, &lpar[0], &q[i, 0], d)
                c_b(bid, &bpar[0], &q[i, 0], d, bv)
                if lv != lv_last[i]:
                    lv_last[i] = lv
                    kappa = lv / mu
                    x = kappa * h
                    E = exp(-x)
                    F1 = -expm1(-x)
                    F2 = F1 * (1.0 + E)
                    mom[i, 0] = E
                    mom[i, 1] = F1 / kappa
                    mom[i, 2] = (sigma / lv) * x_minus_f1(x, F1) / x
                    mom[i, 3] = (sigma / lv) * F1 / h
                    mom[i, 4] = (sigma / lv) * sqrt(cond_bracket(x, F1, F2) / kappa)
                    mom[i, 5] = kappa
                m0 = mom[i, 0]
                m1 = mom[i, 1]
                m2 = mom[i, 2]
                m3 = mom[i, 3]
                m4 = mom[i, 4]
                m5 = mom[i, 5]
                expA_new = m0 * expA[i]
                for j in range(d):
                    J_new = m0 * (J[i, j] + dW[n, i, j])
                    K_new = m0 * (K[i, j] + bv[j] * h)
                    gamma[i, j] += (sigma / mu) * 0.5 * h * (J[i, j] + J_new)
                    beta[i, j] += (1.0 / mu) * 0.5 * h * (K[i, j] + K_new)
                    alpha[i, j] += p0[i, j] * 0.5 * h * (expA[i] + expA_new)
                    comp[i, j] += sigma * dW[n, i, j] / lv
                    compb[i, j] += h * bv[j] / lv
                    J[i, j] = J_new
                    K[i, j] = K_new
                expA[i] = expA_new
                for j in range(d):
                    pbar = bv[j] / lv
                    dp = p[i, j] - pbar
                    q[i, j] += pbar * h + dp * m1
                    p[i, j] = pbar + dp * m0
                    if sigma > 0.0:
                        xi = m4 * z2[n, i, j]
                        q[i, j] += m2 * dW[n, i, j] + xi
                        p[i, j] += m3 * dW[n, i, j] - m5 * xi
                if blown(&q[i, 0], d):
                    fail = n
                    break
            if fail >= 0:
                break
    return fail


def gendiff_chunk(double[::1] p_right, double[::1] tau,
                  Py_ssize_t i_lo, Py_ssize_t i_hi, double t_max,
                  long long[::1] idx, double[::1] t,
                  cnp.uint8_t[::1] done, double[:, ::1] U):
    cdef Py_ssize_t P = idx.shape[0], n_steps = U.shape[1]
    cdef Py_ssize_t i, j
    cdef long long k
    cdef Py_ssize_t n_active = 0
    with nogil:
        for i in range(P):
            if done[i]:
                continue
            for j in range(n_steps):
                k = idx[i]
                t[i] += tau[k]
                if t[i] >= t_max:
                    done[i] = 1
                    break
                if U[i, j] < p_right[k]:
                    idx[i] = k + 1
                else:
                    idx[i] = k - 1
                if idx[i] <= i_lo or idx[i] >= i_hi:
                    done[i] = 1
                    break
            if not done[i]:
                n_active += 1
    return n_active
