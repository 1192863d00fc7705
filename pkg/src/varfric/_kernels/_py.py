"""Pure-NumPy step kernels, vectorized across paths.

Every function here has a signature-compatible compiled twin in ``_core``
(built from Cython).  Fields are passed as descriptors ``(kernel_id,
params, evaluate, gradient)`` — non-negative ids are evaluated by the
closed-form branches below (and by the compiled twin); id -1 falls back to
per-path Python calls and is only available in this backend.

State arrays are updated in place; trajectory buffers, when given, receive
the state after every step (index 0 holds the initial state).  Noise arrays
are noise-major, shape (n_steps, P, d), so each step touches a contiguous
slice.  All steppers return -1 on success or the index of the first step at
which the blow-up guard (|q| > 1e8 or non-finite) tripped.
"""

from __future__ import annotations

import numpy as np

BLOWUP = 1e8

# friction kernel ids
LAM_CONSTANT = 0
LAM_SINUSOIDAL = 1
LAM_TANH_RAMP = 2
LAM_CLIPPED_LINEAR = 3
# drift kernel ids
B_ZERO = 0
B_CONSTANT = 1



# Horner coefficients of the degree-19 odd Taylor core of sin(2*pi*r) on
# |r| <= 1/4; must stay identical to the compiled backend for bit parity.
_SIN2PI_COEF = (6.283185307179586, -41.341702240399755, 81.60524927607504, -76.70585975306136, 42.058693944897634, -15.094642576822984, 3.8199525848482803, -0.7181223017785001, 0.10422916220813978, -0.012031585942120619)


def _sin2pi(x):
    x = np.asarray(x, dtype=float)
    r = x - np.floor(x + 0.5)
    r = np.where(r > 0.25, 0.5 - r, r)
    r = np.where(r < -0.25, -0.5 - r, r)
    w = r * r
    acc = np.full_like(w, _SIN2PI_COEF[-1])
    for c in _SIN2PI_COEF[-2::-1]:
        acc = acc * w + c
    return r * acc


def _cos2pi(x):
    return _sin2pi(np.asarray(x, dtype=float) + 0.25)


def lam_eval(lam, q):
    """lam = (kernel_id, params, evaluate, gradient); q: (P, d) -> (P,)."""
    kid, par = lam[0], lam[1]
    if kid == LAM_CONSTANT:
        return np.full(q.shape[0], par[0])
    if kid == LAM_SINUSOIDAL:
        k = par[2:]
        return par[0] + par[1] * _sin2pi(q @ k)
    if kid == LAM_TANH_RAMP:
        a, b, w = par
        return a + (b - a) * 0.5 * (1.0 + np.tanh(q[:, 0] / w))
    if kid == LAM_CLIPPED_LINEAR:
        c, s, r = par
        return c + s * np.clip(q[:, 0], -r, r)
    return np.array([lam[2](qi) for qi in q])


def lam_grad(lam, q):
    """Gradient of the friction field; q: (P, d) -> (P, d)."""
    kid, par = lam[0], lam[1]
    g = np.zeros_like(q)
    if kid == LAM_CONSTANT:
        return g
    if kid == LAM_SINUSOIDAL:
        k = par[2:]
        g[:] = (2.0 * np.pi * par[1] * _cos2pi(q @ k))[:, None] * k
        return g
    if kid == LAM_TANH_RAMP:
        a, b, w = par
        g[:, 0] = (b - a) * 0.5 / (w * np.cosh(q[:, 0] / w) ** 2)
        return g
    if kid == LAM_CLIPPED_LINEAR:
        c, s, r = par
        g[:, 0] = np.where(np.abs(q[:, 0]) <= r, s, 0.0)
        return g
    return np.array([lam[3](qi) for qi in q])


def b_eval(bf, q):
    """bf = (kernel_id, params, evaluate); q: (P, d) -> (P, d)."""
    kid, par = bf[0], bf[1]
    if kid == B_ZERO:
        return np.zeros_like(q)
    if kid == B_CONSTANT:
        return np.broadcast_to(par, q.shape).copy()
    return np.array([bf[2](qi) for qi in q])


def _blown(q):
    return not np.all(np.abs(q) <= BLOWUP)


def _ou_moments(lam, sigma, mu, h):
    """Frozen-coefficient Gaussian transition of the Langevin pair, coupled
    exactly to the driving increment.

    Over one step the noise parts of (q, p) and the increment dW are jointly
    Gaussian; conditioning on dW leaves a rank-one residual with
    xi_p = -kappa * xi_q exactly.  Returns
    (E, int_decay, cqw_h, cpw_h, xi_std, kappa): the decay factor, the
    deterministic momentum-integral factor (1-E)/kappa, the regression
    coefficients of q and p on dW, and the residual standard deviation of q.
    Cancellation-prone brackets switch to series for small kappa*h.
    """
    kappa = lam / mu
    x = kappa * h
    E = np.exp(-x)
    F1 = -np.expm1(-x)
    F2 = F1 * (1.0 + E)
    int_decay = F1 / kappa
    s = sigma / lam
    x_m_F1 = np.where(
        x < 1e-3,
        x ** 2 * (0.5 - x / 6.0 + x ** 2 / 24.0),
        x - F1,
    )
    g = np.where(
        x < 1e-2,
        x ** 3 * (1.0 / 12.0 - x / 12.0 + 17.0 * x ** 2 / 360.0),
        0.5 * F2 - F1 * F1 / x,
    )
    cqw_h = s * x_m_F1 / x          # cov(q, dW)/h
    cpw_h = s * F1 / h              # cov(p, dW)/h
    xi_std = s * np.sqrt(np.maximum(g / kappa, 0.0))
    return E, int_decay, cqw_h, cpw_h, xi_std, kappa


def ou_pair_chunk(lam, bf, sigma, mu, h, q, p, dW, z2, qout=None, pout=None):
    """Second-order Langevin, exact Gaussian transition with coefficients
    frozen at the step's left endpoint, coupled exactly to the driving
    increments (see _ou_moments)."""
    n_steps = dW.shape[0]
    if qout is not None:
        qout[:, 0] = q
        pout[:, 0] = p
    for n in range(n_steps):
        lv = lam_eval(lam, q)[:, None]
        bv = b_eval(bf, q)
        E, int_decay, cqw_h, cpw_h, xi_std, kappa = _ou_moments(lv, sigma, mu, h)
        pbar = bv / lv
        dp = p - pbar
        q += pbar * h + dp * int_decay
        p[:] = pbar + dp * E
        if sigma > 0.0:
            xi = xi_std * z2[n]
            q += cqw_h * dW[n] + xi
            p += cpw_h * dW[n] - kappa * xi
        if _blown(q):
            return n
        if qout is not None:
            qout[:, n + 1] = q
            pout[:, n + 1] = p
    return -1


def expeuler_chunk(lam, bf, sigma, mu, h, q, p, wdot, qout=None, pout=None):
    """Mollified-noise Langevin: exact exponential decay of p against the
    forcing frozen at the left endpoint; q by the trapezoid rule on p."""
    n_steps = wdot.shape[0]
    if qout is not None:
        qout[:, 0] = q
        pout[:, 0] = p
    for n in range(n_steps):
        lv = lam_eval(lam, q)[:, None]
        bv = b_eval(bf, q)
        f = (bv + sigma * wdot[n]) / lv
        p_new = f + (p - f) * np.exp(-lv * h / mu)
        q += 0.5 * h * (p + p_new)
        p[:] = p_new
        if _blown(q):
            return n
        if qout is not None:
            qout[:, n + 1] = q
            pout[:, n + 1] = p
    return -1


def rk4_chunk(lam, bf, sigma, h, q, wdot_half, qout=None):
    """Classical RK4 on dq/dt = (b(q) + sigma*Wdot(t)) / lam(q); wdot_half
    holds the forcing on the half-step grid, shape (2*n_steps+1, P, d)."""
    n_steps = (wdot_half.shape[0] - 1) // 2

    def F(qq, wd):
        return (b_eval(bf, qq) + sigma * wd) / lam_eval(lam, qq)[:, None]

    if qout is not None:
        qout[:, 0] = q
    for n in range(n_steps):
        w0, wh, w1 = wdot_half[2 * n], wdot_half[2 * n + 1], wdot_half[2 * n + 2]
        k1 = F(q, w0)
        k2 = F(q + 0.5 * h * k1, wh)
        k3 = F(q + 0.5 * h * k2, wh)
        k4 = F(q + h * k3, w1)
        q += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if _blown(q):
            return n
        if qout is not None:
            qout[:, n + 1] = q
    return -1


def em_chunk(lam, bf, sigma, h, q, dW, include_correction, qout=None):
    """Euler–Maruyama for dq = (b/lam - corr*sigma^2 grad(lam)/(2 lam^3)) dt + (sigma/lam) dW."""
    n_steps = dW.shape[0]
    if qout is not None:
        qout[:, 0] = q
    for n in range(n_steps):
        lv = lam_eval(lam, q)[:, None]
        drift = b_eval(bf, q) / lv
        if include_correction:
            drift -= sigma ** 2 * lam_grad(lam, q) / (2.0 * lv ** 3)
        q += drift * h + (sigma / lv) * dW[n]
        if _blown(q):
            return n
        if qout is not None:
            qout[:, n + 1] = q
    return -1


def heun_chunk(lam, bf, sigma, h, q, dW, qout=None):
    """Heun predictor–corrector for dq = (b/lam) dt + (sigma/lam) o dW (Stratonovich)."""
    n_steps = dW.shape[0]
    if qout is not None:
        qout[:, 0] = q
    for n in range(n_steps):
        lv = lam_eval(lam, q)[:, None]
        f0 = b_eval(bf, q) / lv
        g0 = sigma / lv
        qs = q + f0 * h + g0 * dW[n]
        ls = lam_eval(lam, qs)[:, None]
        f1 = b_eval(bf, qs) / ls
        g1 = sigma / ls
        q += 0.5 * h * (f0 + f1) + 0.5 * (g0 + g1) * dW[n]
        if _blown(q):
            return n
        if qout is not None:
            qout[:, n + 1] = q
    return -1


def decomp_chunk(lam, bf, sigma, mu, h, p0, q, p, J, K, expA, alpha, beta,
                 gamma, comp, compb, dW, z2):
    """Fused streaming step for the path-decomposition diagnostics.

    Advances the Langevin state (q, p) by the exact frozen-coefficient OU
    transition while accumulating, with the same increments,

        alpha += p0 * (h/2) (expA_n + expA_{n+1})          (initial-momentum term)
        beta  += (1/mu) (h/2) (K_n + K_{n+1})              (drift convolution)
        gamma += (sigma/mu) (h/2) (J_n + J_{n+1})          (noise convolution)

    and the candidate-limit compensators comp += sigma*dW/lam(q_n),
    compb += h*b(q_n)/lam(q_n) (left-point sums).  The inner exponential
    kernels follow the recursions J <- w (J + dW), K <- w (K + b h),
    expA <- w expA with w = exp(-lam(q_n) h / mu).  Resolving these kernels
    requires h well below mu/Lambda.

    State arrays: q, p, J, K, alpha, beta, gamma, comp, compb are (P, d);
    expA is (P,); p0 is the (P, d) initial momentum.  Returns -1 or the
    failing step index.
    """
    n_steps = dW.shape[0]
    for n in range(n_steps):
        lv = lam_eval(lam, q)[:, None]
        bv = b_eval(bf, q)
        w = np.exp(-lv * h / mu)
        # decomposition recursions (left-point inner sums, trapezoid outer)
        J_new = w * (J + dW[n])
        K_new = w * (K + bv * h)
        expA_new = w[:, 0] * expA
        gamma += (sigma / mu) * 0.5 * h * (J + J_new)
        beta += (1.0 / mu) * 0.5 * h * (K + K_new)
        alpha += p0 * (0.5 * h * (expA + expA_new))[:, None]
        comp += sigma * dW[n] / lv
        compb += h * bv / lv
        J[:] = J_new
        K[:] = K_new
        expA[:] = expA_new
        # exact OU transition with the same increments
        E, int_decay, cqw_h, cpw_h, xi_std, kappa = _ou_moments(lv, sigma, mu, h)
        pbar = bv / lv
        dp = p - pbar
        q += pbar * h + dp * int_decay
        p[:] = pbar + dp * E
        if sigma > 0.0:
            xi = xi_std * z2[n]
            q += cqw_h * dW[n] + xi
            p += cpw_h * dW[n] - kappa * xi
        if _blown(q):
            return n
    return -1


def gendiff_chunk(p_right, tau, i_lo, i_hi, t_max, idx, t, done, U):
    """Advance embedded-Markov-chain walkers by up to U.shape[1] steps.

    From interior node i a walker first spends the deterministic holding
    time tau[i], then jumps right with probability p_right[i] (left
    otherwise).  A walker stops when it reaches node i_lo or i_hi, or when
    its clock passes t_max.  Walker k consumes U[k, j] at its j-th step of
    this chunk, so results are independent of chunking and worker layout.

    idx (int64), t, done (bool) are (P,) state arrays updated in place.
    Returns the number of walkers still running.
    """
    n_steps = U.shape[1]
    for j in range(n_steps):
        act = ~done
        if not act.any():
            return 0
        t[act] += tau[idx[act]]
        done |= t >= t_max          # clock ran out during the hold: no jump
        act = ~done & act
        ia = idx[act]
        idx[act] = np.where(U[act, j] < p_right[ia], ia + 1, ia - 1)
        done |= (idx <= i_lo) | (idx >= i_hi)
    return int(np.count_nonzero(~done))
