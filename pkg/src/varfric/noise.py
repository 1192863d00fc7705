"""Wiener paths and their smooth mollifications.

A :class:`WienerPath` is a standard d-dimensional Wiener trajectory sampled
on a uniform grid and reproducible from ``(seed, stream_id)``.
:func:`mollify` convolves it with a compactly supported bump kernel of width
``delta``, producing both the smoothed values

    W_delta(t) = (1/delta) * int_0^delta W(t+s) rho(s/delta) ds
               = int_0^1 rho(r) W(t + delta r) dr

and the derivative computed from the exact identity

    dW_delta/dt (t) = -(1/delta) * int_0^1 rho'(r) W(t + delta r) dr,

never by differencing the value table.  Between path nodes W is linearly
interpolated; the r-integrals use the trapezoid rule on the kernel grid.
Because every evaluation time sits at a fixed fractional offset of the path
grid, each quadrature collapses to a short correlation stencil ("taps")
against the raw path samples, making evaluation cost independent of the
kernel resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def make_generator(seed: int, stream_id: int, kind: int = 0) -> np.random.Generator:
    """Independent, reproducible stream: kind 0 = Wiener increments,
    1 = auxiliary Gaussian draws, 2 = chain uniforms."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id, kind))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class WienerPath:
    d: int
    dt: float
    t: np.ndarray          # (N+1,)
    W: np.ndarray          # (N+1, d), W[0] = 0
    seed: int
    stream_id: int

    @property
    def T_ext(self) -> float:
        return float(self.t[-1])

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.W, axis=0)

    def to_csv(self, fname) -> None:
        header = "t," + ",".join(f"W_{i+1}" for i in range(self.d))
        np.savetxt(fname, np.column_stack([self.t, self.W]),
                   delimiter=",", header=header, comments="")


def sample_wiener(d: int, T_ext: float, dt: float, seed: int, stream_id: int = 0) -> WienerPath:
    """Sample a Wiener path on the uniform grid n*dt covering [0, T_ext]."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T_ext <= 0:
        raise ValueError("horizon must be positive")
    n = int(round(T_ext / dt))
    gen = make_generator(seed, stream_id, kind=0)
    dW = gen.standard_normal((n, d)) * math.sqrt(dt)
    W = np.empty((n + 1, d))
    W[0] = 0.0
    np.cumsum(dW, axis=0, out=W[1:])
    t = np.arange(n + 1) * dt
    return WienerPath(d=d, dt=dt, t=t, W=W, seed=seed, stream_id=stream_id)


# ---------------------------------------------------------------------------
# mollifier kernel
# ---------------------------------------------------------------------------

def _bump_raw(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


def _bump_raw_deriv(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    g = si * (1.0 - si)
    out[inside] = np.exp(-1.0 / g) * (1.0 - 2.0 * si) / (g * g)
    return out


@dataclass(frozen=True)
class MollifierKernel:
    """Sampled bump rho(s) = C*exp(-1/(s(1-s))) on [0,1] with analytic rho'."""

    s: np.ndarray          # (m,) uniform nodes on [0,1]
    rho: np.ndarray        # (m,)
    rho_dot: np.ndarray    # (m,)
    C: float

    @property
    def m(self) -> int:
        return self.s.size

    @property
    def weights(self) -> np.ndarray:
        h = self.s[1] - self.s[0]
        w = np.full(self.m, h)
        w[0] = w[-1] = h / 2.0
        return w

    def mass(self) -> float:
        return float(np.trapezoid(self.rho, self.s))

    def dot_mass(self) -> float:
        return float(np.trapezoid(self.rho_dot, self.s))


def build_kernel(m: int = 4096) -> MollifierKernel:
    """Tabulate the normalized bump kernel on an m-node uniform grid."""
    if m < 512:
        raise ValueError("kernel needs at least 512 nodes")
    s = np.linspace(0.0, 1.0, m)
    raw = _bump_raw(s)
    C = 1.0 / np.trapezoid(raw, s)
    return MollifierKernel(s=s, rho=C * raw, rho_dot=C * _bump_raw_deriv(s), C=float(C))


# ---------------------------------------------------------------------------
# mollified noise
# ---------------------------------------------------------------------------

def _taps(kernel: MollifierKernel, coeff: np.ndarray, delta: float, dt: float,
          phase: float) -> np.ndarray:
    """Stencil c with  sum_i c[i]*W[n+i]  =  sum_j w_j coeff_j W_lin(t_n + phase*dt + delta*s_j).

    ``coeff`` is the kernel sample array (rho for values, rho_dot for the
    derivative formula); linear interpolation of W between path nodes is
    folded into the stencil.
    """
    w = kernel.weights * coeff
    a = phase + delta * kernel.s / dt
    k = np.floor(a).astype(np.int64)
    th = a - k
    c = np.zeros(int(k[-1]) + 2)
    np.add.at(c, k, w * (1.0 - th))
    np.add.at(c, k + 1, w * th)
    return c


def _apply_taps(W: np.ndarray, c: np.ndarray, n_out: int) -> np.ndarray:
    """out[n, :] = sum_i c[i] * W[n+i, :] for n = 0..n_out-1."""
    if n_out + c.size - 1 > W.shape[0]:
        raise ValueError("path horizon too short for requested mollification")
    out = np.empty((n_out, W.shape[1]))
    for j in range(W.shape[1]):
        out[:, j] = np.correlate(W[:n_out + c.size - 1, j], c, mode="valid")
    return out


@dataclass(frozen=True)
class MollifiedNoise:
    path: WienerPath
    kernel: MollifierKernel
    delta: float
    values: np.ndarray     # (N_use+1, d) at path nodes t_n <= T_ext - delta
    deriv: np.ndarray      # (N_use+1, d)

    @property
    def d(self) -> int:
        return self.path.d

    @property
    def dt(self) -> float:
        return self.path.dt

    @property
    def horizon(self) -> float:
        return (self.values.shape[0] - 1) * self.path.dt

    def deriv_at_phase(self, phase: float, n_out: int) -> np.ndarray:
        """Derivative samples at t_n + phase*dt for n = 0..n_out-1 (0 <= phase < 1)."""
        if phase == 0.0:
            return self.deriv[:n_out].copy()
        c = _taps(self.kernel, self.kernel.rho_dot, self.delta, self.path.dt, phase)
        return _apply_taps(self.path.W, c, n_out) * (-1.0 / self.delta)


def mollify(path: WienerPath, kernel: MollifierKernel, delta: float) -> MollifiedNoise:
    """Mollification of width delta; requires delta >= 2*dt and enough horizon."""
    if delta < 2.0 * path.dt:
        raise ValueError("delta must be at least 2*dt")
    c_val = _taps(kernel, kernel.rho, delta, path.dt, 0.0)
    n_use = path.W.shape[0] - c_val.size + 1
    if n_use < 2:
        raise ValueError("path horizon too short for requested mollification")
    values = _apply_taps(path.W, c_val, n_use)
    c_der = _taps(kernel, kernel.rho_dot, delta, path.dt, 0.0)
    deriv = _apply_taps(path.W, c_der, n_use) * (-1.0 / delta)
    noise = MollifiedNoise(path=path, kernel=kernel, delta=delta,
                           values=values, deriv=deriv)
    if __debug__:
        _assert_pathwise_bound(noise)
    return noise


def _assert_pathwise_bound(noise: MollifiedNoise) -> None:
    """|W_delta'(t)| <= (1/delta) * max|rho'| * max_{t<=s<=t+delta} |W_s|, pathwise."""
    W = noise.path.W
    n_use = noise.values.shape[0]
    win = int(math.ceil(noise.delta / noise.path.dt)) + 1
    normW = np.linalg.norm(W, axis=1)
    sw = np.lib.stride_tricks.sliding_window_view(normW, win)[:n_use]
    envelope = sw.max(axis=1) * (np.abs(noise.kernel.rho_dot).max() / noise.delta)
    lhs = np.linalg.norm(noise.deriv, axis=1)
    assert np.all(lhs <= envelope * (1.0 + 1e-12) + 1e-300), \
        "mollified derivative violates its pathwise envelope bound"


def mollification_error(noise: MollifiedNoise) -> float:
    """max over grid nodes in [0, horizon] of |W_delta(t) - W(t)|."""
    n = noise.values.shape[0]
    return float(np.linalg.norm(noise.values - noise.path.W[:n], axis=1).max())


def _pl_integral_at(path: WienerPath, tau: np.ndarray) -> np.ndarray:
    """Exact int_0^tau W(s) ds for the piecewise-linear path, vectorized over tau; (len(tau), d)."""
    t, W, dt = path.t, path.W, path.dt
    cum = np.zeros_like(W)
    np.cumsum(0.5 * (W[1:] + W[:-1]) * dt, axis=0, out=cum[1:])
    k = np.clip((tau / dt).astype(np.int64), 0, t.size - 2)
    x = tau - t[k]
    slope = (W[k + 1] - W[k]) / dt
    return cum[k] + W[k] * x[:, None] + 0.5 * slope * (x ** 2)[:, None]


def derivative_consistency(noise: MollifiedNoise, t_a: float, t_b: float) -> float:
    """Discrepancy between the exact time-quadrature of the derivative table
    and the value-table difference W_delta(t_b) - W_delta(t_a).

    The time integral of the derivative formula is evaluated by swapping the
    order of integration: the inner integral of the piecewise-linear path is
    exact, so the residual measures only the kernel-grid quadrature error.
    """
    dt, delta = noise.path.dt, noise.delta
    na, nb = int(round(t_a / dt)), int(round(t_b / dt))
    if not (0 <= na < nb < noise.values.shape[0]):
        raise ValueError("times outside the mollified horizon")
    r = noise.kernel.s
    F = (_pl_integral_at(noise.path, nb * dt + delta * r)
         - _pl_integral_at(noise.path, na * dt + delta * r))
    w = noise.kernel.weights
    lhs = -(1.0 / delta) * ((w * noise.kernel.rho_dot) @ F)
    rhs = noise.values[nb] - noise.values[na]
    return float(np.abs(lhs - rhs).max())
