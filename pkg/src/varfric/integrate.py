"""Time-steppers for the inertial Langevin equation (white or mollified
noise) and its first-order candidate limits.

All simulators consume the same Wiener path / mollified noise objects so
that pathwise (common-random-numbers) distances between any two of them are
meaningful: with identical ``(seed, stream_id)`` the driving noise is
identical across equation tags.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import PIECEWISE_CONSTANT, DriftField, FrictionField, ModelSpec, validate_model
from .noise import MollifiedNoise, WienerPath, make_generator

BLOWUP_THRESHOLD = 1e8

TAGS = (
    "langevin-white",
    "langevin-mollified",
    "smooth-limit-ode",
    "ito-limit",
    "stratonovich-limit",
)


class BlowUpError(RuntimeError):
    def __init__(self, tag: str, step: int):
        super().__init__(f"{tag}: |q| exceeded {BLOWUP_THRESHOLD:g} at step {step}")
        self.step = step


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray                  # (N+1,)
    q: np.ndarray                  # (N+1, d)
    p: np.ndarray | None           # (N+1, d) or None for first-order equations
    tag: str
    h: float
    seed: int
    stream_id: int

    @property
    def d(self) -> int:
        return self.q.shape[1]

    @property
    def q_final(self) -> np.ndarray:
        return self.q[-1]

    def to_csv(self, fname) -> None:
        cols = [self.t, self.q]
        header = ["t"] + [f"q_{i+1}" for i in range(self.d)]
        if self.p is not None:
            cols.append(self.p)
            header += [f"p_{i+1}" for i in range(self.d)]
        np.savetxt(fname, np.column_stack(cols), delimiter=",",
                   header=",".join(header), comments="")

    def sidecar(self, spec: ModelSpec) -> dict:
        return {
            "equation": self.tag,
            "h": self.h,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "friction": spec.friction.name,
            "drift": spec.drift.name,
            "sigma": spec.sigma,
            "mu": spec.mu,
            "delta": spec.delta,
            "eps": spec.eps,
            "q0": list(spec.q0),
            "p0": list(spec.p0),
            "T": spec.T,
            "d": spec.d,
        }

    def to_json_sidecar(self, fname, spec: ModelSpec) -> None:
        with open(fname, "w") as f:
            json.dump(self.sidecar(spec), f, indent=2, sort_keys=True)


def field_tuple(field: FrictionField):
    return (field.kernel_id, np.asarray(field.kernel_params, dtype=float),
            field.evaluate, field.gradient)


def drift_tuple(field: DriftField):
    par = np.asarray(field.kernel_params, dtype=float)
    if par.size == 0:
        par = np.zeros(1)
    return (field.kernel_id, par, field.evaluate)


def _check_spec(spec: ModelSpec) -> None:
    report = validate_model(spec)
    if not report.ok:
        raise ValueError("invalid model: " + "; ".join(report.violations))
    if spec.friction.smoothness == PIECEWISE_CONSTANT:
        raise ValueError("piecewise-constant friction is unsupported by the "
                         "time-steppers; use the 1-D generalized-diffusion "
                         "machinery instead")


def _steps_per_path_node(h: float, dt: float) -> int:
    m = int(round(h / dt))
    if m < 1 or abs(m * dt - h) > 1e-9 * max(h, dt):
        raise ValueError("step h must be a positive integer multiple of the path dt")
    return m


def _coarse_increments(path: WienerPath, h: float, n_steps: int) -> np.ndarray:
    m = _steps_per_path_node(h, path.dt)
    if n_steps * m > path.n_steps:
        raise ValueError("path horizon shorter than the simulation horizon")
    return path.W[m:n_steps * m + 1:m] - path.W[0:n_steps * m:m]


def _n_steps(T: float, h: float) -> int:
    n = int(round(T / h))
    if abs(n * h - T) > 1e-9 * max(T, h):
        raise ValueError("horizon T must be an integer multiple of h")
    return n


def simulate_langevin_white(spec: ModelSpec, path: WienerPath, h: float,
                            compiled: bool | None = None) -> Trajectory:
    """Inertial Langevin with white noise, frozen-coefficient exact-Gaussian
    (Ornstein-Uhlenbeck pair) stepping; uniformly stable in the mass."""
    _check_spec(spec)
    n_steps = _n_steps(spec.T, h)
    dW = _coarse_increments(path, h, n_steps)[:, None]
    z2 = make_generator(path.seed, path.stream_id, kind=1).standard_normal(
        (n_steps, 1, spec.d))
    lam, bf = field_tuple(spec.friction), drift_tuple(spec.drift)
    kern = _kernels.backend(min(lam[0], bf[0]), compiled)
    q = spec.q0_arr[None].copy()
    p = spec.p0_arr[None].copy()
    qout = np.empty((1, n_steps + 1, spec.d))
    pout = np.empty_like(qout)
    fail = kern.ou_pair_chunk(lam, bf, spec.sigma, spec.mu, h, q, p, dW, z2,
                              qout, pout)
    if fail >= 0:
        raise BlowUpError("langevin-white", int(fail))
    return Trajectory(t=np.arange(n_steps + 1) * h, q=qout[0], p=pout[0],
                      tag="langevin-white", h=h, seed=path.seed,
                      stream_id=path.stream_id)


def _require_resolved(h: float, delta: float) -> None:
    if h > delta / 20.0 + 1e-15:
        raise ValueError("step h must be at most delta/20 to resolve the forcing")


def _deriv_coarse(noise: MollifiedNoise, h: float, n_steps: int) -> np.ndarray:
    m = _steps_per_path_node(h, noise.dt)
    if n_steps * m + 1 > noise.deriv.shape[0]:
        raise ValueError("mollified horizon shorter than the simulation horizon")
    return noise.deriv[:n_steps * m + 1:m]


def _deriv_half_grid(noise: MollifiedNoise, h: float, n_steps: int) -> np.ndarray:
    """Forcing samples at k*h/2 for k = 0..2*n_steps (phase taps for odd m)."""
    m = _steps_per_path_node(h, noise.dt)
    full = _deriv_coarse(noise, h, n_steps)
    out = np.empty((2 * n_steps + 1, noise.d))
    out[0::2] = full
    if m % 2 == 0:
        out[1::2] = noise.deriv[m // 2:n_steps * m:m]
    else:
        n_base = (n_steps - 1) * m + m // 2 + 1
        shifted = noise.deriv_at_phase(0.5, n_base)
        out[1::2] = shifted[m // 2::m]
    return out


def simulate_langevin_mollified(spec: ModelSpec, noise: MollifiedNoise, h: float,
                                compiled: bool | None = None) -> Trajectory:
    """Inertial Langevin forced by the mollified-noise derivative; exponential
    Euler on the momentum, trapezoid on the position."""
    _check_spec(spec)
    _require_resolved(h, noise.delta)
    n_steps = _n_steps(spec.T, h)
    wdot = _deriv_coarse(noise, h, n_steps)[:-1][:, None]
    lam, bf = field_tuple(spec.friction), drift_tuple(spec.drift)
    kern = _kernels.backend(min(lam[0], bf[0]), compiled)
    q = spec.q0_arr[None].copy()
    p = spec.p0_arr[None].copy()
    qout = np.empty((1, n_steps + 1, spec.d))
    pout = np.empty_like(qout)
    fail = kern.expeuler_chunk(lam, bf, spec.sigma, spec.mu, h, q, p, wdot,
                               qout, pout)
    if fail >= 0:
        raise BlowUpError("langevin-mollified", int(fail))
    return Trajectory(t=np.arange(n_steps + 1) * h, q=qout[0], p=pout[0],
                      tag="langevin-mollified", h=h, seed=noise.path.seed,
                      stream_id=noise.path.stream_id)


def simulate_smooth_limit(spec: ModelSpec, noise: MollifiedNoise, h: float,
                          compiled: bool | None = None) -> Trajectory:
    """Massless pathwise ODE dq/dt = (b(q) + sigma*Wdot_delta(t)) / lam(q),
    integrated by classical RK4 (the forcing is smooth)."""
    _check_spec(spec)
    _require_resolved(h, noise.delta)
    n_steps = _n_steps(spec.T, h)
    wdot_half = _deriv_half_grid(noise, h, n_steps)[:, None]
    lam, bf = field_tuple(spec.friction), drift_tuple(spec.drift)
    kern = _kernels.backend(min(lam[0], bf[0]), compiled)
    q = spec.q0_arr[None].copy()
    qout = np.empty((1, n_steps + 1, spec.d))
    fail = kern.rk4_chunk(lam, bf, spec.sigma, h, q, wdot_half, qout)
    if fail >= 0:
        raise BlowUpError("smooth-limit-ode", int(fail))
    return Trajectory(t=np.arange(n_steps + 1) * h, q=qout[0], p=None,
                      tag="smooth-limit-ode", h=h, seed=noise.path.seed,
                      stream_id=noise.path.stream_id)


def simulate_ito_limit(spec: ModelSpec, path: WienerPath, h: float,
                       include_correction: bool = True,
                       compiled: bool | None = None) -> Trajectory:
    """Euler-Maruyama for the Ito-form limit
    dq = (b/lam - sigma^2 grad(lam)/(2 lam^3)) dt + (sigma/lam) dW;
    the correction drift can be switched off for conversion experiments."""
    _check_spec(spec)
    n_steps = _n_steps(spec.T, h)
    dW = _coarse_increments(path, h, n_steps)[:, None]
    lam, bf = field_tuple(spec.friction), drift_tuple(spec.drift)
    kern = _kernels.backend(min(lam[0], bf[0]), compiled)
    q = spec.q0_arr[None].copy()
    qout = np.empty((1, n_steps + 1, spec.d))
    fail = kern.em_chunk(lam, bf, spec.sigma, h, q, dW, include_correction, qout)
    if fail >= 0:
        raise BlowUpError("ito-limit", int(fail))
    return Trajectory(t=np.arange(n_steps + 1) * h, q=qout[0], p=None,
                      tag="ito-limit", h=h, seed=path.seed,
                      stream_id=path.stream_id)


def _em_ensemble(spec: ModelSpec, h: float, n_paths: int, seed: int,
                 include_correction: bool = True,
                 compiled: bool | None = None, block: int = 1024,
                 chunk_steps: int = 8192, workers: int = 1) -> np.ndarray:
    """Final positions of an Euler-Maruyama ensemble for the Ito-form limit,
    shape (n_paths, d).

    Each path draws its own Wiener increments from the kind-0 stream at its
    absolute path index, so the result is independent of the block/chunk
    layout and of the worker count.  Used by the fast-oscillation variance
    check and the Monte Carlo effective-diffusivity estimate, where storing
    ~1e6-step trajectories for 1e4 paths is not an option.
    """
    from concurrent.futures import ThreadPoolExecutor

    _check_spec(spec)
    n_steps = _n_steps(spec.T, h)
    lam, bf = field_tuple(spec.friction), drift_tuple(spec.drift)
    kern = _kernels.backend(min(lam[0], bf[0]), compiled)
    d = spec.d
    sqrt_h = math.sqrt(h)
    out = np.empty((n_paths, d))

    def run_block(lo: int, hi: int) -> None:
        P = hi - lo
        q = np.tile(spec.q0_arr, (P, 1))
        gens = [make_generator(seed, lo + i, kind=0) for i in range(P)]
        done = 0
        while done < n_steps:
            nc = min(chunk_steps, n_steps - done)
            buf = np.empty((P, nc, d))
            for i in range(P):
                buf[i] = gens[i].standard_normal((nc, d))
            buf *= sqrt_h
            dW = np.ascontiguousarray(buf.transpose(1, 0, 2))
            fail = kern.em_chunk(lam, bf, spec.sigma, h, q, dW,
                                 include_correction)
            if fail >= 0:
                raise BlowUpError("ito-limit", done + int(fail))
            done += nc
        out[lo:hi] = q

    blocks = [(lo, min(lo + block, n_paths)) for lo in range(0, n_paths, block)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda b: run_block(*b), blocks))
    else:
        for b in blocks:
            run_block(*b)
    return out


def simulate_stratonovich_limit(spec: ModelSpec, path: WienerPath, h: float,
                                compiled: bool | None = None) -> Trajectory:
    """Heun predictor-corrector for dq = (b/lam) dt + (sigma/lam) o dW,
    the Stratonovich-consistent one-step method."""
    _check_spec(spec)
    n_steps = _n_steps(spec.T, h)
    dW = _coarse_increments(path, h, n_steps)[:, None]
    lam, bf = field_tuple(spec.friction), drift_tuple(spec.drift)
    kern = _kernels.backend(min(lam[0], bf[0]), compiled)
    q = spec.q0_arr[None].copy()
    qout = np.empty((1, n_steps + 1, spec.d))
    fail = kern.heun_chunk(lam, bf, spec.sigma, h, q, dW, qout)
    if fail >= 0:
        raise BlowUpError("stratonovich-limit", int(fail))
    return Trajectory(t=np.arange(n_steps + 1) * h, q=qout[0], p=None,
                      tag="stratonovich-limit", h=h, seed=path.seed,
                      stream_id=path.stream_id)
