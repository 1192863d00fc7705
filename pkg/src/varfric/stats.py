"""Monte Carlo harness: coupled ensembles, sup-distance statistics,
weak-error functionals, and convergence-sweep orchestration.

Convergence claims are asserted as monotone trends across parameter values
with non-overlapping error bars, never as absolute rate thresholds, and all
pathwise distances use common random numbers: two ensembles built from the
same (seed, stream) pairs are driven by identical noise, so their
per-stream sup-distance isolates the equation difference from the Monte
Carlo noise.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .integrate import (
    Trajectory,
    simulate_ito_limit,
    simulate_langevin_mollified,
    simulate_langevin_white,
    simulate_smooth_limit,
    simulate_stratonovich_limit,
)
from .model import ModelSpec
from .noise import MollifierKernel, build_kernel, mollify, sample_wiener

_NEEDS_MOLLIFIED = ("langevin-mollified", "smooth-limit-ode")


@dataclass(frozen=True)
class Ensemble:
    """Trajectories sharing one model and time grid, one per noise stream."""

    spec: ModelSpec
    seed: int
    trajectories: tuple[tuple[int, Trajectory], ...]

    def __post_init__(self):
        ids = [sid for sid, _ in self.trajectories]
        if len(set(ids)) != len(ids):
            raise ValueError("stream ids must be distinct")
        grids = {(tr.h, tr.t.size) for _, tr in self.trajectories}
        if len(grids) > 1:
            raise ValueError("all trajectories must share the time grid")

    @property
    def n_paths(self) -> int:
        return len(self.trajectories)

    def terminal(self) -> np.ndarray:
        return np.array([tr.q_final for _, tr in self.trajectories])


def _simulate_one(spec: ModelSpec, tag: str, h: float, seed: int, sid: int,
                  kernel: MollifierKernel | None,
                  compiled: bool | None) -> Trajectory:
    if tag in _NEEDS_MOLLIFIED:
        if not spec.delta > 0.0:
            raise ValueError(f"{tag} requires a mollification width delta")
        T_ext = spec.T + spec.delta + 2.0 * h
        path = sample_wiener(spec.d, T_ext, h, seed, sid)
        noise = mollify(path, kernel, spec.delta)
        if tag == "langevin-mollified":
            return simulate_langevin_mollified(spec, noise, h, compiled=compiled)
        return simulate_smooth_limit(spec, noise, h, compiled=compiled)
    path = sample_wiener(spec.d, spec.T, h, seed, sid)
    if tag == "langevin-white":
        return simulate_langevin_white(spec, path, h, compiled=compiled)
    if tag == "ito-limit":
        return simulate_ito_limit(spec, path, h, compiled=compiled)
    if tag == "stratonovich-limit":
        return simulate_stratonovich_limit(spec, path, h, compiled=compiled)
    raise ValueError(f"unknown equation tag {tag!r}")


def build_ensemble(spec: ModelSpec, tag: str, h: float, n_paths: int,
                   seed: int, stream_offset: int = 0,
                   kernel: MollifierKernel | None = None,
                   compiled: bool | None = None,
                   workers: int = 1) -> Ensemble:
    """Independent trajectories on streams offset..offset+n_paths-1.

    Stream ids are absolute, so the ensemble content does not depend on the
    worker count; the trajectory list is assembled in stream order.
    """
    if tag in _NEEDS_MOLLIFIED and kernel is None:
        kernel = build_kernel()
    sids = list(range(stream_offset, stream_offset + n_paths))

    def one(sid: int) -> Trajectory:
        return _simulate_one(spec, tag, h, seed, sid, kernel, compiled)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            trajs = list(ex.map(one, sids))
    else:
        trajs = [one(sid) for sid in sids]
    return Ensemble(spec=spec, seed=seed,
                    trajectories=tuple(zip(sids, trajs)))


@dataclass(frozen=True)
class CoupledDistance:
    """Statistics of max_{t<=T} |q^A_t - q^B_t| over paired streams."""

    mean: float
    median: float
    q95: float
    kappa: float | None
    p_exceed: float | None
    n_paths: int
    per_path: np.ndarray


def coupled_sup_distance(ens_a: Ensemble, ens_b: Ensemble,
                         kappa: float | None = None) -> CoupledDistance:
    """Pathwise sup-distance between two ensembles driven by identical
    noise; the pairing is by stream id and both must share the time grid."""
    ids_a = [sid for sid, _ in ens_a.trajectories]
    ids_b = [sid for sid, _ in ens_b.trajectories]
    if ids_a != ids_b or ens_a.seed != ens_b.seed:
        raise ValueError("ensembles are not coupled: stream/seed mismatch")
    sup = np.empty(len(ids_a))
    for k, ((_, ta), (_, tb)) in enumerate(zip(ens_a.trajectories,
                                               ens_b.trajectories)):
        if ta.t.size != tb.t.size or ta.h != tb.h:
            raise ValueError("ensembles are not coupled: grid mismatch")
        sup[k] = float(np.linalg.norm(ta.q - tb.q, axis=1).max())
    p_exc = float(np.mean(sup > kappa)) if kappa is not None else None
    return CoupledDistance(mean=float(sup.mean()), median=float(np.median(sup)),
                           q95=float(np.quantile(sup, 0.95)), kappa=kappa,
                           p_exceed=p_exc, n_paths=sup.size, per_path=sup)


# ---------------------------------------------------------------------------
# weak-error functionals
# ---------------------------------------------------------------------------

FUNCTIONALS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "terminal_mean": lambda q: q[:, 0],
    "terminal_second_moment": lambda q: np.sum(q * q, axis=1),
    "terminal_bounded": lambda q: np.tanh(q[:, 0]),
}


@dataclass(frozen=True)
class WeakError:
    functional: str
    estimate: float
    std_error: float
    reference: float
    n_paths: int

    @property
    def z_score(self) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.estimate == self.reference else math.inf
        return (self.estimate - self.reference) / self.std_error


def weak_error(ens: Ensemble, functional: str, reference: float) -> WeakError:
    """MC estimate of E f(q_T) with a CLT error bar and the z-score against
    a reference value."""
    if functional not in FUNCTIONALS:
        raise ValueError(f"unknown functional {functional!r}; "
                         f"choose from {sorted(FUNCTIONALS)}")
    vals = FUNCTIONALS[functional](ens.terminal())
    n = vals.size
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return WeakError(functional=functional, estimate=float(vals.mean()),
                     std_error=se, reference=float(reference), n_paths=n)


# ---------------------------------------------------------------------------
# convergence sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPlan:
    """One convergence sweep: a named parameter, its (strictly monotone)
    values, the MC budget, and a statistic callback mapping a parameter
    value to (estimate, std_error).  The callback owns the simulator
    pairing, so iterated-limit orderings are encoded by fixing the inner
    parameters inside the callback."""

    parameter: str
    values: tuple[float, ...]
    n_paths: int
    statistic: Callable[[float], tuple[float, float]]
    description: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0 or (v.size > 1 and not (np.all(np.diff(v) > 0)
                                               or np.all(np.diff(v) < 0))):
            raise ValueError("sweep values must be strictly monotone")


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    values: tuple[float, ...]
    estimates: tuple[float, ...]
    std_errors: tuple[float, ...]
    n_paths: int
    wall_time: float
    description: str = ""

    def __post_init__(self):
        if not all(math.isfinite(s) for s in self.std_errors):
            raise ValueError("standard errors must be finite")

    @property
    def decreasing_trend(self) -> bool | None:
        """True iff the statistic decreases across values with
        non-overlapping +/-2 std-error bars; None for single-row sweeps."""
        if len(self.values) < 2:
            return None
        for (ea, sa), (eb, sb) in zip(
                zip(self.estimates, self.std_errors),
                zip(self.estimates[1:], self.std_errors[1:])):
            if not eb + 2.0 * sb < ea - 2.0 * sa:
                return False
        return True

    def to_csv(self, fname) -> None:
        with open(fname, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow([self.parameter, "estimate", "std_error", "n_paths"])
            for v, e, s in zip(self.values, self.estimates, self.std_errors):
                wr.writerow([repr(v), repr(e), repr(s), self.n_paths])

    def manifest(self, seed: int | None = None) -> dict:
        import numpy
        trend = self.decreasing_trend
        return {
            "parameter": self.parameter,
            "values": list(self.values),
            "estimates": list(self.estimates),
            "std_errors": list(self.std_errors),
            "n_paths": self.n_paths,
            "decreasing_trend": trend,
            "description": self.description,
            "seed": seed,
            "wall_time_s": self.wall_time,
            "numpy_version": numpy.__version__,
        }

    def to_json(self, fname, seed: int | None = None) -> None:
        with open(fname, "w") as f:
            json.dump(self.manifest(seed), f, indent=2, sort_keys=True)


def run_sweep(plan: SweepPlan) -> SweepResult:
    """Evaluate the plan's statistic at each value, in order."""
    t0 = time.perf_counter()
    est, ses = [], []
    for v in plan.values:
        e, s = plan.statistic(v)
        est.append(float(e))
        ses.append(float(s))
    return SweepResult(parameter=plan.parameter, values=tuple(plan.values),
                       estimates=tuple(est), std_errors=tuple(ses),
                       n_paths=plan.n_paths,
                       wall_time=time.perf_counter() - t0,
                       description=plan.description)


# ---------------------------------------------------------------------------
# ready-made coupled statistics
# ---------------------------------------------------------------------------

def paired_terminal_mean_gap(ens_a: Ensemble, ens_b: Ensemble) -> tuple[float, float]:
    """|E q_T^A - E q_T^B| estimated from per-stream paired differences
    (first coordinate), with the paired standard error."""
    ids_a = [sid for sid, _ in ens_a.trajectories]
    ids_b = [sid for sid, _ in ens_b.trajectories]
    if ids_a != ids_b or ens_a.seed != ens_b.seed:
        raise ValueError("ensembles are not coupled: stream/seed mismatch")
    diff = ens_a.terminal()[:, 0] - ens_b.terminal()[:, 0]
    return (abs(float(diff.mean())),
            float(diff.std(ddof=1) / math.sqrt(diff.size)))


def paired_terminal_error(ens_a: Ensemble, ens_b: Ensemble) -> tuple[float, float]:
    """Coupled mean terminal error E|q_T^A - q_T^B| with its standard
    error.  Unlike the weak (mean-functional) gap, this pathwise quantity
    has a non-degenerate signal whenever the equations differ, so it is the
    statistic that certifies terminal-time convergence trends."""
    ids_a = [sid for sid, _ in ens_a.trajectories]
    ids_b = [sid for sid, _ in ens_b.trajectories]
    if ids_a != ids_b or ens_a.seed != ens_b.seed:
        raise ValueError("ensembles are not coupled: stream/seed mismatch")
    err = np.linalg.norm(ens_a.terminal() - ens_b.terminal(), axis=1)
    return (float(err.mean()), float(err.std(ddof=1) / math.sqrt(err.size)))


@dataclass(frozen=True)
class ItoStratCheck:
    """Paired check that the Stratonovich-vs-uncorrected-Ito terminal-mean
    gap equals the conversion drift of the Ito-form equation,
    E int -sigma^2 grad(lam)/(2 lam^3) dt."""

    diff_mean: float          # mean of q_T(strat) - q_T(ito, no correction)
    correction_mean: float    # MC estimate of -sigma^2 E int lam'/(2 lam^3) dt
    se_combined: float        # paired std error of (difference - correction)
    n_paths: int

    @property
    def gap(self) -> float:
        return abs(self.diff_mean - self.correction_mean)


def ito_strat_correction(spec: ModelSpec, h: float, n_paths: int, seed: int,
                         compiled: bool | None = None,
                         workers: int = 1) -> ItoStratCheck:
    """Criterion check for the conversion drift, streamed per path: each
    stream drives both a Heun (Stratonovich) and an uncorrected
    Euler-Maruyama (Ito) trajectory, and the time integral of the
    conversion drift -sigma^2 lam'/(2 lam^3) is evaluated along the
    Stratonovich path by the trapezoid rule.

    The continuous-time identity behind the check is exact with the
    integrand on the Stratonovich path: its mean terminal displacement is
    the expected integral of its own drift, while the drift-free Ito
    solution is a martingale.  Integrating along the Ito path instead
    leaves a bias that is second order in the conversion drift but does
    not vanish with the step size, and large ensembles resolve it."""
    from ._kernels import _py
    from .integrate import field_tuple

    lam_tuple = field_tuple(spec.friction)
    diffs = np.empty(n_paths)
    corrs = np.empty(n_paths)

    def one(sid: int) -> None:
        path = sample_wiener(spec.d, spec.T, h, seed, sid)
        ts = simulate_stratonovich_limit(spec, path, h, compiled=compiled)
        ti = simulate_ito_limit(spec, path, h, include_correction=False,
                                compiled=compiled)
        diffs[sid] = float(ts.q_final[0] - ti.q_final[0])
        lam = _py.lam_eval(lam_tuple, ts.q)[:, None]
        grad = _py.lam_grad(lam_tuple, ts.q)
        integrand = spec.sigma ** 2 * grad[:, 0] / (2.0 * lam[:, 0] ** 3)
        corrs[sid] = -float(np.trapezoid(integrand, dx=h))

    sids = range(n_paths)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(one, sids))
    else:
        for sid in sids:
            one(sid)
    paired = diffs - corrs
    return ItoStratCheck(diff_mean=float(diffs.mean()),
                         correction_mean=float(corrs.mean()),
                         se_combined=float(paired.std(ddof=1) / math.sqrt(n_paths)),
                         n_paths=n_paths)


def mass_distance_statistic(spec: ModelSpec, delta: float, h: float,
                            n_paths: int, seed: int,
                            kernel: MollifierKernel | None = None,
                            kappa: float | None = None,
                            compiled: bool | None = None,
                            workers: int = 1) -> Callable[[float], tuple[float, float]]:
    """Statistic for a mass sweep: mean coupled sup-distance between the
    inertial mollified-noise equation at mass mu and the massless smooth
    ODE on the same noise (delta fixed: the inner limit of the iterated
    ordering)."""
    kern = kernel if kernel is not None else build_kernel()

    def stat(mu: float) -> tuple[float, float]:
        sp = spec.with_(mu=mu, delta=delta)
        ens_a = build_ensemble(sp, "langevin-mollified", h, n_paths, seed,
                               kernel=kern, compiled=compiled, workers=workers)
        ens_b = build_ensemble(sp, "smooth-limit-ode", h, n_paths, seed,
                               kernel=kern, compiled=compiled, workers=workers)
        d = coupled_sup_distance(ens_a, ens_b, kappa=kappa)
        return d.mean, float(d.per_path.std(ddof=1) / math.sqrt(d.n_paths))

    return stat


def width_distance_statistic(spec: ModelSpec, h_of_delta: Callable[[float], float],
                             n_paths: int, seed: int,
                             kernel: MollifierKernel | None = None,
                             kappa: float | None = None,
                             compiled: bool | None = None,
                             workers: int = 1) -> Callable[[float], tuple[float, float]]:
    """Statistic for a width sweep: mean coupled sup-distance between the
    massless smooth ODE at width delta and the Stratonovich-form SDE on the
    underlying Wiener path (mu already sent to zero)."""
    kern = kernel if kernel is not None else build_kernel()

    def stat(delta: float) -> tuple[float, float]:
        h = h_of_delta(delta)
        sp = spec.with_(delta=delta)
        ens_a = build_ensemble(sp, "smooth-limit-ode", h, n_paths, seed,
                               kernel=kern, compiled=compiled, workers=workers)
        ens_b = build_ensemble(sp, "stratonovich-limit", h, n_paths, seed,
                               compiled=compiled, workers=workers)
        d = coupled_sup_distance(ens_a, ens_b, kappa=kappa)
        return d.mean, float(d.per_path.std(ddof=1) / math.sqrt(d.n_paths))

    return stat
