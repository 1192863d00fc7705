"""Friction and drift fields, and the validated problem specification.

Fields are pure functions bundled with a-priori bounds supplied by their
constructors.  Catalog fields additionally carry a small integer descriptor
(``kernel_id`` + ``kernel_params``) so the compiled time-steppers can
evaluate them without calling back into Python; fields built from arbitrary
callables get ``kernel_id = -1`` and are handled by the pure-Python
integration path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

SMOOTH = "smooth"
PIECEWISE_CONSTANT = "piecewise-constant"

# kernel_id codes understood by the step kernels
KID_CONSTANT = 0
KID_SINUSOIDAL = 1
KID_TANH_RAMP = 2
KID_CLIPPED_LINEAR = 3

BID_ZERO = 0
BID_CONSTANT = 1


class FieldError(ValueError):
    """Raised for invalid field construction or unsupported field queries."""


@dataclass(frozen=True)
class FrictionField:
    """Scalar friction coefficient with global bounds ``0 < lower <= upper``."""

    evaluate: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None
    lower_bound: float
    upper_bound: float
    smoothness: str = SMOOTH
    kernel_id: int = -1
    kernel_params: tuple[float, ...] = ()
    jumps: tuple[float, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        if not (0.0 < self.lower_bound <= self.upper_bound < math.inf):
            raise FieldError(
                f"friction bounds must satisfy 0 < lower <= upper < inf, "
                f"got [{self.lower_bound}, {self.upper_bound}]"
            )
        if self.smoothness not in (SMOOTH, PIECEWISE_CONSTANT):
            raise FieldError(f"unknown smoothness flag {self.smoothness!r}")

    def __call__(self, q) -> float:
        val = float(self.evaluate(np.asarray(q, dtype=float)))
        if __debug__:
            assert self.lower_bound - 1e-12 <= val <= self.upper_bound + 1e-12, (
                f"friction value {val} outside [{self.lower_bound}, {self.upper_bound}]"
            )
        return val

    def grad(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.smoothness == PIECEWISE_CONSTANT:
            x = float(np.atleast_1d(q)[0])
            if any(abs(x - j) < 1e-12 for j in self.jumps):
                raise FieldError(f"gradient queried at jump location {x}")
        if self.gradient is None:
            raise FieldError("field has no gradient")
        return np.asarray(self.gradient(q), dtype=float)

    @property
    def descriptor(self) -> tuple[int, np.ndarray]:
        return self.kernel_id, np.asarray(self.kernel_params, dtype=float)


@dataclass(frozen=True)
class DriftField:
    """Bounded vector drift ``b(q)``."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    bound: float
    kernel_id: int = -1
    kernel_params: tuple[float, ...] = ()
    name: str = "custom"

    def __call__(self, q) -> np.ndarray:
        val = np.asarray(self.evaluate(np.asarray(q, dtype=float)), dtype=float)
        if __debug__:
            assert np.linalg.norm(val) <= self.bound + 1e-12, (
                f"drift value {val} exceeds bound {self.bound}"
            )
        return val

    @property
    def descriptor(self) -> tuple[int, np.ndarray]:
        return self.kernel_id, np.asarray(self.kernel_params, dtype=float)


def zero_drift(d: int) -> DriftField:
    return DriftField(
        evaluate=lambda q: np.zeros(d),
        bound=0.0,
        kernel_id=BID_ZERO,
        kernel_params=(),
        name="zero",
    )


def constant_drift(vec: Sequence[float] | float) -> DriftField:
    v = np.atleast_1d(np.asarray(vec, dtype=float))
    return DriftField(
        evaluate=lambda q, v=v: v.copy(),
        bound=float(np.linalg.norm(v)),
        kernel_id=BID_CONSTANT,
        kernel_params=tuple(v),
        name="constant",
    )


class FieldCatalog:
    """Named friction-field constructors used throughout the test suite and CLI."""

    @staticmethod
    def constant(c: float) -> FrictionField:
        if c <= 0:
            raise FieldError("constant friction must be positive")
        return FrictionField(
            evaluate=lambda q, c=c: c,
            gradient=lambda q, : np.zeros_like(np.atleast_1d(q)),
            lower_bound=c,
            upper_bound=c,
            kernel_id=KID_CONSTANT,
            kernel_params=(c,),
            name=f"constant({c})",
        )

    @staticmethod
    def sinusoidal(c0: float, c1: float, wavevector: Sequence[float] | float = 1.0) -> FrictionField:
        """``c0 + c1*sin(2*pi*k.q)``; requires ``c0 > |c1|`` for positivity."""
        k = np.atleast_1d(np.asarray(wavevector, dtype=float))
        if c0 <= abs(c1):
            raise FieldError("sinusoidal friction needs c0 > |c1| to stay positive")

        def ev(q, c0=c0, c1=c1, k=k):
            return c0 + c1 * math.sin(2.0 * math.pi * float(k @ np.atleast_1d(q)))

        def gr(q, c1=c1, k=k):
            phase = 2.0 * math.pi * float(k @ np.atleast_1d(q))
            return 2.0 * math.pi * c1 * math.cos(phase) * k

        return FrictionField(
            evaluate=ev,
            gradient=gr,
            lower_bound=c0 - abs(c1),
            upper_bound=c0 + abs(c1),
            kernel_id=KID_SINUSOIDAL,
            kernel_params=(c0, c1, *k),
            name=f"sinusoidal({c0},{c1})",
        )

    @staticmethod
    def tanh_ramp(lam_lo: float, lam_hi: float, width: float) -> FrictionField:
        """Smoothed step from ``lam_lo`` (q1 << 0) to ``lam_hi`` (q1 >> 0)."""
        if width <= 0:
            raise FieldError("ramp width must be positive")
        lo, hi = min(lam_lo, lam_hi), max(lam_lo, lam_hi)
        if lo <= 0:
            raise FieldError("friction must stay positive")

        def ev(q, a=lam_lo, b=lam_hi, w=width):
            x = float(np.atleast_1d(q)[0])
            return a + (b - a) * 0.5 * (1.0 + math.tanh(x / w))

        def gr(q, a=lam_lo, b=lam_hi, w=width):
            qv = np.atleast_1d(q)
            g = np.zeros_like(qv)
            x = float(qv[0])
            g[0] = (b - a) * 0.5 / (w * math.cosh(x / w) ** 2)
            return g

        return FrictionField(
            evaluate=ev,
            gradient=gr,
            lower_bound=lo,
            upper_bound=hi,
            kernel_id=KID_TANH_RAMP,
            kernel_params=(lam_lo, lam_hi, width),
            name=f"tanh_ramp({lam_lo},{lam_hi},{width})",
        )

    @staticmethod
    def step(lam1: float, lam2: float) -> FrictionField:
        """Piecewise-constant friction: ``lam1`` for q <= 0, ``lam2`` for q > 0.

        Only the 1-D generalized-diffusion machinery accepts this field; the
        time-steppers reject it because they need the friction gradient.
        """
        if min(lam1, lam2) <= 0:
            raise FieldError("friction must stay positive")

        def ev(q, a=lam1, b=lam2):
            return a if float(np.atleast_1d(q)[0]) <= 0.0 else b

        def gr(q):
            return np.zeros_like(np.atleast_1d(q))

        return FrictionField(
            evaluate=ev,
            gradient=gr,
            lower_bound=min(lam1, lam2),
            upper_bound=max(lam1, lam2),
            smoothness=PIECEWISE_CONSTANT,
            jumps=(0.0,),
            name=f"step({lam1},{lam2})",
        )

    @staticmethod
    def clipped_linear(center: float = 2.0, slope: float = 1.0, radius: float = 1.0) -> FrictionField:
        """``center + slope*clip(q1, -radius, radius)``.

        Inside ``|q1| <= radius`` the gradient is exactly ``slope*e1``, the
        adversarial regime where the unregularized small-mass limit fails.
        The field has kinks at ``|q1| = radius``; gradient queries there
        return the interior value.
        """
        if center - abs(slope) * radius <= 0:
            raise FieldError("clipped_linear dips to a nonpositive value")

        def ev(q, c=center, s=slope, r=radius):
            x = float(np.atleast_1d(q)[0])
            return c + s * min(max(x, -r), r)

        def gr(q, s=slope, r=radius):
            qv = np.atleast_1d(q)
            g = np.zeros_like(qv)
            if abs(float(qv[0])) <= r:
                g[0] = s
            return g

        return FrictionField(
            evaluate=ev,
            gradient=gr,
            lower_bound=center - abs(slope) * radius,
            upper_bound=center + abs(slope) * radius,
            kernel_id=KID_CLIPPED_LINEAR,
            kernel_params=(center, slope, radius),
            name=f"clipped_linear({center},{slope},{radius})",
        )


@dataclass(frozen=True)
class ModelSpec:
    """Full problem specification shared by all simulators."""

    d: int
    friction: FrictionField
    drift: DriftField
    sigma: float = 1.0
    mu: float = 1e-2
    delta: float = 0.0
    eps: float = 1.0
    q0: tuple[float, ...] = (0.0,)
    p0: tuple[float, ...] = (0.0,)
    T: float = 1.0

    def with_(self, **kw) -> "ModelSpec":
        return replace(self, **kw)

    @property
    def q0_arr(self) -> np.ndarray:
        return np.asarray(self.q0, dtype=float)

    @property
    def p0_arr(self) -> np.ndarray:
        return np.asarray(self.p0, dtype=float)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_model(spec: ModelSpec) -> ValidationReport:
    """Check a ModelSpec against the invariants every downstream module assumes."""
    v: list[str] = []
    if spec.d < 1:
        v.append("dimension must be >= 1")
    for nm in ("mu", "sigma", "T", "eps"):
        if getattr(spec, nm) <= 0:
            v.append(f"{nm} must be strictly positive")
    if spec.delta < 0:
        v.append("delta must be >= 0")
    if len(spec.q0) != spec.d:
        v.append("initial position dimension mismatch")
    if len(spec.p0) != spec.d:
        v.append("initial momentum dimension mismatch")
    if spec.friction.lower_bound <= 0:
        v.append("lambda lower bound <= 0")
    if spec.friction.smoothness == PIECEWISE_CONSTANT and spec.friction.name.startswith("step"):
        pass
    elif spec.friction.smoothness == PIECEWISE_CONSTANT:
        pass
    if spec.friction.name.startswith("step") and spec.friction.smoothness != PIECEWISE_CONSTANT:
        v.append("step field must be piecewise-constant")
    return ValidationReport(v)


def gradient_check(field: FrictionField, points: Sequence, h: float = 1e-5) -> float:
    """Max relative mismatch between central differences and the declared gradient.

    Unsupported for piecewise-constant fields.
    """
    if field.smoothness == PIECEWISE_CONSTANT:
        raise FieldError("gradient_check unsupported for piecewise-constant fields")
    worst = 0.0
    for q in points:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        g = field.grad(q)
        fd = np.empty_like(q)
        for i in range(q.size):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            fd[i] = (field(qp) - field(qm)) / (2.0 * h)
        err = float(np.linalg.norm(fd - g) / (1.0 + np.linalg.norm(g)))
        worst = max(worst, err)
    return worst
