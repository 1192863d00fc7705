"""Periodic homogenization of the overdamped limit with fast-oscillating
friction lam(q/eps).

In the fast variable y = q/eps the limit dynamics is generated by

    A0 = (1 / (2*lam(y)**2)) * Laplacian - (grad lam(y) / (2*lam(y)**3)) . grad

on the unit torus, whose invariant density is proportional to lam itself.
The corrector fields N_k solve A0 N_k = (1/(2*lam**3)) d lam/d y_k, and the
effective diffusion matrix admits two algebraically equivalent expressions:
a symmetric quadratic form in grad N ("quadratic form" below) and the
integrated-by-parts reduction

    a_ij = (int (dN_j/dy_i) / lam) / (int lam) + delta_ij (int 1/lam) / (int lam)

("reduced form").  Their numerical agreement certifies the discretization;
the Monte Carlo estimate from long trajectories of the oscillatory SDE
cross-validates the whole pipeline.

Everything here is a second-order centered finite-difference scheme on a
uniform periodic grid in d <= 2, with sparse direct solves and periodic
rectangle-rule quadrature (spectrally accurate for smooth integrands).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .integrate import _em_ensemble
from .model import (
    KID_CONSTANT,
    KID_SINUSOIDAL,
    DriftField,
    FieldCatalog,
    FrictionField,
    ModelSpec,
    zero_drift,
)

RESIDUAL_RTOL = 1e-10
MEAN_GAUGE_TOL = 1e-12


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the unit torus, d in {1, 2}, n nodes per axis."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if self.n < 16:
            raise ValueError("grid needs at least 16 nodes per dimension")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n ** self.d

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.d

    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def points(self) -> np.ndarray:
        """All grid nodes, shape (n**d, d), y-fastest-last ordering."""
        ax = self.axis()
        if self.d == 1:
            return ax[:, None]
        Y1, Y2 = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([Y1.ravel(), Y2.ravel()])

    def sample(self, f) -> np.ndarray:
        """Sample a callable of a length-d point on all nodes; (n**d,)."""
        return np.array([float(f(y)) for y in self.points()])

    def shift_matrix(self, axis: int, offset: int) -> sp.csr_matrix:
        """Sparse periodic shift: (S v)[i] = v at the node offset steps along
        the axis."""
        n, d = self.n, self.d
        idx = np.arange(n ** d)
        if d == 1:
            j = (idx + offset) % n
        elif axis == 0:
            j = ((idx // n + offset) % n) * n + idx % n
        else:
            j = (idx // n) * n + (idx % n + offset) % n
        return sp.csr_matrix((np.ones(idx.size), (idx, j)), shape=(idx.size, idx.size))

    def deriv_matrix(self, axis: int) -> sp.csr_matrix:
        """Second-order centered first derivative along an axis, periodic."""
        return (self.shift_matrix(axis, +1) - self.shift_matrix(axis, -1)) / (2.0 * self.spacing)

    def laplacian_matrix(self) -> sp.csr_matrix:
        L = sp.csr_matrix((self.size, self.size))
        eye = sp.identity(self.size, format="csr")
        for ax in range(self.d):
            L = L + (self.shift_matrix(ax, +1) - 2.0 * eye
                     + self.shift_matrix(ax, -1)) / self.spacing ** 2
        return L.tocsr()


def _field_on_grid(friction: FrictionField, grid: TorusGrid) -> tuple[np.ndarray, np.ndarray]:
    """Values and analytic gradients of the friction on all nodes."""
    pts = grid.points()
    lam = np.array([friction(y) for y in pts])
    glam = np.array([friction.gradient(y) for y in pts])
    return lam, glam


def assemble_A0(lam: np.ndarray, grad_lam: np.ndarray, grid: TorusGrid) -> sp.csr_matrix:
    """Discrete A0 = (1/(2 lam^2)) Laplacian - (grad lam / (2 lam^3)) . grad,
    centered second-order stencils with periodic wrap.

    ``lam`` is (n**d,), ``grad_lam`` is (n**d, d), both in the node ordering
    of :meth:`TorusGrid.points`.
    """
    if lam.shape != (grid.size,) or grad_lam.shape != (grid.size, grid.d):
        raise ValueError("field arrays do not match the grid")
    A = sp.diags(0.5 / lam ** 2) @ grid.laplacian_matrix()
    for ax in range(grid.d):
        A = A - sp.diags(grad_lam[:, ax] / (2.0 * lam ** 3)) @ grid.deriv_matrix(ax)
    return A.tocsr()


def _left_null_vector(A: sp.csr_matrix, lam: np.ndarray) -> np.ndarray:
    """Exact discrete left-null vector of A (the discrete invariant density).

    The continuous density is proportional to lam; the discrete one differs
    by O(n^-2).  Solved via the bordered system [[A^T, 1], [lam^T, 0]] whose
    unique solution has the border multiplier forced to zero because the
    constant vector spans ker(A) and is orthogonal to range(A^T).
    """
    m = A.shape[0]
    ones = np.ones((m, 1))
    B = sp.bmat([[A.T.tocsc(), sp.csc_matrix(ones)],
                 [sp.csc_matrix(lam[None, :]), None]], format="csc")
    sol = spla.spsolve(B, np.concatenate([np.zeros(m), [1.0]]))
    return sol[:m]


@dataclass(frozen=True)
class CellSolution:
    """Corrector fields on the grid with their solve diagnostics."""

    grid: TorusGrid
    lam: np.ndarray              # (n**d,)
    grad_lam: np.ndarray         # (n**d, d)
    N: np.ndarray                # (d, n**d)
    residuals: np.ndarray        # (d,) inf-norm of A0 N_k - projected rhs_k
    rhs_norms: np.ndarray        # (d,) inf-norm of projected rhs_k
    projections: np.ndarray      # (d,) removed weighted-mean magnitude

    def __post_init__(self):
        bad = self.residuals > RESIDUAL_RTOL * np.maximum(self.rhs_norms, 1e-300)
        if np.any(bad):
            raise RuntimeError(
                "cell solve residuals exceed the contract: "
                + ", ".join(f"{r:.3e}" for r in self.residuals))
        means = np.abs(self.N.mean(axis=1))
        if np.any(means > MEAN_GAUGE_TOL):
            raise RuntimeError("corrector mean-zero gauge violated")

    def grad_N(self) -> np.ndarray:
        """(d, d, n**d): grad_N[k, i] = dN_k / dy_i by the centered stencil."""
        out = np.empty((self.grid.d, self.grid.d, self.grid.size))
        for ax in range(self.grid.d):
            D = self.grid.deriv_matrix(ax)
            for k in range(self.grid.d):
                out[k, ax] = D @ self.N[k]
        return out


def solve_cell(friction: FrictionField, grid: TorusGrid) -> CellSolution:
    """Solve A0 N_k = (1/(2 lam^3)) d lam/d y_k on the torus for k = 1..d.

    The raw right-hand side is projected to be orthogonal to the exact
    discrete left-null vector of A0 (a weighted mean removal with weight
    equal to the discrete invariant density, which approximates lam); the
    removed magnitude is reported and shrinks with refinement because the
    continuous rhs integrates to zero against lam.  The mean-zero gauge
    fixes the additive constant of each corrector.
    """
    lam, glam = _field_on_grid(friction, grid)
    A = assemble_A0(lam, glam, grid)
    m = grid.size

    mu = _left_null_vector(A, lam)
    mu_dot_one = float(mu.sum())

    ones = np.ones((m, 1))
    B = sp.bmat([[A.tocsc(), sp.csc_matrix(ones)],
                 [sp.csc_matrix(ones.T), None]], format="csc")
    lu = spla.splu(B)

    N = np.empty((grid.d, m))
    residuals = np.empty(grid.d)
    rhs_norms = np.empty(grid.d)
    projections = np.empty(grid.d)
    for k in range(grid.d):
        rhs = glam[:, k] / (2.0 * lam ** 3)
        c = float(mu @ rhs) / mu_dot_one
        rhs = rhs - c
        projections[k] = abs(c)
        sol = lu.solve(np.concatenate([rhs, [0.0]]))
        Nk = sol[:m]
        Nk = Nk - Nk.mean()
        N[k] = Nk
        residuals[k] = float(np.abs(A @ Nk - rhs).max())
        rhs_norms[k] = float(np.abs(rhs).max())
    return CellSolution(grid=grid, lam=lam, grad_lam=glam, N=N,
                       residuals=residuals, rhs_norms=rhs_norms,
                       projections=projections)


@dataclass(frozen=True)
class EffectiveCoefficients:
    """Effective diffusion matrix and drift with both quadrature routes."""

    a_quadratic: np.ndarray   # (d, d) symmetric quadratic-form evaluation
    a_reduced: np.ndarray     # (d, d) integrated-by-parts evaluation
    b_bar: np.ndarray         # (d,)
    grid_n: int

    def __post_init__(self):
        if np.abs(self.a_quadratic - self.a_quadratic.T).max() > 1e-8:
            raise RuntimeError("effective diffusivity is not symmetric")
        if np.linalg.eigvalsh(self.a_quadratic).min() <= 0.0:
            raise RuntimeError("effective diffusivity is not positive definite")

    @property
    def a_bar(self) -> np.ndarray:
        return self.a_quadratic

    @property
    def form_gap(self) -> float:
        return float(np.abs(self.a_quadratic - self.a_reduced).max())

    def to_json(self, fname) -> None:
        payload = {
            "grid_n": self.grid_n,
            "a_quadratic": self.a_quadratic.tolist(),
            "a_reduced": self.a_reduced.tolist(),
            "b_bar": self.b_bar.tolist(),
            "form_gap": self.form_gap,
        }
        with open(fname, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)


def effective_coefficients(cell: CellSolution,
                           drift: DriftField | None = None) -> EffectiveCoefficients:
    """Both quadrature routes to the effective matrix, plus the drift

        b_bar_i = ( int b_i + sum_k int b_k dN_i/dy_k ) / int lam,

    all integrals by the periodic rectangle rule.
    """
    grid, lam = cell.grid, cell.lam
    d = grid.d
    w = grid.cell_volume
    gN = cell.grad_N()
    int_lam = w * lam.sum()
    inv_lam = 1.0 / lam

    a_quad = np.empty((d, d))
    a_red = np.empty((d, d))
    int_inv = float(inv_lam.sum())
    for i in range(d):
        for j in range(d):
            dot = sum(float((gN[i, ax] * gN[j, ax] * inv_lam).sum())
                      for ax in range(d))
            cross = float(((gN[j, i] + gN[i, j]) * inv_lam).sum())
            diag = int_inv if i == j else 0.0
            a_quad[i, j] = w * (dot + cross + diag) / int_lam
            a_red[i, j] = w * (float((gN[j, i] * inv_lam).sum())
                               + (int_inv if i == j else 0.0)) / int_lam

    if drift is None:
        drift = zero_drift(d)
    bvals = np.array([drift(y) for y in grid.points()])   # (m, d)
    b_bar = np.empty(d)
    for i in range(d):
        corr = sum(float((bvals[:, k] * gN[i, k]).sum()) for k in range(d))
        b_bar[i] = w * (float(bvals[:, i].sum()) + corr) / int_lam
    return EffectiveCoefficients(a_quadratic=a_quad, a_reduced=a_red,
                                 b_bar=b_bar, grid_n=grid.n)


def invariant_density_residual(friction: FrictionField, grid: TorusGrid) -> float:
    """Inf-norm of the discrete adjoint applied to the sampled continuous
    invariant density lam; decays O(n^-2) under refinement."""
    lam, glam = _field_on_grid(friction, grid)
    A = assemble_A0(lam, glam, grid)
    return float(np.abs(A.T @ lam).max())


# ---------------------------------------------------------------------------
# Monte Carlo cross-validation
# ---------------------------------------------------------------------------

def _rescale_field(friction: FrictionField, eps: float) -> FrictionField:
    """Friction q -> lam(q/eps) as a catalog field when possible."""
    if friction.kernel_id == KID_CONSTANT:
        return friction
    if friction.kernel_id == KID_SINUSOIDAL:
        par = friction.kernel_params
        return FieldCatalog.sinusoidal(par[0], par[1],
                                       [k / eps for k in par[2:]])
    lb, ub = friction.lower_bound, friction.upper_bound
    return FrictionField(
        evaluate=lambda q: friction.evaluate(np.asarray(q) / eps),
        gradient=lambda q: friction.gradient(np.asarray(q) / eps) / eps,
        lower_bound=lb, upper_bound=ub,
        smoothness=friction.smoothness,
        name=f"{friction.name}(q/{eps:g})")


@dataclass(frozen=True)
class MCDiffusivity:
    a_hat: np.ndarray            # (d, d) empirical covariance of q_T - q0 over T
    a_se: np.ndarray             # (d, d) Gaussian standard errors
    drift_raw: np.ndarray        # (d,) mean displacement / T (correction on)
    drift_uncorrected: np.ndarray | None  # same with the Ito correction off
    eps: float
    T: float
    n_paths: int


def mc_effective_diffusivity(friction_tilde: FrictionField, drift: DriftField,
                             eps: float, T: float, n_paths: int, seed: int,
                             d: int = 1, h: float | None = None,
                             report_uncorrected: bool = False,
                             compiled: bool | None = None,
                             workers: int = 1) -> MCDiffusivity:
    """Empirical effective diffusivity from long trajectories of the
    oscillatory overdamped SDE with friction lam(q/eps).

    The estimate is the empirical covariance of the displacement q_T - q0
    divided by T (covariance is shift-invariant, so no drift value needs to
    be subtracted).  The per-step displacement must stay far below the
    oscillation period eps; the default h = eps**2 / 50 keeps the weak bias
    of the Euler scheme well inside the cross-validation tolerance.
    """
    if T < 1.0:
        raise ValueError("horizon must be at least 1 to forget the fast scale")
    scaled = _rescale_field(friction_tilde, eps)
    dim = d
    if h is None:
        h = eps * eps / 50.0
    n = max(1, round(T / h))
    h = T / n
    spec = ModelSpec(d=dim, friction=scaled, drift=drift, sigma=1.0, eps=eps,
                     q0=(0.0,) * dim, p0=(0.0,) * dim, T=T)
    finals = _em_ensemble(spec, h, n_paths, seed, include_correction=True,
                          compiled=compiled, workers=workers)
    X = finals - spec.q0_arr
    S = np.cov(X, rowvar=False).reshape(dim, dim)
    a_hat = S / T
    P = n_paths
    a_se = np.sqrt((np.outer(np.diag(S), np.diag(S)) + S ** 2) / (P - 1)) / T
    drift_raw = X.mean(axis=0) / T
    drift_unc = None
    if report_uncorrected:
        finals2 = _em_ensemble(spec, h, n_paths, seed,
                               include_correction=False,
                               compiled=compiled, workers=workers)
        drift_unc = (finals2 - spec.q0_arr).mean(axis=0) / T
    return MCDiffusivity(a_hat=a_hat, a_se=a_se, drift_raw=drift_raw,
                         drift_uncorrected=drift_unc, eps=eps, T=T,
                         n_paths=n_paths)
