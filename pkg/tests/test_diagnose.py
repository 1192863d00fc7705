"""Path decomposition and its Monte Carlo sweeps."""

import numpy as np
import pytest

from varfric.diagnose import (
    SweepRow,
    alpha_beta_residuals,
    decompose,
    friction_action,
    gamma_gap,
    tol_quad,
    write_rows_csv,
)
from varfric.integrate import simulate_langevin_white, simulate_ito_limit
from varfric.model import FieldCatalog, ModelSpec, constant_drift, zero_drift
from varfric.noise import sample_wiener


def _spec(**kw):
    base = dict(d=1, friction=FieldCatalog.sinusoidal(2.0, 0.5, [1.0]),
                drift=constant_drift([0.4]), sigma=1.0, mu=1e-2,
                p0=(1.0,), T=0.5)
    base.update(kw)
    return ModelSpec(**base)


def test_decompose_reconstructs_trajectory():
    # h must resolve the exponential relaxation (rate lam/mu) for the
    # trapezoid reconstruction to sit inside its first-order budget
    spec = _spec()
    h = 2e-5
    path = sample_wiener(1, spec.T, h, seed=12)
    traj = simulate_langevin_white(spec, path, h)
    dec = decompose(traj, path, spec)
    assert dec.ok
    assert dec.residual.max() <= tol_quad(spec, h)
    # the three pieces plus q0 rebuild the path everywhere, not just at T
    recon = spec.q0_arr + dec.alpha + dec.beta + dec.gamma
    assert np.allclose(recon, traj.q, atol=dec.tol)


def test_decompose_rejects_wrong_tag():
    spec = _spec()
    path = sample_wiener(1, spec.T, 1e-3, seed=1)
    traj = simulate_ito_limit(spec, path, h=1e-3)
    with pytest.raises(ValueError, match="white-noise"):
        decompose(traj, path, spec)


def test_decompose_rejects_grid_mismatch():
    spec = _spec()
    path = sample_wiener(1, spec.T, 1e-3, seed=1)
    traj = simulate_langevin_white(spec, path, h=1e-3)
    short = sample_wiener(1, 0.1, 1e-3, seed=1)
    with pytest.raises(ValueError, match="grids"):
        decompose(traj, short, spec)


def test_friction_action_sandwich():
    spec = _spec()
    path = sample_wiener(1, spec.T, 1e-3, seed=4)
    traj = simulate_langevin_white(spec, path, h=1e-3)
    A = friction_action(traj, spec.friction)
    lo = spec.friction.lower_bound * traj.t
    hi = spec.friction.upper_bound * traj.t
    assert np.all(A >= lo - 1e-12)
    assert np.all(A <= hi + 1e-12)
    assert np.all(np.diff(A) > 0)


def test_momentum_free_start_has_no_alpha():
    spec = _spec(p0=(0.0,))
    h = 2e-5
    path = sample_wiener(1, spec.T, h, seed=9)
    traj = simulate_langevin_white(spec, path, h)
    dec = decompose(traj, path, spec)
    assert np.all(dec.alpha == 0.0)


def test_gamma_gap_constant_friction_decays():
    spec = _spec(friction=FieldCatalog.constant(2.0), drift=zero_drift(1),
                 p0=(0.0,))
    rows = gamma_gap(spec, [1e-2, 1e-3], n_paths=200, T=0.5, seed=77)
    assert rows[0].estimate > 0.0
    # constant friction: the gap collapses by at least 5x per mu decade even
    # at pilot path counts
    assert rows[1].estimate < rows[0].estimate / 5.0


def test_sweeps_independent_of_workers_and_layout():
    spec = _spec(friction=FieldCatalog.clipped_linear(2.0, 1.0, 1.0),
                 drift=constant_drift([0.5]))
    kw = dict(mu_list=[1e-2], n_paths=64, T=0.25, seed=5)
    base = gamma_gap(spec, **kw)
    multi = gamma_gap(spec, workers=3, **kw)
    assert base[0].estimate == multi[0].estimate
    assert base[0].std_error == multi[0].std_error

    a1, b1 = alpha_beta_residuals(spec, **kw)
    a2, b2 = alpha_beta_residuals(spec, workers=2, **kw)
    assert (a1[0].estimate, b1[0].estimate) == (a2[0].estimate, b2[0].estimate)


def test_alpha_beta_residuals_shrink_with_mass():
    spec = _spec(friction=FieldCatalog.clipped_linear(2.0, 1.0, 1.0),
                 drift=constant_drift([0.5]))
    rows_a, rows_b = alpha_beta_residuals(spec, [1e-2, 1e-3], n_paths=200,
                                          T=0.5, seed=31)
    assert rows_a[1].estimate < rows_a[0].estimate
    assert rows_b[1].estimate < rows_b[0].estimate


def test_rows_csv_roundtrip(tmp_path):
    rows = [SweepRow(mu=1e-2, estimate=0.5, std_error=0.01, n_paths=100)]
    fn = tmp_path / "rows.csv"
    write_rows_csv(fn, rows, value_name="gap")
    lines = fn.read_text().strip().splitlines()
    assert lines[0] == "mu,gap,std_error,n_paths"
    assert lines[1].startswith("0.01,0.5,0.01,100")
