"""Time-stepper behavior: backend parity, exactness, blow-up, I/O."""

import json
import math

import numpy as np
import pytest

from varfric import HAVE_COMPILED
from varfric.integrate import (
    BlowUpError,
    simulate_ito_limit,
    simulate_langevin_mollified,
    simulate_langevin_white,
    simulate_smooth_limit,
    simulate_stratonovich_limit,
)
from varfric.model import FieldCatalog, ModelSpec, constant_drift, zero_drift
from varfric.noise import build_kernel, mollify, sample_wiener

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled backend unavailable")


def _spec(**kw):
    base = dict(d=1, friction=FieldCatalog.sinusoidal(2.0, 0.5, [1.0]),
                drift=constant_drift([0.3]), sigma=1.0, mu=0.1, T=0.5)
    base.update(kw)
    return ModelSpec(**base)


def _noise(spec, dt, seed, delta=0.1):
    T_ext = spec.T + delta + 0.1
    path = sample_wiener(spec.d, T_ext, dt, seed)
    return path, mollify(path, build_kernel(), delta)


# ---------------------------------------------------------------------------
# backend parity: the compiled and pure-Python steppers implement the same
# one-step maps, so on a benign (well-damped, smooth) configuration their
# trajectories agree to rounding accumulation
# ---------------------------------------------------------------------------

@needs_compiled
@pytest.mark.parametrize("tag", ["white", "mollified", "smooth", "ito", "strat"])
def test_backend_parity(tag):
    spec = _spec()
    h = 1e-3
    path, noise = _noise(spec, dt=1e-3, seed=42)
    runners = {
        "white": lambda c: simulate_langevin_white(spec, path, h, compiled=c),
        "mollified": lambda c: simulate_langevin_mollified(spec, noise, h, compiled=c),
        "smooth": lambda c: simulate_smooth_limit(spec, noise, h, compiled=c),
        "ito": lambda c: simulate_ito_limit(spec, path, h, compiled=c),
        "strat": lambda c: simulate_stratonovich_limit(spec, path, h, compiled=c),
    }
    fast = runners[tag](True)
    slow = runners[tag](False)
    assert np.allclose(fast.q, slow.q, rtol=1e-10, atol=1e-12)
    if fast.p is not None:
        assert np.allclose(fast.p, slow.p, rtol=1e-10, atol=1e-10)


# ---------------------------------------------------------------------------
# exactness oracles
# ---------------------------------------------------------------------------

def test_em_exact_for_constant_coefficients():
    # constant friction, zero drift: q_T = q0 + (sigma/lam) W_T exactly
    spec = _spec(friction=FieldCatalog.constant(2.0), drift=zero_drift(1),
                 q0=(0.3,), T=1.0)
    path = sample_wiener(1, 1.0, 1e-3, seed=7)
    traj = simulate_ito_limit(spec, path, h=1e-3)
    expect = 0.3 + 0.5 * path.W[:traj.q.shape[0], 0]
    assert np.allclose(traj.q[:, 0], expect, atol=1e-12)


def test_white_noise_momentum_relaxation():
    # sigma ~ 0, b = 0: the momentum decays exactly like exp(-lam/mu * t)
    spec = _spec(friction=FieldCatalog.constant(2.0), drift=zero_drift(1),
                 sigma=1e-300, mu=0.05, p0=(1.0,), T=0.5)
    path = sample_wiener(1, 0.5, 1e-3, seed=8)
    traj = simulate_langevin_white(spec, path, h=1e-3)
    kappa = 2.0 / 0.05
    expect = np.exp(-kappa * traj.t)
    assert np.allclose(traj.p[:, 0], expect, rtol=1e-10)


def test_smooth_limit_rk4_order():
    # Richardson probe against a fine reference: quartic error decay
    spec = _spec(T=0.4, friction=FieldCatalog.sinusoidal(2.0, 1.0, [2.0]),
                 sigma=2.0)
    _, noise = _noise(spec, dt=2.5e-4, seed=99, delta=0.2)
    ref = simulate_smooth_limit(spec, noise, h=2.5e-4).q_final[0]
    errs = [abs(simulate_smooth_limit(spec, noise, h=h).q_final[0] - ref)
            for h in (4e-3, 2e-3, 1e-3)]
    assert errs[0] > errs[1] > errs[2] > 0.0
    for ratio in (errs[0] / errs[1], errs[1] / errs[2]):
        assert 8.0 < ratio < 32.0


# ---------------------------------------------------------------------------
# guard rails
# ---------------------------------------------------------------------------

def test_blowup_detected():
    spec = _spec(friction=FieldCatalog.constant(1.0), drift=zero_drift(1),
                 sigma=1e12, T=0.01)
    path = sample_wiener(1, 0.01, 1e-3, seed=3)
    with pytest.raises(BlowUpError):
        simulate_ito_limit(spec, path, h=1e-3)


def test_step_friction_rejected_by_steppers():
    spec = _spec(friction=FieldCatalog.step(1.0, 2.0))
    path = sample_wiener(1, 0.5, 1e-3, seed=1)
    with pytest.raises(ValueError, match="piecewise-constant"):
        simulate_ito_limit(spec, path, h=1e-3)


def test_h_must_be_multiple_of_dt():
    spec = _spec()
    path = sample_wiener(1, 0.5, 1e-3, seed=1)
    with pytest.raises(ValueError, match="multiple"):
        simulate_ito_limit(spec, path, h=1.5e-3)


def test_horizon_must_be_multiple_of_h():
    spec = _spec(T=0.5)
    path = sample_wiener(1, 0.5, 1e-3, seed=1)
    with pytest.raises(ValueError, match="horizon"):
        simulate_ito_limit(spec, path, h=3e-3)


def test_mollified_forcing_must_be_resolved():
    spec = _spec(T=0.4)
    _, noise = _noise(spec, dt=1e-3, seed=2, delta=0.1)
    with pytest.raises(ValueError, match="delta/20"):
        simulate_smooth_limit(spec, noise, h=1e-2)


def test_short_path_rejected():
    spec = _spec(T=2.0)
    path = sample_wiener(1, 0.5, 1e-3, seed=1)
    with pytest.raises(ValueError, match="horizon"):
        simulate_ito_limit(spec, path, h=1e-3)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def test_trajectory_csv_and_sidecar(tmp_path):
    spec = _spec(T=0.1)
    path = sample_wiener(1, 0.1, 1e-3, seed=5)
    traj = simulate_langevin_white(spec, path, h=1e-3)
    csv = tmp_path / "traj.csv"
    traj.to_csv(csv)
    data = np.loadtxt(csv, delimiter=",", skiprows=1)
    assert data.shape == (traj.t.size, 3)  # t, q_1, p_1
    assert np.allclose(data[:, 1], traj.q[:, 0])

    meta = tmp_path / "traj.json"
    traj.to_json_sidecar(meta, spec)
    side = json.loads(meta.read_text())
    assert side["equation"] == "langevin-white"
    assert side["h"] == 1e-3
    assert side["seed"] == 5


def test_same_noise_identical_reruns():
    spec = _spec(T=0.2)
    path = sample_wiener(1, 0.2, 1e-3, seed=17)
    a = simulate_stratonovich_limit(spec, path, h=1e-3)
    b = simulate_stratonovich_limit(spec, path, h=1e-3)
    assert np.array_equal(a.q, b.q)
