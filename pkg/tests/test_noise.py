"""Reproducible Wiener streams and bump-kernel mollification."""

import math

import numpy as np
import pytest

from varfric.noise import (
    build_kernel,
    derivative_consistency,
    make_generator,
    mollification_error,
    mollify,
    sample_wiener,
)


def test_generator_reproducible_and_stream_independent():
    a = make_generator(7, 3, kind=0).standard_normal(8)
    b = make_generator(7, 3, kind=0).standard_normal(8)
    assert np.array_equal(a, b)
    c = make_generator(7, 4, kind=0).standard_normal(8)
    d = make_generator(7, 3, kind=1).standard_normal(8)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_wiener_path_grid_and_increments():
    p = sample_wiener(d=2, T_ext=1.0, dt=1e-3, seed=5, stream_id=2)
    assert p.W.shape == (1001, 2)
    assert np.all(p.W[0] == 0.0)
    assert p.t[-1] == pytest.approx(1.0)
    # increments reproduce the raw generator draws scaled by sqrt(dt)
    raw = make_generator(5, 2, kind=0).standard_normal((1000, 2))
    assert np.allclose(p.increments, raw * math.sqrt(1e-3), rtol=0, atol=1e-12)


def test_wiener_rejects_bad_grid():
    with pytest.raises(ValueError):
        sample_wiener(1, 1.0, -1e-3, seed=0)
    with pytest.raises(ValueError):
        sample_wiener(1, 0.0, 1e-3, seed=0)


def test_kernel_normalization_and_moments():
    k = build_kernel()
    assert k.mass() == pytest.approx(1.0, abs=1e-12)
    # integral of the derivative over the support vanishes
    assert abs(k.dot_mass()) < 1e-12
    # peak value: C * exp(-1/(1/2 * 1/2)) near s = 1/2 (grid node is off
    # center by half a spacing, hence the loose relative tolerance)
    assert k.rho[k.m // 2] == pytest.approx(k.C * math.exp(-4.0), rel=1e-5)
    assert k.C == pytest.approx(142.250375777, rel=1e-9)
    # symmetric bump: first moment is the midpoint of the support
    m1 = float(np.trapezoid(k.s * k.rho, k.s))
    assert m1 == pytest.approx(0.5, abs=1e-12)


def test_kernel_resolution_floor():
    with pytest.raises(ValueError):
        build_kernel(m=100)


def test_mollify_requires_resolved_width():
    p = sample_wiener(1, 1.0, 1e-2, seed=1)
    k = build_kernel()
    with pytest.raises(ValueError):
        mollify(p, k, delta=1e-2)  # below 2*dt


def test_mollification_error_decreases_with_width():
    p = sample_wiener(1, 2.0, 1e-3, seed=11)
    k = build_kernel()
    errs = [mollification_error(mollify(p, k, delta)) for delta in (0.2, 0.05, 0.0125)]
    assert errs[0] > errs[1] > errs[2] > 0.0


def test_derivative_consistent_with_values():
    p = sample_wiener(2, 1.5, 1e-3, seed=21)
    k = build_kernel()
    noise = mollify(p, k, delta=0.05)
    # fundamental theorem of calculus on the smoothed path, exact inner
    # quadrature: residual is pure kernel-grid error
    assert derivative_consistency(noise, 0.1, 0.9) < 1e-6


def test_deriv_at_phase_zero_matches_table():
    p = sample_wiener(1, 1.0, 1e-3, seed=31)
    k = build_kernel()
    noise = mollify(p, k, delta=0.05)
    assert np.array_equal(noise.deriv_at_phase(0.0, 100), noise.deriv[:100])
    # half-phase samples stay within the pathwise envelope scale
    half = noise.deriv_at_phase(0.5, 100)
    assert half.shape == (100, 1)
    assert np.all(np.isfinite(half))
