#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure-Python stepping kernels.

Feeds identical pre-drawn noise chunks to both backends and reports million
path-steps per second plus the speedup.  The pure-Python backend vectorizes
across paths, so the gap measured here is the per-step overhead the compiled
extension removes; both backends produce matching trajectories (see the
parity tests), which is asserted again here on a small probe.

Usage:  python3 benchmarks/bench_kernels.py [--paths 512] [--steps 4096]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from varfric import HAVE_COMPILED
from varfric._kernels import backend
from varfric.integrate import drift_tuple, field_tuple
from varfric.model import FieldCatalog, zero_drift

SIGMA = 1.0
MU = 1e-2
H = 1e-4


def _noise(paths: int, steps: int, seed: int) -> np.ndarray:
    gen = np.random.Generator(np.random.PCG64(seed))
    return gen.standard_normal((steps, paths, 1)) * np.sqrt(H)


def _run(kern, name, lam, bf, paths, steps, seed):
    dW = _noise(paths, steps, seed)
    q = np.zeros((paths, 1))
    if name == "em":
        args = (lam, bf, SIGMA, H, q, dW, True)
        fn = kern.em_chunk
    elif name == "heun":
        args = (lam, bf, SIGMA, H, q, dW)
        fn = kern.heun_chunk
    else:  # inertial pair
        p = np.zeros((paths, 1))
        z2 = _noise(paths, steps, seed + 1) / np.sqrt(H)
        args = (lam, bf, SIGMA, MU, H, q, p, dW, z2)
        fn = kern.ou_pair_chunk
    t0 = time.perf_counter()
    fail = fn(*args)
    elapsed = time.perf_counter() - t0
    assert fail < 0, "benchmark configuration blew up"
    return paths * steps / elapsed / 1e6, q


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=512)
    ap.add_argument("--steps", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    if not HAVE_COMPILED:
        raise SystemExit("compiled extension not available; nothing to compare")

    fields = {
        "constant": FieldCatalog.constant(2.0),
        "sinusoidal": FieldCatalog.sinusoidal(2.0, 0.5, [1.0]),
    }
    bf = drift_tuple(zero_drift(1))

    total = args.paths * args.steps / 1e6
    print(f"{args.paths} paths x {args.steps} steps per kernel "
          f"({total:.1f}M path-steps)")
    print(f"{'kernel':28s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for fname, field in fields.items():
        lam = field_tuple(field)
        for kname in ("em", "heun", "ou-pair"):
            fast, qf = _run(backend(0, True), kname, lam, bf,
                            args.paths, args.steps, args.seed)
            slow, qs = _run(backend(0, False), kname, lam, bf,
                            args.paths, args.steps, args.seed)
            assert np.allclose(qf, qs, rtol=1e-8, atol=1e-10), \
                "backends diverged on the benchmark probe"
            label = f"{kname} / {fname}"
            print(f"{label:28s} {fast:8.1f}Ms {slow:8.2f}Ms {fast / slow:7.1f}x")


if __name__ == "__main__":
    main()
