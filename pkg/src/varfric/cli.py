"""Batch front end: flat key=value experiment configs, a registry of named
recipes, and a deterministic output layout.

A config names one experiment in a bracketed header and sets typed keys::

    [sk-constant]
    # classical constant-friction sanity check
    n_paths = 10000
    seed = 7

Unknown keys, missing required keys, and type mismatches are hard errors
with line numbers.  Every recipe writes CSV artifacts plus a ``manifest.json``
carrying the resolved config, timestamps, and content digests; reruns with
the same config and seed reproduce the CSV digests bit-for-bit regardless
of worker count.  The process exit status encodes the recipe's assertion
checks (0 iff all pass).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .diagnose import gamma_gap, write_rows_csv
from .gendiff1d import (
    averaging_check,
    compute_scale_speed,
    exit_stats_analytic,
    glued_exit_probability,
    simulate_gendiff,
    write_exit_csv,
)
from .homogenize import (
    TorusGrid,
    effective_coefficients,
    invariant_density_residual,
    solve_cell,
)
from .integrate import simulate_langevin_white
from .model import (
    PIECEWISE_CONSTANT,
    DriftField,
    FieldCatalog,
    FrictionField,
    ModelSpec,
    constant_drift,
    zero_drift,
)
from .noise import sample_wiener
from .stats import (
    SweepPlan,
    build_ensemble,
    ito_strat_correction,
    mass_distance_statistic,
    paired_terminal_error,
    paired_terminal_mean_gap,
    run_sweep,
    width_distance_statistic,
)

_SIN_Q = 1.0 / (2.0 * math.pi)   # wavenumber turning sin(2*pi*k*q) into sin(q)


class ConfigError(ValueError):
    """Malformed experiment configuration."""


# ---------------------------------------------------------------------------
# typed values
# ---------------------------------------------------------------------------

def _cast_int(s: str) -> int:
    f = float(s)
    if f != int(f):
        raise ValueError("not an integer")
    return int(f)


def _cast_float(s: str) -> float:
    return float(s)


def _cast_float_list(s: str) -> tuple[float, ...]:
    vals = tuple(float(tok) for tok in s.split(",") if tok.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _cast_str(s: str) -> str:
    return s


def parse_field(s: str) -> FrictionField:
    """Friction catalog strings: constant(c), sinusoidal(c0,c1,k...),
    tanh_ramp(lo,hi,w), step(l1,l2), clipped_linear(center,slope,radius)."""
    s = s.strip()
    if "(" not in s or not s.endswith(")"):
        raise ValueError(f"malformed field {s!r}")
    name, rest = s.split("(", 1)
    args = [float(tok) for tok in rest[:-1].split(",") if tok.strip()]
    name = name.strip()
    if name == "constant" and len(args) == 1:
        return FieldCatalog.constant(*args)
    if name == "sinusoidal" and len(args) >= 3:
        return FieldCatalog.sinusoidal(args[0], args[1], args[2:])
    if name == "tanh_ramp" and len(args) == 3:
        return FieldCatalog.tanh_ramp(*args)
    if name == "step" and len(args) == 2:
        return FieldCatalog.step(*args)
    if name == "clipped_linear" and len(args) == 3:
        return FieldCatalog.clipped_linear(*args)
    raise ValueError(f"unknown field {s!r}")


def parse_drift(s: str) -> DriftField:
    s = s.strip()
    if s == "zero":
        return zero_drift(1)
    if s.startswith("constant(") and s.endswith(")"):
        vals = [float(tok) for tok in s[len("constant("):-1].split(",")]
        return constant_drift(vals)
    raise ValueError(f"unknown drift {s!r}")


_CASTERS: dict[str, Callable[[str], object]] = {
    "int": _cast_int,
    "float": _cast_float,
    "float_list": _cast_float_list,
    "str": _cast_str,
    "field": parse_field,
    "drift": parse_drift,
}

_COMMON_SCHEMA = {
    "seed": ("int", 1234),
    "out": ("str", "runs"),
    "workers": ("int", 1),
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    params: dict
    raw: dict
    seed: int
    out_dir: str
    workers: int


@dataclass(frozen=True)
class RunManifest:
    experiment: str
    config: dict
    seed: int
    started: str
    finished: str
    artifacts: dict
    checks: dict
    version: str
    out_dir: str

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_config(text: str) -> RunConfig:
    """Parse the flat key=value format; all keys validated against the
    experiment's schema, with defaults applied."""
    experiment = None
    seen: dict[str, tuple[object, int]] = {}
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            if experiment is not None:
                raise ConfigError(f"line {lineno}: more than one experiment section")
            experiment = stripped[1:-1].strip()
            if experiment not in RECIPES:
                raise ConfigError(
                    f"line {lineno}: unknown experiment {experiment!r}; "
                    f"known: {', '.join(sorted(RECIPES))}")
            continue
        if experiment is None:
            raise ConfigError(f"line {lineno}: expected [experiment] header first")
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        recipe = RECIPES[experiment]
        schema = {**_COMMON_SCHEMA, **recipe.schema}
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for "
                              f"experiment {experiment!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        type_name = schema[key][0]
        try:
            parsed = _CASTERS[type_name](value)
        except ValueError as exc:
            raise ConfigError(
                f"line {lineno}: key {key!r} expects {type_name}: {exc}") from exc
        if key == "lambda" and RECIPES[experiment].integrator and \
                isinstance(parsed, FrictionField) and \
                parsed.smoothness == PIECEWISE_CONSTANT:
            raise ConfigError(f"line {lineno}: step friction unsupported by "
                              "integrators")
        seen[key] = (parsed, lineno)
        raw[key] = value
    if experiment is None:
        raise ConfigError("config names no experiment")
    recipe = RECIPES[experiment]
    schema = {**_COMMON_SCHEMA, **recipe.schema}
    params: dict[str, object] = {}
    for key, (type_name, default) in schema.items():
        if key in seen:
            params[key] = seen[key][0]
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} for "
                              f"experiment {experiment!r}")
        else:
            params[key] = _CASTERS[type_name](default) \
                if isinstance(default, str) and type_name in ("field", "drift") \
                else default
            raw.setdefault(key, str(default))
    return RunConfig(experiment=experiment, params=params, raw=raw,
                     seed=params["seed"], out_dir=params["out"],
                     workers=params["workers"])


_REQUIRED = object()


# ---------------------------------------------------------------------------
# recipe helpers
# ---------------------------------------------------------------------------

def _write_checks_csv(fname, rows: list[tuple[str, float, float, bool]]) -> None:
    """rows of (check, value, threshold, passed)."""
    with open(fname, "w", newline="") as f:
        f.write("check,value,threshold,passed\n")
        for name, value, threshold, passed in rows:
            f.write(f"{name},{value!r},{threshold!r},{passed}\n")


def _terminal_variance_langevin(spec: ModelSpec, h: float, n_paths: int,
                                seed: int) -> tuple[float, float]:
    """Var(q_T) of the white-noise Langevin ensemble with its MC standard
    error, streamed one path at a time."""
    finals = np.empty(n_paths)
    for sid in range(n_paths):
        path = sample_wiener(spec.d, spec.T, h, seed, sid)
        finals[sid] = simulate_langevin_white(spec, path, h).q_final[0]
    var = float(finals.var(ddof=1))
    return var, var * math.sqrt(2.0 / (n_paths - 1))


def _gendiff_grid(a: float, b: float, n_cells: int) -> np.ndarray:
    """Uniform grid on [-a, b] whose nodes contain the origin."""
    n_left = int(round(n_cells * a / (a + b)))
    n_right = n_cells - n_left
    if n_left < 1 or n_right < 1:
        raise ConfigError("interval/grid combination puts no cells on one side")
    return np.concatenate([np.linspace(-a, 0.0, n_left + 1)[:-1],
                           np.linspace(0.0, b, n_right + 1)])


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------

def _recipe_sk_constant(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    spec = ModelSpec(d=1, friction=p["lambda"], drift=zero_drift(1),
                     sigma=p["sigma"], mu=p["mu"], T=p["T"])
    var, se = _terminal_variance_langevin(spec, p["h"], p["n_paths"], cfg.seed)
    lam0 = p["lambda"](np.zeros(1))
    target = p["T"] * p["sigma"] ** 2 / lam0 ** 2
    ok = abs(var - target) <= 4.0 * se
    _write_checks_csv(out / "variance.csv",
                      [("terminal_variance", var, target, ok),
                       ("std_error", se, 4.0 * se, True)])
    return {"variance_within_4se": ok}


def _recipe_sk_fails_variable(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    mus = list(p["mu_list"])
    base = ModelSpec(d=1, friction=p["lambda"], drift=zero_drift(1),
                     sigma=1.0, T=p["T"])
    rows_v = gamma_gap(base, mus, p["n_paths"], p["T"], cfg.seed,
                       workers=cfg.workers)
    rows_c = gamma_gap(base.with_(friction=p["control"]), mus, p["n_paths"],
                       p["T"], cfg.seed, workers=cfg.workers)
    write_rows_csv(out / "gamma_gap_variable.csv", rows_v, "gamma_gap")
    write_rows_csv(out / "gamma_gap_control.csv", rows_c, "gamma_gap")
    floor = 0.5 * rows_v[0].estimate
    persists = all(r.estimate >= floor for r in rows_v[1:])
    decays = rows_c[0].estimate >= 10.0 * rows_c[-1].estimate
    return {"gap_persists_variable": persists, "gap_decays_control": decays}


def _recipe_regularized_mu(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    spec = ModelSpec(d=1, friction=p["lambda"], drift=zero_drift(1),
                     sigma=1.0, T=p["T"])
    stat = mass_distance_statistic(spec, delta=p["delta"],
                                   h=p["delta"] / 20.0, n_paths=p["n_paths"],
                                   seed=cfg.seed, workers=cfg.workers)
    plan = SweepPlan(parameter="mu", values=tuple(p["mu_list"]),
                     n_paths=p["n_paths"], statistic=stat,
                     description="coupled sup-distance, mollified Langevin "
                                 "vs smooth ODE, delta fixed")
    result = run_sweep(plan)
    result.to_csv(out / "sup_distance.csv")
    result.to_json(out / "sweep.json", seed=cfg.seed)
    return {"sup_distance_decreasing": bool(result.decreasing_trend)}


def _recipe_regularized_delta(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    spec = ModelSpec(d=1, friction=p["lambda"], drift=zero_drift(1),
                     sigma=1.0, T=p["T"])
    stat = width_distance_statistic(spec, lambda d: d / 20.0,
                                    n_paths=p["n_paths"], seed=cfg.seed,
                                    workers=cfg.workers)
    plan = SweepPlan(parameter="delta", values=tuple(p["delta_list"]),
                     n_paths=p["n_paths"], statistic=stat,
                     description="coupled sup-distance, smooth ODE vs "
                                 "Stratonovich SDE")
    result = run_sweep(plan)
    result.to_csv(out / "sup_distance.csv")
    result.to_json(out / "sweep.json", seed=cfg.seed)
    rows = []
    for delta in p["delta_list"]:
        h = delta / 20.0
        sp = spec.with_(delta=delta)
        ens_a = build_ensemble(sp, "smooth-limit-ode", h, p["n_paths"],
                               cfg.seed, workers=cfg.workers)
        ens_b = build_ensemble(sp, "stratonovich-limit", h, p["n_paths"],
                               cfg.seed, workers=cfg.workers)
        rows.append(paired_terminal_error(ens_a, ens_b)
                    + paired_terminal_mean_gap(ens_a, ens_b))
    with open(out / "terminal_error.csv", "w", newline="") as f:
        f.write("delta,terminal_error,error_se,terminal_mean_gap,gap_se\n")
        for delta, (err, ese, gap, gse) in zip(p["delta_list"], rows):
            f.write(f"{delta!r},{err!r},{ese!r},{gap!r},{gse!r}\n")
    # the weak (mean-functional) gap sits below the MC noise floor at every
    # delta, so the certified trend is the coupled terminal error
    err_dec = all(b[0] + 2.0 * b[1] < a[0] - 2.0 * a[1]
                  for a, b in zip(rows, rows[1:]))
    return {"sup_distance_decreasing": bool(result.decreasing_trend),
            "terminal_error_decreasing": err_dec}


def _recipe_ito_vs_strat(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    spec = ModelSpec(d=1, friction=p["lambda"], drift=zero_drift(1),
                     sigma=1.0, T=p["T"])
    chk = ito_strat_correction(spec, h=p["h"], n_paths=p["n_paths"],
                               seed=cfg.seed, workers=cfg.workers)
    ok = chk.gap <= 4.0 * chk.se_combined
    _write_checks_csv(out / "conversion.csv",
                      [("terminal_mean_difference", chk.diff_mean,
                        chk.correction_mean, ok),
                       ("gap", chk.gap, 4.0 * chk.se_combined, ok)])
    return {"conversion_matches_within_4se": ok}


def _recipe_gendiff_exit(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    a, b, x0 = p["a"], p["b"], p["x0"]
    grid = _gendiff_grid(a, b, p["n_cells"])
    ss = compute_scale_speed(zero_drift(1), p["lambda"], grid)
    ana = exit_stats_analytic(ss, a, b, x0)
    mc = simulate_gendiff(ss, x0, a, b, p["n_chains"], cfg.seed,
                          workers=cfg.workers)
    ok_p = abs(mc.p_right - ana.p_right) <= 4.0 * mc.se_p
    ok_t = abs(mc.mean_time - ana.mean_time) <= 0.02 * ana.mean_time
    write_exit_csv(out / "exit.csv",
                   [("p_right", ana.p_right, mc.p_right, mc.se_p),
                    ("mean_time", ana.mean_time, mc.mean_time, mc.se_time)])
    return {"exit_probability_within_4se": ok_p,
            "mean_time_within_2pct": ok_t}


def _recipe_glued_step(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    a, b = p["a"], p["b"]
    lam1, lam2 = p["lam1"], p["lam2"]
    analytic = glued_exit_probability(lam1, lam2, a, b)
    grid = _gendiff_grid(a, b, p["n_cells"])
    ss = compute_scale_speed(zero_drift(1), FieldCatalog.step(lam1, lam2), grid)
    quad = exit_stats_analytic(ss, a, b, 0.0)
    mc = simulate_gendiff(ss, 0.0, a, b, p["n_chains"], cfg.seed,
                          workers=cfg.workers)
    ok = abs(mc.p_right - analytic) <= 4.0 * mc.se_p
    write_exit_csv(out / "exit.csv",
                   [("p_right_glued", analytic, mc.p_right, mc.se_p),
                    ("p_right_quadrature", analytic, quad.p_right, 0.0)])
    return {"glued_probability_within_4se": ok,
            "quadrature_matches_glue": abs(quad.p_right - analytic) <= 1e-12}


def _recipe_averaging_1d(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    rows = averaging_check(list(p["eps_list"]), p["T"], p["n_paths"], cfg.seed,
                           lam_mean=p["lam_mean"], lam_amp=p["lam_amp"])
    target = p["T"] / p["lam_mean"] ** 2
    with open(out / "variance.csv", "w", newline="") as f:
        f.write("eps,terminal_variance,std_error,n_paths\n")
        for r in rows:
            f.write(f"{r.eps!r},{r.var_qT!r},{r.std_error!r},{r.n_paths}\n")
    ok = all(abs(r.var_qT - target) <= 0.05 * target for r in rows)
    return {"variance_within_5pct": ok}


def _recipe_homog_1d_sine(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    cell = solve_cell(p["lambda"], TorusGrid(1, p["n"]))
    eff = effective_coefficients(cell)
    eff.to_json(out / "effective.json")
    ok = abs(eff.a_bar[0, 0] - p["target"]) <= 1e-6
    return {"a_bar_matches_closed_form": ok}


def _recipe_homog_2d_separable(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    cell = solve_cell(p["lambda"], TorusGrid(2, p["n"]))
    eff = effective_coefficients(cell)
    eff.to_json(out / "effective.json")
    t22 = 0.5 / math.sqrt(3.0)
    return {
        "a11_matches": abs(eff.a_bar[0, 0] - 0.25) <= 1e-6,
        "a22_matches": abs(eff.a_bar[1, 1] - t22) <= 1e-5,
        "a12_vanishes": abs(eff.a_bar[0, 1]) <= 1e-8,
    }


def _recipe_invariant_density(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    ns = [int(n) for n in p["n_list"]]
    res = [invariant_density_residual(p["lambda"], TorusGrid(p["d"], n))
           for n in ns]
    with open(out / "residuals.csv", "w", newline="") as f:
        f.write("n,residual\n")
        for n, r in zip(ns, res):
            f.write(f"{n},{r!r}\n")
    ratios = [a / b for a, b in zip(res, res[1:])]
    ok = all(3.0 <= r <= 5.0 for r in ratios)
    return {"second_order_decay": ok}


def _recipe_cell_identity(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    ns = [int(n) for n in p["n_list"]]
    checks = {}
    rows = []
    for tag, fld in (("field_a", p["lambda_a"]), ("field_b", p["lambda_b"])):
        gaps = []
        for n in ns:
            eff = effective_coefficients(solve_cell(fld, TorusGrid(1, n)))
            gaps.append(eff.form_gap)
            rows.append((tag, n, eff.form_gap))
        ratios = [a / b for a, b in zip(gaps, gaps[1:])]
        checks[f"{tag}_gap_small"] = gaps[-1] <= 1e-6
        checks[f"{tag}_gap_shrinks_4x"] = all(3.0 <= r <= 5.0 for r in ratios)
    with open(out / "form_gap.csv", "w", newline="") as f:
        f.write("field,n,gap\n")
        for tag, n, gap in rows:
            f.write(f"{tag},{n},{gap!r}\n")
    return checks


@dataclass(frozen=True)
class Recipe:
    runner: Callable[[RunConfig, Path], dict]
    schema: dict
    integrator: bool
    summary: str


RECIPES: dict[str, Recipe] = {
    "sk-constant": Recipe(
        _recipe_sk_constant,
        {"lambda": ("field", "constant(2)"), "mu": ("float", 1e-4),
         "h": ("float", 1e-3), "T": ("float", 1.0), "sigma": ("float", 1.0),
         "n_paths": ("int", 10000)},
        True, "constant-friction small-mass sanity: Var(q_T) = T sigma^2/lam^2"),
    "sk-fails-variable": Recipe(
        _recipe_sk_fails_variable,
        {"lambda": ("field", "clipped_linear(2,1,1)"),
         "control": ("field", "constant(2)"),
         "mu_list": ("float_list", (1e-2, 1e-3, 1e-4)),
         "T": ("float", 1.0), "n_paths": ("int", 4000)},
        True, "gamma-gap persists for variable friction, vanishes for constant"),
    "regularized-limit-mu": Recipe(
        _recipe_regularized_mu,
        {"lambda": ("field", f"sinusoidal(2,0.5,{_SIN_Q!r})"),
         "delta": ("float", 0.05),
         "mu_list": ("float_list", (1e-2, 3e-3, 1e-3)),
         "T": ("float", 1.0), "n_paths": ("int", 1000)},
        True, "coupled sup-distance to the smooth ODE decreasing in the mass"),
    "regularized-limit-delta": Recipe(
        _recipe_regularized_delta,
        {"lambda": ("field", f"sinusoidal(2,0.5,{_SIN_Q!r})"),
         "delta_list": ("float_list", (0.1, 0.05, 0.025)),
         "T": ("float", 1.0), "n_paths": ("int", 1000)},
        True, "coupled sup-distance to the Stratonovich SDE decreasing in delta"),
    "ito-vs-strat": Recipe(
        _recipe_ito_vs_strat,
        {"lambda": ("field", f"sinusoidal(2,0.5,{_SIN_Q!r})"),
         "h": ("float", 1e-3), "T": ("float", 1.0), "n_paths": ("int", 20000)},
        True, "Stratonovich-vs-Ito terminal-mean gap equals the conversion drift"),
    "gendiff-exit": Recipe(
        _recipe_gendiff_exit,
        {"lambda": ("field", "constant(1)"), "a": ("float", 1.0),
         "b": ("float", 1.0), "x0": ("float", 0.0),
         "n_cells": ("int", 200), "n_chains": ("int", 4000)},
        False, "exit probability/time of the embedded chain vs closed forms"),
    "glued-step": Recipe(
        _recipe_glued_step,
        {"lam1": ("float", 1.0), "lam2": ("float", 2.0),
         "a": ("float", 1.0), "b": ("float", 1.0),
         "n_cells": ("int", 200), "n_chains": ("int", 4000)},
        False, "step-friction exit probability matches the flux-glue formula"),
    "averaging-1d": Recipe(
        _recipe_averaging_1d,
        {"eps_list": ("float_list", (1e-2,)), "T": ("float", 1.0),
         "n_paths": ("int", 10000), "lam_mean": ("float", 2.0),
         "lam_amp": ("float", 1.0)},
        True, "fast-oscillation variance matches T / mean(lam)^2"),
    "homog-1d-sine": Recipe(
        _recipe_homog_1d_sine,
        {"lambda": ("field", "sinusoidal(2,1,1)"), "n": ("int", 128),
         "target": ("float", 0.25)},
        False, "1-D cell solver reproduces the closed-form diffusivity"),
    "homog-2d-separable": Recipe(
        _recipe_homog_2d_separable,
        {"lambda": ("field", "sinusoidal(2,1,1,0)"), "n": ("int", 128)},
        False, "2-D separable cell solver matches quadrature oracles"),
    "invariant-density": Recipe(
        _recipe_invariant_density,
        {"lambda": ("field", "sinusoidal(2,1,1)"), "d": ("int", 1),
         "n_list": ("float_list", (32, 64, 128))},
        False, "discrete-adjoint residual of the density decays at second order"),
    "cell-form-identity": Recipe(
        _recipe_cell_identity,
        {"lambda_a": ("field", "sinusoidal(2,0.2,1)"),
         "lambda_b": ("field", "sinusoidal(3,0.25,2)"),
         "n_list": ("float_list", (32, 64, 128))},
        False, "the two effective-matrix quadrature routes agree and converge"),
}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _timestamp() -> str:
    return time.strftime("%Y%m%d-%H%M%S", time.gmtime())


def run(config: RunConfig, out_root: str | None = None) -> RunManifest:
    """Execute the configured recipe, write its artifacts and manifest."""
    recipe = RECIPES[config.experiment]
    root = Path(out_root if out_root is not None else config.out_dir)
    out = root / config.experiment / _timestamp()
    k = 0
    while out.exists():
        k += 1
        out = root / config.experiment / f"{_timestamp()}-{k}"
    out.mkdir(parents=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    checks = recipe.runner(config, out)
    finished = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    artifacts = {f.name: _sha256(f) for f in sorted(out.iterdir())
                 if f.name != "manifest.json"}
    manifest = RunManifest(experiment=config.experiment, config=dict(config.raw),
                           seed=config.seed, started=started, finished=finished,
                           artifacts=artifacts, checks={k: bool(v)
                                                        for k, v in checks.items()},
                           version=__version__, out_dir=str(out))
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest.__dict__, f, indent=2, sort_keys=True)
    return manifest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="varfric",
        description="variable-friction Langevin toolkit batch runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a config file")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", type=str, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    sub.add_parser("list", help="print the recipe registry")
    args = parser.parse_args(argv)

    if args.command == "list":
        for name in sorted(RECIPES):
            print(f"{name:24s} {RECIPES[name].summary}")
        return 0

    try:
        cfg = parse_config(args.config.read_text())
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = RunConfig(cfg.experiment, {**cfg.params, "seed": args.seed},
                        {**cfg.raw, "seed": str(args.seed)}, args.seed,
                        cfg.out_dir, cfg.workers)
    if args.workers is not None:
        cfg = RunConfig(cfg.experiment, {**cfg.params, "workers": args.workers},
                        {**cfg.raw, "workers": str(args.workers)}, cfg.seed,
                        cfg.out_dir, args.workers)
    manifest = run(cfg, out_root=args.out)
    for name, ok in manifest.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {manifest.experiment}:{name}")
    print(f"artifacts: {manifest.out_dir}")
    return 0 if manifest.ok else 1


if __name__ == "__main__":
    sys.exit(main())
