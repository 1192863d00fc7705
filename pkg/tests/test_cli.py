"""Config parsing, recipe orchestration, and artifact determinism."""

import json

import pytest

from varfric.cli import ConfigError, main, parse_config, parse_drift, parse_field, run
from varfric.model import PIECEWISE_CONSTANT


def test_parse_field_strings():
    f = parse_field("constant(2)")
    assert f([0.0]) == 2.0
    g = parse_field("sinusoidal(2,0.5,1)")
    assert g([0.25]) == pytest.approx(2.5)
    s = parse_field("step(1,2)")
    assert s.smoothness == PIECEWISE_CONSTANT
    with pytest.raises(ValueError):
        parse_field("nonsense(1)")


def test_parse_drift_strings():
    z = parse_drift("zero")
    assert z.bound == 0.0
    c = parse_drift("constant(0.5)")
    assert c([0.0])[0] == 0.5


def test_parse_config_defaults_and_overrides():
    cfg = parse_config("[sk-constant]\nseed = 99\n")
    assert cfg.experiment == "sk-constant"
    assert cfg.seed == 99
    assert cfg.workers == 1  # default applied


def test_parse_config_error_messages():
    with pytest.raises(ConfigError, match="expected \\[experiment\\] header"):
        parse_config("seed = 1\n")
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse_config("[no-such-thing]\n")
    with pytest.raises(ConfigError, match="line 2: unknown key"):
        parse_config("[sk-constant]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="line 3: duplicate key"):
        parse_config("[sk-constant]\nseed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="expects int"):
        parse_config("[sk-constant]\nseed = 1.5\n")
    with pytest.raises(ConfigError, match="names no experiment"):
        parse_config("# only a comment\n")


def test_parse_config_rejects_step_friction_for_integrators():
    with pytest.raises(ConfigError, match="step friction unsupported"):
        parse_config("[sk-constant]\nlambda = step(1,2)\n")
    # the exit-problem recipes accept it
    cfg = parse_config("[glued-step]\n")
    assert cfg.experiment == "glued-step"


def test_run_writes_manifest_and_checks(tmp_path):
    cfg = parse_config("[homog-1d-sine]\n")
    manifest = run(cfg, out_root=str(tmp_path))
    assert manifest.ok
    out = tmp_path / manifest.out_dir.split(str(tmp_path) + "/")[-1]
    meta = json.loads((out / "manifest.json").read_text())
    assert meta["experiment"] == "homog-1d-sine"
    assert meta["artifacts"]  # at least one artifact with a digest
    assert all(len(h) == 64 for h in meta["artifacts"].values())


def test_reruns_are_digest_identical(tmp_path):
    cfg = parse_config("[cell-form-identity]\n")
    m1 = run(cfg, out_root=str(tmp_path / "a"))
    m2 = run(cfg, out_root=str(tmp_path / "b"))
    assert m1.artifacts == m2.artifacts


def test_worker_count_does_not_change_artifacts(tmp_path):
    base = parse_config("[glued-step]\nn_chains = 400\n")
    multi = parse_config("[glued-step]\nn_chains = 400\nworkers = 3\n")
    m1 = run(base, out_root=str(tmp_path / "a"))
    m2 = run(multi, out_root=str(tmp_path / "b"))
    assert m1.artifacts == m2.artifacts


def test_main_list_and_run(tmp_path, capsys):
    assert main(["list"]) == 0
    listing = capsys.readouterr().out
    assert "sk-constant" in listing and "homog-1d-sine" in listing

    cfgfile = tmp_path / "job.cfg"
    cfgfile.write_text("[invariant-density]\n")
    assert main(["run", str(cfgfile), "--out", str(tmp_path / "runs")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_main_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[sk-constant]\nbogus = 1\n")
    assert main(["run", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err
