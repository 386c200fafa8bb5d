import hashlib
import importlib
import json
import os
import pytest

import numpy as np
import pandas as pd

from ioduality import cli
from ioduality.report import read_sweep_csv

DISK_CONFIG = """
geometry.obstacle.shape = circle
geometry.obstacle.radius = 1.0
geometry.source.center = [2.0, 0.0]
geometry.source.radius = 0.3
problem.kind = {kind}
sweep.interval = {interval}
sweep.step = {step}
"""


def _write_config(
    tmp_path, name="run.conf", kind="dirichlet", interval="[5.5, 6.1]", step=0.02, extra=""
):
    path = tmp_path / name
    path.write_text(DISK_CONFIG.format(kind=kind, interval=interval, step=step) + extra)
    return str(path)


def _read(path):
    with open(path, "rb") as IN:
        return IN.read()


def test_oracle(tmp_path, capsys):
    config = _write_config(tmp_path, interval="[2, 16]")
    out = str(tmp_path / "out")
    assert cli.main(["oracle", "--config", config, "--out", out]) == cli.EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    lams = [e["lam"] for e in payload["eigenvalues"]]
    np.testing.assert_allclose(lams, [5.7832, 14.6819], atol=1e-4)
    assert os.path.exists(os.path.join(out, "oracle.json"))


def test_oracle_needs_disk(tmp_path):
    path = tmp_path / "kite.conf"
    path.write_text("geometry.obstacle.shape = kite\ngeometry.source.center = [3.0, 0.0]\n")
    assert cli.main(["oracle", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_config_errors(tmp_path):
    repeated = _write_config(tmp_path, name="repeated.conf", extra="problem.kind = neumann\n")
    assert cli.main(["sweep", "--config", repeated, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    bad = _write_config(tmp_path, name="bad.conf", extra="geometry.source.radius_x = 1\n")
    assert cli.main(["sweep", "--config", bad, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.conf")]) == cli.EXIT_CONFIG
    path = tmp_path / "overlap.conf"
    path.write_text("geometry.source.center = [1.1, 0.0]\n")
    assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_GEOMETRY


def test_detect(tmp_path):
    config = _write_config(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["detect", "--config", config, "--out", str(out)]) == cli.EXIT_OK
    payload = json.loads((out / "detections.json").read_text())
    assert payload["header"]["sigma"] == 1
    (det,) = payload["detections"]
    assert abs(det["lambda_hat"] - 5.7832) <= 1e-3
    assert det["side"] == "below"
    assert any("nearest oracle eigenvalue" in note for note in det["notes"])
    assert (out / "sweep.svg").exists()
    frame = read_sweep_csv(out / "sweep.csv")
    assert list(frame.columns) == [
        "lambda",
        "phi",
        "psi",
        "n_retained_eigs",
        "min_eigphase",
        "skipped",
    ]
    assert len(frame) == 31
    assert not frame["skipped"].any()


def test_sweep_is_deterministic(tmp_path):
    config = _write_config(tmp_path, interval="[4.0, 4.5]", step=0.05)
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert cli.main(["sweep", "--config", config, "--out", str(serial)]) == cli.EXIT_OK
    args = ["sweep", "--config", config, "--out", str(parallel), "--parallel", "2"]
    assert cli.main(args) == cli.EXIT_OK
    assert _read(serial / "sweep.csv") == _read(parallel / "sweep.csv")
    assert _read(serial / "sweep.svg") == _read(parallel / "sweep.svg")


def test_warm_cache_skips_forward_solves(tmp_path, monkeypatch):
    config = _write_config(tmp_path, interval="[4.0, 4.2]", step=0.05)
    cache = str(tmp_path / "cache")
    cold, warm = tmp_path / "cold", tmp_path / "warm"
    args = ["sweep", "--config", config, "--cache", cache, "--no-plot"]
    assert cli.main(args + ["--out", str(cold)]) == cli.EXIT_OK

    def no_solve(*args, **kwargs):
        raise AssertionError("forward solve on a warm cache")

    sweep_module = importlib.import_module("ioduality.duality.sweep")
    monkeypatch.setattr(sweep_module, "assemble_core", no_solve)
    assert cli.main(args + ["--out", str(warm)]) == cli.EXIT_OK
    assert _read(cold / "sweep.csv") == _read(warm / "sweep.csv")
    assert not (warm / "sweep.svg").exists()


def test_validate(tmp_path):
    config = _write_config(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["validate", "--config", config, "--out", str(out)]) == cli.EXIT_OK
    payload = json.loads((out / "validation.json").read_text())
    assert payload["passed"]
    names = [c["name"] for c in payload["checks"]]
    assert names == [
        "two_route_factorization",
        "jump_sign",
        "farfield_phase",
        "quadrature_convergence",
    ]
    assert all(c["status"] == "pass" for c in payload["checks"])


def test_validate_flipped_sign(tmp_path):
    config = _write_config(tmp_path)
    out = tmp_path / "out"
    args = ["validate", "--config", config, "--out", str(out), "--flip-sign"]
    assert cli.main(args) == cli.EXIT_VALIDATION
    payload = json.loads((out / "validation.json").read_text())
    statuses = {c["name"]: c["status"] for c in payload["checks"]}
    assert statuses["two_route_factorization"] == "fail"
    assert statuses["jump_sign"] == "pass"


def test_validate_kite(tmp_path):
    path = tmp_path / "kite.conf"
    path.write_text("geometry.obstacle.shape = kite\ngeometry.source.center = [3.0, 0.0]\n")
    out = tmp_path / "out"
    assert cli.main(["validate", "--config", str(path), "--out", str(out)]) == cli.EXIT_OK
    statuses = {
        c["name"]: c["status"] for c in json.loads((out / "validation.json").read_text())["checks"]
    }
    assert statuses["two_route_factorization"] == "skipped (non-disk)"
    assert statuses["farfield_phase"] == "skipped (non-disk)"


def test_synthesize(tmp_path):
    config = _write_config(tmp_path, extra="synthesis.lam = 2.89\n")
    out = tmp_path / "out"
    assert cli.main(["synthesize", "--config", config, "--out", str(out)]) == cli.EXIT_OK
    residuals = pd.read_csv(out / "synthesis_residuals.csv", comment="#")
    np.testing.assert_allclose(residuals["alpha"], [1e-2, 1e-4, 1e-6, 1e-8, 1e-10], rtol=1e-15)
    probe = pd.read_csv(out / "density_probe.csv", comment="#")
    assert np.all(np.diff(probe["residual"]) < 0)
    psi = pd.read_csv(out / "synthesis_psi.csv", comment="#")
    assert len(psi) == 5 * 64

    phi = tmp_path / "phi.csv"
    pd.DataFrame({"re": np.ones(10), "im": np.zeros(10)}).to_csv(phi, index=False)
    args = ["synthesize", "--config", config, "--out", str(out), "--phi", str(phi)]
    assert cli.main(args) == cli.EXIT_CONFIG


def test_validate_exceptional_lambda(tmp_path):
    # first Dirichlet eigenvalue of the unit disk, a pole of the interior DtN map
    config = _write_config(tmp_path, extra="validate.lam = 5.783185962946784\n")
    out = tmp_path / "out"
    assert cli.main(["validate", "--config", config, "--out", str(out)]) == cli.EXIT_VALIDATION
    payload = json.loads((out / "validation.json").read_text())
    assert not payload["passed"]
    checks = {c["name"]: c for c in payload["checks"]}
    assert checks["two_route_factorization"]["status"] == "fail"
    assert "PoleError" in checks["two_route_factorization"]["detail"]["error"]
    assert checks["jump_sign"]["status"] == "pass"


def test_synthesize_records_density_hash(tmp_path):
    config = _write_config(tmp_path, extra="synthesis.lam = 2.89\n")
    out = tmp_path / "out"
    phi = tmp_path / "phi.csv"
    t = 2 * np.pi * np.arange(64) / 64
    pd.DataFrame({"re": 1 + 0.5 * np.cos(t), "im": np.zeros(64)}).to_csv(phi, index=False)
    args = ["synthesize", "--config", config, "--out", str(out), "--phi", str(phi)]
    assert cli.main(args) == cli.EXIT_OK
    digest = hashlib.sha256(phi.read_bytes()).hexdigest()
    lines = (out / "synthesis_residuals.csv").read_text().splitlines()
    assert f"# phi_sha256: {digest}" in lines


@pytest.mark.parametrize("command", ["sweep", "detect", "validate", "oracle", "synthesize"])
def test_help(command, capsys):
    with pytest.raises(SystemExit) as cm:
        cli.main([command, "--help"])
    assert cm.value.code == 0
    assert "--config" in capsys.readouterr().out
