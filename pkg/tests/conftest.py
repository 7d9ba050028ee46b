"""Shared fixtures: the production-scale operator, a tiny fast scene, and a
session-scoped desk-scale CLI pipeline run used by the acceptance checks."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from radarqi.config import ExperimentConfig, apply_fast_profile
from radarqi.fista import ImagingOperator
from radarqi.harness import build_scene


def finite_difference_grad(fn, x, h=1e-5):
    """Central finite differences of a scalar function of one array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    g = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn(x)
        flat[i] = orig - h
        down = fn(x)
        flat[i] = orig
        g[i] = (up - down) / (2.0 * h)
    return grad


def relative_grad_error(analytic, numeric, floor=1e-10):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


@pytest.fixture(scope="session")
def table1_scene():
    cfg = ExperimentConfig()
    grid, array, sweep, matrix = build_scene(cfg)
    return cfg, grid, array, sweep, matrix


@pytest.fixture(scope="session")
def table1_op(table1_scene):
    _, _, _, _, matrix = table1_scene
    return ImagingOperator(matrix)


@pytest.fixture(scope="session")
def small_scene():
    """Reduced problem for fast solver/model tests: 100 cells, 30 samples."""
    cfg = ExperimentConfig(
        side_cells=10,
        cell_size_m=0.01,
        n_antennas=3,
        n_freqs=10,
        n_blocks=6,
        train_size=24,
        val_size=8,
        test_size=8,
        epochs=2,
        batch_size=8,
    )
    grid, array, sweep, matrix = build_scene(cfg)
    return cfg, grid, array, sweep, matrix


def run_cli(args, cwd):
    """Invoke the installed CLI in a subprocess; returns CompletedProcess."""
    return subprocess.run(
        [sys.executable, "-m", "radarqi.cli", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
    )


def run_fast_pipeline(workdir: Path, out_name: str):
    """synth + train --fast + eval, as the CLI contract specifies."""
    out = workdir / out_name
    steps = [
        ["synth", "--fast", "--out-dir", str(out), "--split", "test"],
        ["train", "--fast", "--out-dir", str(out)],
        [
            "eval",
            "--fast",
            "--out-dir",
            str(out),
            "--echoes",
            str(out / "echoes_test.bin"),
        ],
    ]
    for step in steps:
        proc = run_cli(step, workdir)
        assert proc.returncode == 0, f"{step} failed:\n{proc.stdout}\n{proc.stderr}"
    return out


@pytest.fixture(scope="session")
def fast_run(tmp_path_factory):
    """First full desk-scale pipeline run; reused by several criteria."""
    workdir = tmp_path_factory.mktemp("pipeline")
    return workdir, run_fast_pipeline(workdir, "run1")
