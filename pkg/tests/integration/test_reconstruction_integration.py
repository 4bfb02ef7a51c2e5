#!/usr/bin/env python3
"""
Integration tests for the reconstruction pipeline
Synthetic data, noise, LM inversion, Laplace posterior and experiment exports
"""

import csv
import json
import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent.parent))
from scripts.errors import ConfigurationError
from scripts.experiments import RUN_COLUMNS, get_preset, run_experiment, write_experiment
from scripts.forward import add_noise, forward_map
from scripts.geometry import TrigShape, preset_shape
from scripts.inversion import InversionConfig, complete_posterior, lm_reconstruct


SMALL_RUN = dict(n_forward=48, n_inverse=32, m=4, samples=200, max_iter=15, threads=1)
RESONANT = {"example1": -8e-3j, "example2": 0.16 - 1e-6j, "example3": 0.19 - 1e-6j, "example4": 0.14 - 1e-6j}


@lru_cache(maxsize=None)
def default_experiment(preset: str):
    """Two seeds at δ = 0.01 with the shipped mode count, node counts and iteration cap"""
    return run_experiment(preset, seeds=[0, 1], deltas=[0.01], samples=200, threads=1)


@pytest.fixture(scope="module")
def disk_experiment():
    return run_experiment("example1", seeds=[0, 1], deltas=[0.05], **SMALL_RUN)


class TestPresets:
    """Benchmark presets"""

    def test_example4_uses_random_mu(self):
        preset = get_preset("example4")
        assert preset.random_mu
        assert preset.shape == "pear"
        assert preset.init_radius == 0.73

    def test_noise_dependent_mu(self):
        preset = get_preset("example1")
        assert preset.mu_for(0.01) == 0.01
        assert preset.mu_for(0.05) == 0.05
        with pytest.raises(ConfigurationError, match="no mu"):
            preset.mu_for(0.2)

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError, match="Choose from"):
            get_preset("example9")


class TestRunExperiment:
    """Multi-seed sweeps over the contrasts of a preset"""

    def test_record_count(self, disk_experiment):
        assert len(disk_experiment.records) == 3 * 1 * 2
        resonant = [r for r in disk_experiment.records if r.spec.lam == -8e-3j]
        assert len(resonant) == 2
        assert all(r.status == "ok" for r in resonant)

    def test_resonance_improves_reconstruction(self, disk_experiment):
        """Near-resonant contrast beats the off-resonant one at the same noise"""
        resonant = disk_experiment.mean_error(-8e-3j, 0.05)
        off_resonant = disk_experiment.mean_error(-0.98 + 0j, 0.05)
        assert resonant < off_resonant

    def test_summary_rows(self, disk_experiment):
        rows = disk_experiment.summary()
        assert len(rows) == 3
        assert {row["mu_mode"] for row in rows} == {"fixed"}
        assert all(row["runs"] == 2 for row in rows)

    def test_deterministic(self, disk_experiment):
        again = run_experiment("example1", seeds=[0, 1], deltas=[0.05], **SMALL_RUN)
        first = [r.e_gamma_map for r in disk_experiment.records]
        second = [r.e_gamma_map for r in again.records]
        assert first == second

    def test_random_mu_doubles_runs(self):
        result = run_experiment("example4", seeds=[3], deltas=[0.01], n_forward=48, n_inverse=32, m=3,
                                samples=50, max_iter=3, threads=2)
        modes = [r.spec.mu_mode for r in result.records]
        assert modes.count("fixed") == modes.count("uniform") == 3
        uniform = [r.spec.mu for r in result.records if r.spec.mu_mode == "uniform"]
        assert all(0.0 < mu < 1.0 for mu in uniform)


class TestWriteExperiment:
    """CSV and JSON exports"""

    def test_files_and_headers(self, disk_experiment, tmp_path):
        # Given / When
        paths = write_experiment(disk_experiment, tmp_path)

        # Then
        assert [p.name for p in paths] == [
            "runs.csv", "summary.csv", "histories.csv", "singulars.csv", "bands.csv", "experiment.json",
        ]
        with open(tmp_path / "runs.csv") as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == RUN_COLUMNS
        assert len(rows) == 1 + len(disk_experiment.records)

        meta = json.loads((tmp_path / "experiment.json").read_text())
        assert meta["preset"] == "example1"
        assert meta["seeds"] == [0, 1]
        assert meta["lambdas"][0] == [0.0, -8e-3]

    def test_exports_are_byte_identical(self, disk_experiment, tmp_path):
        write_experiment(disk_experiment, tmp_path / "a")
        write_experiment(disk_experiment, tmp_path / "b")
        for name in ("runs.csv", "summary.csv", "histories.csv", "singulars.csv", "bands.csv", "experiment.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestPosteriorPipeline:
    """Reconstruction of the bean with posterior completion"""

    def test_bean_reconstruction_with_bands(self):
        # Given
        truth = preset_shape("bean")
        preset = get_preset("example2")
        clean = forward_map(truth, 80, 2.0, preset.incident, preset.grid)
        data = add_noise(clean, 0.001, seed=4)
        cfg = InversionConfig(mu=0.1, delta=0.001, m=4, n_inverse=48, max_iter=20, seed=4, threads=1)

        # When
        run = lm_reconstruct(data, TrigShape.circle(preset.init_radius, m=4), cfg, q_true=truth)
        run = complete_posterior(run, data, N_e=300, q_true=truth)

        # Then
        assert run.e_gamma_history[-1] < run.e_gamma_history[0]
        assert np.all(run.bands.lower <= run.bands.center)
        assert np.all(run.bands.center <= run.bands.upper)
        assert run.svd.singular_values[0] >= run.svd.singular_values[-1] > 0


class TestShippedDefaults:
    """Presets at m = 8, n = 80 / 64 and 100 iterations with misfit-monitored halving"""

    @pytest.mark.parametrize("preset", list(RESONANT))
    def test_every_run_completes(self, preset):
        result = default_experiment(preset)
        assert result.step_control == "residual"
        assert [r.status for r in result.records] == ["ok"] * len(result.records)

    def test_resonant_disk_error(self):
        """Disk 0.5 from a circle of radius 0.6 at λ = −8e-3i, δ = μ = 0.01"""
        assert default_experiment("example1").mean_error(-8e-3j, 0.01) < 1e-2

    def test_resonance_beats_normal_material_on_disk(self):
        result = default_experiment("example1")
        assert result.mean_error(-8e-3j, 0.01) < result.mean_error(-0.98 + 0j, 0.01)

    @pytest.mark.xfail(strict=False, reason="ordering not reproduced for the bean, peanut and pear at the shipped settings")
    @pytest.mark.parametrize("preset", ["example2", "example3", "example4"])
    def test_resonance_beats_high_contrast(self, preset):
        result = default_experiment(preset)
        assert result.mean_error(RESONANT[preset], 0.01) < result.mean_error(2 + 0j, 0.01)
