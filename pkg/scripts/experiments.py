#!/usr/bin/env python3
"""
Benchmark reconstruction experiments: presets, multi-seed sweeps and
deterministic CSV/JSON exports
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import resolve_threads
from .errors import ConfigurationError, PlasmoshapeError
from .forward import (
    DEFAULT_FORWARD_NODES,
    DEFAULT_MEASUREMENT_RADIUS,
    DEFAULT_MEASUREMENTS,
    IncidentField,
    MeasurementGrid,
    add_noise,
    forward_map,
)
from .geometry import DEFAULT_MODES, TrigShape, preset_shape
from .inversion import (
    DEFAULT_INVERSE_NODES,
    InversionConfig,
    complete_posterior,
    lm_reconstruct,
    random_mu,
)
from .io_utils import write_rows

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = 16
DEFAULT_DELTAS = (0.01, 0.05)
DEFAULT_EXPERIMENT_SAMPLES = 10000


@dataclass(frozen=True)
class ExperimentPreset:
    """One benchmark inclusion with its contrasts and regularization"""

    name: str
    shape: str
    init_radius: float
    lambdas: Tuple[complex, ...]
    mu: Union[float, Dict[float, float]]
    eps_m: Optional[float] = None
    deltas: Tuple[float, ...] = DEFAULT_DELTAS
    random_mu: bool = False
    step_control: str = "residual"
    grid_radius: float = DEFAULT_MEASUREMENT_RADIUS
    grid_count: int = DEFAULT_MEASUREMENTS
    incident: IncidentField = field(default_factory=IncidentField.linear)

    def mu_for(self, delta: float) -> float:
        if isinstance(self.mu, dict):
            if delta not in self.mu:
                raise ConfigurationError(f"Preset '{self.name}' has no mu for delta = {delta}")
            return self.mu[delta]
        return self.mu

    @property
    def grid(self) -> MeasurementGrid:
        return MeasurementGrid(radius=self.grid_radius, count=self.grid_count)


PRESETS: Dict[str, ExperimentPreset] = {
    "example1": ExperimentPreset(
        name="example1", shape="disk05", init_radius=0.6, eps_m=24.8,
        lambdas=(-8e-3j, 0.244 - 6.3e-3j, -0.98 + 0j),
        mu={0.01: 0.01, 0.05: 0.05},
    ),
    "example2": ExperimentPreset(
        name="example2", shape="bean", init_radius=0.72,
        lambdas=(0.16 - 1e-6j, 0.25 - 1e-6j, 2 + 0j), mu=0.1,
    ),
    "example3": ExperimentPreset(
        name="example3", shape="peanut", init_radius=0.78,
        lambdas=(0.19 - 1e-6j, 0.25 - 1e-6j, 2 + 0j), mu=0.05,
    ),
    "example4": ExperimentPreset(
        name="example4", shape="pear", init_radius=0.73,
        lambdas=(0.14 - 1e-6j, 0.25 - 1e-6j, 2 + 0j), mu=0.5, random_mu=True,
    ),
}


def get_preset(name: str) -> ExperimentPreset:
    if name not in PRESETS:
        raise ConfigurationError(f"Preset '{name}' not available. Choose from: {', '.join(PRESETS)}")
    return PRESETS[name]


@dataclass(frozen=True)
class RunSpec:
    lam: complex
    delta: float
    seed: int
    mu: float
    mu_mode: str


@dataclass
class RunRecord:
    """One row of the experiment table"""

    spec: RunSpec
    status: str
    e_gamma_map: Optional[float] = None
    e_gamma_mean: Optional[float] = None
    iterations: int = 0
    converged: bool = False
    band_mean_width: Optional[float] = None
    e_gamma_history: List[float] = field(default_factory=list)
    step_norms: List[float] = field(default_factory=list)
    singular_values: List[float] = field(default_factory=list)
    bands: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = None


@dataclass
class ExperimentResult:
    preset: ExperimentPreset
    seeds: List[int]
    records: List[RunRecord]
    step_control: str = "residual"

    def summary(self) -> List[Dict]:
        """Mean and std of e_γ(q_MAP) per (λ, δ, μ mode) over successful seeds"""
        groups: Dict[Tuple, List[RunRecord]] = {}
        for record in self.records:
            key = (record.spec.lam, record.spec.delta, record.spec.mu_mode)
            groups.setdefault(key, []).append(record)
        rows = []
        for (lam, delta, mu_mode), records in groups.items():
            errors = np.array([r.e_gamma_map for r in records if r.status == "ok"], dtype=float)
            rows.append({
                "lambda_re": lam.real,
                "lambda_im": lam.imag,
                "delta": delta,
                "mu_mode": mu_mode,
                "runs": len(records),
                "failed": sum(r.status != "ok" for r in records),
                "e_gamma_mean": float(np.mean(errors)) if errors.size else None,
                "e_gamma_std": float(np.std(errors)) if errors.size else None,
            })
        return rows

    def mean_error(self, lam: complex, delta: float, mu_mode: str = "fixed") -> float:
        for row in self.summary():
            if complex(row["lambda_re"], row["lambda_im"]) == lam and row["delta"] == delta and row["mu_mode"] == mu_mode:
                return row["e_gamma_mean"]
        raise ConfigurationError(f"No runs for λ = {lam}, δ = {delta}, mode {mu_mode}")


def _run_specs(preset: ExperimentPreset, seeds: Sequence[int], deltas: Sequence[float]) -> List[RunSpec]:
    specs = []
    for lam in preset.lambdas:
        for delta in deltas:
            for seed in seeds:
                specs.append(RunSpec(lam=lam, delta=delta, seed=seed, mu=preset.mu_for(delta), mu_mode="fixed"))
                if preset.random_mu:
                    specs.append(RunSpec(lam=lam, delta=delta, seed=seed, mu=random_mu(seed), mu_mode="uniform"))
    return specs


def _execute(preset: ExperimentPreset, spec: RunSpec, n_forward: int, n_inverse: int, m: int,
             samples: int, max_iter: int, step_control: str) -> RunRecord:
    truth = preset_shape(preset.shape)
    grid = preset.grid
    clean = forward_map(truth, n_forward, spec.lam, preset.incident, grid)
    data = add_noise(clean, spec.delta, spec.seed)
    cfg = InversionConfig(mu=spec.mu, delta=spec.delta, m=m, n_inverse=n_inverse,
                          seed=spec.seed, max_iter=max_iter, step_control=step_control, threads=1)
    try:
        run = lm_reconstruct(data, TrigShape.circle(preset.init_radius, m), cfg, q_true=truth)
        run = complete_posterior(run, data, N_e=samples, q_true=truth)
    except PlasmoshapeError as e:
        logger.warning("run λ=%s δ=%s seed=%d failed: %s", spec.lam, spec.delta, spec.seed, e)
        return RunRecord(spec=spec, status=type(e).__name__)
    bands = run.bands
    return RunRecord(
        spec=spec,
        status="ok",
        e_gamma_map=run.e_gamma_map,
        e_gamma_mean=run.e_gamma_mean,
        iterations=run.iterations,
        converged=run.converged,
        band_mean_width=bands.mean_width,
        e_gamma_history=list(run.e_gamma_history),
        step_norms=list(run.step_norms),
        singular_values=list(run.svd.singular_values),
        bands=(bands.t, bands.center, bands.lower, bands.upper),
    )


def run_experiment(preset: Union[str, ExperimentPreset], seeds: Sequence[int],
                   deltas: Optional[Sequence[float]] = None, n_forward: int = DEFAULT_FORWARD_NODES,
                   n_inverse: int = DEFAULT_INVERSE_NODES, m: int = DEFAULT_MODES,
                   samples: int = DEFAULT_EXPERIMENT_SAMPLES, max_iter: int = 100,
                   threads: Optional[int] = None, step_control: Optional[str] = None) -> ExperimentResult:
    """Synthesize, invert and score every (λ, δ, seed) combination of a preset.

    Presets halve steps on misfit growth unless step_control overrides it.
    """
    if isinstance(preset, str):
        preset = get_preset(preset)
    step_control = step_control or preset.step_control
    seeds = [int(s) for s in seeds]
    specs = _run_specs(preset, seeds, deltas or preset.deltas)
    logger.info("experiment %s: %d runs, %s step control", preset.name, len(specs), step_control)

    def execute(spec: RunSpec) -> RunRecord:
        return _execute(preset, spec, n_forward, n_inverse, m, samples, max_iter, step_control)

    workers = resolve_threads(threads)
    if workers == 1:
        records = [execute(spec) for spec in specs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(execute, specs))
    return ExperimentResult(preset=preset, seeds=seeds, records=records, step_control=step_control)


RUN_COLUMNS = ("run", "lambda_re", "lambda_im", "delta", "mu", "mu_mode", "seed", "status",
               "e_gamma_map", "e_gamma_mean", "iterations", "converged", "band_mean_width")


def write_experiment(result: ExperimentResult, out_dir: Union[str, Path]) -> List[Path]:
    """runs.csv, summary.csv, histories.csv, singulars.csv, bands.csv and experiment.json"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = result.records

    runs = [(i, r.spec.lam.real, r.spec.lam.imag, r.spec.delta, r.spec.mu, r.spec.mu_mode, r.spec.seed,
             r.status, r.e_gamma_map, r.e_gamma_mean, r.iterations, r.converged, r.band_mean_width)
            for i, r in enumerate(records)]
    histories = [(i, k, e, r.step_norms[k - 1] if k > 0 else None)
                 for i, r in enumerate(records) for k, e in enumerate(r.e_gamma_history)]
    singulars = [(i, k + 1, s) for i, r in enumerate(records) for k, s in enumerate(r.singular_values)]
    bands = [(i, t, c, lo, hi) for i, r in enumerate(records) if r.bands is not None
             for t, c, lo, hi in zip(*r.bands)]
    summary = result.summary()

    paths = [out / name for name in ("runs.csv", "summary.csv", "histories.csv", "singulars.csv",
                                     "bands.csv", "experiment.json")]
    write_rows(paths[0], RUN_COLUMNS, runs)
    summary_columns = list(summary[0].keys()) if summary else []
    write_rows(paths[1], summary_columns, [[row[c] for c in summary_columns] for row in summary])
    write_rows(paths[2], ("run", "iteration", "e_gamma", "step_norm"), histories)
    write_rows(paths[3], ("run", "index", "singular_value"), singulars)
    write_rows(paths[4], ("run", "t", "q_map", "lower", "upper"), bands)

    preset = result.preset
    metadata = {
        "preset": preset.name,
        "shape": preset.shape,
        "init_radius": preset.init_radius,
        "eps_m": preset.eps_m,
        "lambdas": [[lam.real, lam.imag] for lam in preset.lambdas],
        "seeds": result.seeds,
        "step_control": result.step_control,
        "runs": len(records),
        "summary": summary,
    }
    with open(paths[5], "w") as f:
        json.dump(metadata, f, indent=2, sort_keys=True)
    return paths
