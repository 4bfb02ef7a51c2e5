#!/usr/bin/env python3
"""
Regularized Levenberg-Marquardt shape reconstruction and the Laplace
approximation of its posterior
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np
from scipy import linalg

from .errors import (
    ConfigurationError,
    CovarianceError,
    DivergenceError,
    DomainError,
    RegularizationRequiredError,
    StarShapeError,
    UndefinedPosteriorError,
)
from .forward import FarFieldData, ForwardModel
from .geometry import DEFAULT_MODES, StarShape, TrigShape, node_parameters
from .sensitivity import DEFAULT_FD_STEP, JACOBIAN_METHODS, jacobian

logger = logging.getLogger(__name__)

DEFAULT_INVERSE_NODES = 64
DEFAULT_SAMPLES = 10000
ERROR_QUADRATURE_POINTS = 1024
BAND_POINTS = 256
BAND_Z = 1.96
MAX_HALVINGS = 20
SINGULAR_TOL = 1e-12
STEP_CONTROLS = ("star", "residual")
STENCIL_MARGIN = 2.0
MIN_RADIUS_FRACTION = 0.01


@dataclass(frozen=True)
class InversionConfig:
    """Parameters of one reconstruction"""

    mu: float = 0.01
    delta: float = 0.0
    max_iter: int = 100
    eps_stop: float = 1e-5
    m: int = DEFAULT_MODES
    n_inverse: int = DEFAULT_INVERSE_NODES
    jacobian_method: str = "finite_difference"
    fd_step: float = DEFAULT_FD_STEP
    seed: Optional[int] = None
    parseval: bool = False
    max_halvings: int = MAX_HALVINGS
    step_control: str = "star"
    min_radius_fraction: float = MIN_RADIUS_FRACTION
    threads: Optional[int] = None

    def __post_init__(self):
        if self.mu < 0:
            raise ConfigurationError(f"mu must be non-negative, got {self.mu}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.m < 0:
            raise ConfigurationError(f"Mode count m must be non-negative, got {self.m}")
        if self.jacobian_method not in JACOBIAN_METHODS:
            raise ConfigurationError(
                f"Jacobian method '{self.jacobian_method}' not available. Choose from: {', '.join(JACOBIAN_METHODS)}"
            )
        if self.step_control not in STEP_CONTROLS:
            raise ConfigurationError(
                f"Step control '{self.step_control}' not available. Choose from: {', '.join(STEP_CONTROLS)}"
            )
        if not 0.0 <= self.min_radius_fraction < 1.0:
            raise ConfigurationError(f"min_radius_fraction must lie in [0, 1), got {self.min_radius_fraction}")

    def radius_floor(self, shape: StarShape) -> float:
        """Smallest admissible radius of an iterate: clears the difference stencil and a fraction of the size"""
        return max(STENCIL_MARGIN * self.fd_step, self.min_radius_fraction * shape.max_radius())

    def penalty_weights(self) -> np.ndarray:
        """Diagonal of the coefficient penalty (identity, or L²[0,2π] via Parseval)"""
        size = 2 * self.m + 1
        if not self.parseval:
            return np.ones(size)
        weights = np.full(size, np.pi)
        weights[0] = 2.0 * np.pi
        return weights


@dataclass(frozen=True, eq=False)
class Bands:
    """Pointwise 95% radius intervals"""

    t: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def mean_width(self) -> float:
        return float(np.mean(self.upper - self.lower))


@dataclass(frozen=True, eq=False)
class SVDReport:
    singular_values: np.ndarray
    U: np.ndarray
    Vt: np.ndarray
    terms: Optional[np.ndarray] = None  # row i: (1/s_i) v_i (u_iᵀ ξ)


@dataclass(eq=False)
class ReconstructionRun:
    """Result of lm_reconstruct, optionally completed by the Laplace approximation"""

    q_map: TrigShape
    iterates: List[TrigShape]
    step_norms: List[float]
    e_gamma_history: List[float]
    converged: bool
    config: InversionConfig
    halvings: int = 0
    jacobian: Optional[np.ndarray] = None
    C_map: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None  # (N_e, 2m+1) coefficient vectors
    q_bar: Optional[TrigShape] = None
    bands: Optional[Bands] = None
    svd: Optional[SVDReport] = None
    e_gamma_map: Optional[float] = None
    e_gamma_mean: Optional[float] = None

    @property
    def iterations(self) -> int:
        return len(self.step_norms)

    def to_json(self) -> Dict:
        cfg = self.config
        return {
            "config": {
                "mu": cfg.mu,
                "delta": cfg.delta,
                "max_iter": cfg.max_iter,
                "eps_stop": cfg.eps_stop,
                "m": cfg.m,
                "n_inverse": cfg.n_inverse,
                "jacobian_method": cfg.jacobian_method,
                "seed": cfg.seed,
                "parseval": cfg.parseval,
                "step_control": cfg.step_control,
            },
            "converged": self.converged,
            "iterations": self.iterations,
            "halvings": self.halvings,
            "step_norms": list(self.step_norms),
            "e_gamma_history": list(self.e_gamma_history),
            "e_gamma_map": self.e_gamma_map,
            "e_gamma_mean": self.e_gamma_mean,
            "q_map": self.q_map.to_json(),
            "q_bar": self.q_bar.to_json() if self.q_bar is not None else None,
            "band_mean_width": self.bands.mean_width if self.bands is not None else None,
            "singular_values": list(self.svd.singular_values) if self.svd is not None else None,
        }


def stack_complex(values: np.ndarray) -> np.ndarray:
    """[Re; Im] along the first axis"""
    values = np.asarray(values)
    return np.concatenate([values.real, values.imag], axis=0)


def random_mu(seed: Optional[int]) -> float:
    """Regularization parameter drawn from U(0, 1)"""
    return float(np.random.default_rng(seed).uniform(0.0, 1.0))


def _radial_values(q: Union[StarShape, np.ndarray], t: np.ndarray) -> np.ndarray:
    if isinstance(q, StarShape):
        return q.radial(t)
    q = np.asarray(q, dtype=float)
    return TrigShape.basis(t, (q.size - 1) // 2) @ q


def relative_error(q_est: Union[StarShape, np.ndarray], q_true: Union[StarShape, np.ndarray]) -> float:
    """e_γ = ‖q_est − q_true‖_L²[0,2π] / ‖q_true‖_L²[0,2π]"""
    t = node_parameters(ERROR_QUADRATURE_POINTS)
    truth = _radial_values(q_true, t)
    norm = np.sqrt(np.mean(truth ** 2))
    if norm == 0.0:
        raise DomainError("Relative error against a zero radial function is undefined")
    return float(np.sqrt(np.mean((_radial_values(q_est, t) - truth) ** 2)) / norm)


def _normal_matrix(G: np.ndarray, mu: float, weights: np.ndarray) -> np.ndarray:
    Gs = stack_complex(G) if np.iscomplexobj(G) else G
    return Gs.T @ Gs + mu * np.diag(weights)


def _lm_step(G: np.ndarray, residual: np.ndarray, mu: float, weights: np.ndarray) -> np.ndarray:
    """(GᵀG + μW)⁻¹ Gᵀ F on real-stacked quantities"""
    Gs = stack_complex(G)
    A = _normal_matrix(Gs, mu, weights)
    if mu == 0.0:
        eig = linalg.eigvalsh(A)
        if eig[0] <= SINGULAR_TOL * max(eig[-1], np.finfo(float).tiny):
            raise RegularizationRequiredError(
                f"Normal equations are singular (min eigenvalue {eig[0]:.2e}); use mu > 0"
            )
    try:
        factor = linalg.cho_factor(A)
    except linalg.LinAlgError:
        raise RegularizationRequiredError("Normal-equations matrix is not positive definite; increase mu")
    return linalg.cho_solve(factor, Gs.T @ stack_complex(residual))


def _admissible(vector: np.ndarray, cfg: InversionConfig) -> Optional[TrigShape]:
    """The iterate for this coefficient vector, or None when its radius falls below the floor"""
    try:
        candidate = TrigShape.from_vector(vector)
    except StarShapeError:
        return None
    if candidate.min_radius() <= cfg.radius_floor(candidate):
        return None
    return candidate


def lm_reconstruct(data: FarFieldData, q0: TrigShape, cfg: InversionConfig,
                   q_true: Optional[StarShape] = None) -> ReconstructionRun:
    """Levenberg-Marquardt iteration δq_k = (GᵀG + μI)⁻¹GᵀF_k with step halving.

    With step_control "star" a step is halved only while the iterate leaves
    the admissible star-shaped set. With "residual" it is also halved until
    the data misfit ‖F‖ decreases; when no halving decreases it the iterate
    is stationary and the iteration stops.
    """
    model = ForwardModel(n=cfg.n_inverse, lam=data.lam, incident=data.incident, grid=data.grid)
    weights = cfg.penalty_weights()
    shape = q0.padded(cfg.m)
    if cfg.step_control == "residual":
        logger.info("residual-monitored step halving")
    iterates = [shape]
    step_norms: List[float] = []
    e_history: List[float] = []
    if q_true is not None:
        e_history.append(relative_error(shape, q_true))
    converged = False
    halvings_total = 0

    for k in range(cfg.max_iter):
        try:
            residual = data.values - model(shape)
            G = jacobian(shape, model, cfg.jacobian_method, cfg.fd_step, cfg.threads)
        except StarShapeError as e:
            raise DivergenceError(f"Iterate {k} sits on the boundary of the star-shaped set: {e}") from e
        step = _lm_step(G, residual, cfg.mu, weights)
        residual_norm = float(np.linalg.norm(residual))

        scale = 1.0
        candidate = None
        feasible = False
        for halving in range(cfg.max_halvings + 1):
            candidate = _admissible(shape.vector + scale * step, cfg)
            if candidate is not None:
                feasible = True
                if cfg.step_control == "star" or np.linalg.norm(data.values - model(candidate)) < residual_norm:
                    break
                candidate = None
            if halving < cfg.max_halvings:
                logger.debug("iteration %d: step halved", k + 1)
                scale *= 0.5
                halvings_total += 1

        if candidate is None:
            if not feasible:
                raise DivergenceError(
                    f"Iterate {k + 1} left the star-shaped set after {cfg.max_halvings} step halvings"
                )
            logger.info("LM iteration %d: no misfit decrease after %d halvings, stopping", k + 1, cfg.max_halvings)
            converged = True
            break

        step_norm = float(np.linalg.norm(scale * step))
        shape = candidate
        iterates.append(shape)
        step_norms.append(step_norm)
        if q_true is not None:
            e_history.append(relative_error(shape, q_true))
        logger.info("LM iteration %d: |dq| = %.3e, |F| = %.3e", k + 1, step_norm, residual_norm)
        if step_norm < cfg.eps_stop:
            converged = True
            break

    return ReconstructionRun(
        q_map=shape,
        iterates=iterates,
        step_norms=step_norms,
        e_gamma_history=e_history,
        converged=converged,
        config=cfg,
        halvings=halvings_total,
        e_gamma_map=e_history[-1] if e_history else None,
    )


def laplace_covariance(G: np.ndarray, cfg: InversionConfig) -> np.ndarray:
    """C_MAP = ((μ/δ²)I + (1/δ²)GᵀG)⁻¹"""
    if cfg.delta <= 0:
        raise UndefinedPosteriorError(f"Posterior needs a positive noise level, got delta = {cfg.delta}")
    if cfg.mu <= 0:
        raise UndefinedPosteriorError(f"Posterior needs a positive regularization, got mu = {cfg.mu}")
    G = np.asarray(G)
    weights = cfg.penalty_weights() if G.shape[1] == 2 * cfg.m + 1 else np.ones(G.shape[1])
    precision = _normal_matrix(G, cfg.mu, weights) / cfg.delta ** 2
    try:
        factor = linalg.cho_factor(precision)
    except linalg.LinAlgError as e:
        raise CovarianceError(f"Posterior precision is not positive definite: {e}")
    covariance = linalg.cho_solve(factor, np.eye(precision.shape[0]))
    return 0.5 * (covariance + covariance.T)


def radius_bands(q_map: TrigShape, C_map: np.ndarray, points: int = BAND_POINTS) -> Bands:
    """q_map(t) ± 1.96 sqrt(g(t)ᵀ C g(t))"""
    t = node_parameters(points)
    g = TrigShape.basis(t, q_map.m)
    center = g @ q_map.vector
    half = BAND_Z * np.sqrt(np.maximum(np.einsum("ti,ij,tj->t", g, C_map, g), 0.0))
    return Bands(t=t, center=center, lower=center - half, upper=center + half)


def la_sample(q_map: TrigShape, C_map: np.ndarray, N_e: int = DEFAULT_SAMPLES, seed: Optional[int] = None):
    """(samples, q_bar, bands): q^j = q_MAP + Uᵀz^j with C_MAP = UᵀU"""
    if N_e < 1:
        raise ConfigurationError(f"Sample count must be >= 1, got {N_e}")
    C_map = np.asarray(C_map, dtype=float)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((N_e, C_map.shape[0]))
    if np.any(C_map):
        try:
            upper = linalg.cholesky(C_map, lower=False)
        except linalg.LinAlgError as e:
            raise CovarianceError(f"Posterior covariance is not SPD: {e}")
        samples = q_map.vector + z @ upper
    else:
        samples = np.tile(q_map.vector, (N_e, 1))
    q_bar = TrigShape.from_vector(samples.mean(axis=0), name="q_bar")
    return samples, q_bar, radius_bands(q_map, C_map)


def svd_report(G: np.ndarray, noise: Optional[np.ndarray] = None) -> SVDReport:
    """Singular values of the stacked Jacobian and the per-mode noise amplification terms"""
    Gs = stack_complex(G) if np.iscomplexobj(G) else np.asarray(G, dtype=float)
    U, s, Vt = linalg.svd(Gs, full_matrices=False)
    terms = None
    if noise is not None:
        xi = stack_complex(noise) if np.iscomplexobj(noise) else np.asarray(noise, dtype=float)
        if xi.size != Gs.shape[0]:
            raise DomainError(f"Noise vector needs {Gs.shape[0]} real entries, got {xi.size}")
        with np.errstate(divide="ignore"):
            inverse = np.where(s > 0, 1.0 / s, np.inf)
        terms = (inverse * (U.T @ xi))[:, None] * Vt
    return SVDReport(singular_values=s, U=U, Vt=Vt, terms=terms)


def complete_posterior(run: ReconstructionRun, data: FarFieldData, N_e: int = DEFAULT_SAMPLES,
                       q_true: Optional[StarShape] = None) -> ReconstructionRun:
    """Attach Jacobian, C_MAP, samples, bands and SVD to a finished run"""
    cfg = run.config
    model = ForwardModel(n=cfg.n_inverse, lam=data.lam, incident=data.incident, grid=data.grid)
    G = jacobian(run.q_map, model, cfg.jacobian_method, cfg.fd_step, cfg.threads)
    run.jacobian = G
    run.svd = svd_report(G)
    run.C_map = laplace_covariance(G, cfg)
    if N_e > 0:
        run.samples, run.q_bar, run.bands = la_sample(run.q_map, run.C_map, N_e, cfg.seed)
    else:
        run.bands = radius_bands(run.q_map, run.C_map)
    if q_true is not None and run.q_bar is not None:
        run.e_gamma_mean = relative_error(run.q_bar, q_true)
    return run
