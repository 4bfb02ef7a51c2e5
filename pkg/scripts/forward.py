#!/usr/bin/env python3
"""
Transmission problem solver: density equation (λI − K*_D)φ = ∂H/∂ν and the
scattered field u^s = S_D[φ] on a measurement circle
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from .errors import DomainError, ResonanceSingularityError
from .geometry import DiscreteCurve, Parametrization, discretize
from .layer_potentials import (
    BoundaryField,
    boundary_operators,
    eval_exterior,
    project_mean_zero,
)

logger = logging.getLogger(__name__)

DEFAULT_FORWARD_NODES = 80
DEFAULT_MEASUREMENTS = 64
DEFAULT_MEASUREMENT_RADIUS = 3.0
PIVOT_TOL = 1e-13
NOISE_MODELS = ("absolute", "relative")


@dataclass(frozen=True)
class IncidentField:
    """Harmonic polynomial H = constant + Re Σ_k c_k z^k with z = x1 + i x2"""

    coefficients: Tuple[complex, ...] = ()
    constant: float = 0.0
    label: str = "H"

    @classmethod
    def from_basis(cls, x1: float = 0.0, x2: float = 0.0, re: Optional[Dict[int, float]] = None,
                   im: Optional[Dict[int, float]] = None, constant: float = 0.0) -> "IncidentField":
        """Combination of x1, x2, Re z^k and Im z^k"""
        re = dict(re or {})
        im = dict(im or {})
        degree = max([1, *re.keys(), *im.keys()])
        coeffs = np.zeros(degree, dtype=complex)
        coeffs[0] += x1 - 1j * x2
        for k, alpha in re.items():
            if k < 1:
                raise DomainError(f"Polynomial degree must be >= 1, got {k}")
            coeffs[k - 1] += alpha
        for k, beta in im.items():
            if k < 1:
                raise DomainError(f"Polynomial degree must be >= 1, got {k}")
            coeffs[k - 1] += -1j * beta
        return cls(coefficients=tuple(coeffs), constant=constant)

    @classmethod
    def linear(cls, direction: Tuple[float, float] = (1.0, 0.0)) -> "IncidentField":
        return cls.from_basis(x1=direction[0], x2=direction[1])

    @property
    def is_constant(self) -> bool:
        return not np.any(np.asarray(self.coefficients))

    def _derivative(self, z: np.ndarray, order: int) -> np.ndarray:
        total = np.zeros_like(z, dtype=complex)
        for k, c in enumerate(self.coefficients, start=1):
            if k < order:
                continue
            factor = np.prod(np.arange(k - order + 1, k + 1)) if order else 1.0
            total = total + factor * c * z ** (k - order)
        return total

    def value(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        z = points[:, 0] + 1j * points[:, 1]
        return self.constant + self._derivative(z, 0).real

    def gradient(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        f1 = self._derivative(points[:, 0] + 1j * points[:, 1], 1)
        return np.stack([f1.real, -f1.imag], axis=-1)

    def hessian(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        f2 = self._derivative(points[:, 0] + 1j * points[:, 1], 2)
        hess = np.empty((points.shape[0], 2, 2))
        hess[:, 0, 0] = f2.real
        hess[:, 0, 1] = hess[:, 1, 0] = -f2.imag
        hess[:, 1, 1] = -f2.real
        return hess


@dataclass(frozen=True, eq=False)
class MeasurementGrid:
    """Points on the circle ∂Ω"""

    radius: float = DEFAULT_MEASUREMENT_RADIUS
    count: int = DEFAULT_MEASUREMENTS
    points: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.points is None:
            if self.count < 1 or self.radius <= 0:
                raise DomainError(f"Measurement grid needs count >= 1 and radius > 0, got ({self.count}, {self.radius})")
            angles = 2.0 * np.pi * np.arange(self.count) / self.count
            points = self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
            object.__setattr__(self, "points", points)
        self.points.setflags(write=False)

    @classmethod
    def from_points(cls, points: np.ndarray) -> "MeasurementGrid":
        """Arbitrary (possibly repeated) measurement points"""
        points = np.array(points, dtype=float)
        radius = float(np.min(np.hypot(points[:, 0], points[:, 1])))
        return cls(radius=radius, count=points.shape[0], points=points)

    @property
    def angles(self) -> np.ndarray:
        return np.mod(np.arctan2(self.points[:, 1], self.points[:, 0]), 2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class FarFieldData:
    """Scattered field values at the measurement points"""

    values: np.ndarray
    grid: MeasurementGrid
    lam: complex
    incident: IncidentField
    n: int
    delta: float = 0.0
    seed: Optional[int] = None
    noise_model: str = "absolute"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(values)):
            raise DomainError("Far-field values must be finite")
        object.__setattr__(self, "values", values)

    def metadata(self) -> Dict:
        return {
            "n": self.n,
            "lambda": [self.lam.real, self.lam.imag],
            "delta": self.delta,
            "seed": self.seed,
            "noise_model": self.noise_model,
            "measurement_radius": self.grid.radius,
            "measurement_count": self.grid.count,
        }


class ContrastSolver:
    """LU factorization of λI − K*_D, reused for K*_D and adjoint K_D systems"""

    def __init__(self, curve: DiscreteCurve, lam: complex):
        self.curve = curve
        self.lam = complex(lam)
        matrix = self.lam * np.eye(curve.n) - boundary_operators(curve).np_star.entries
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            self._lu = linalg.lu_factor(matrix)
        pivots = np.abs(np.diag(self._lu[0]))
        if pivots.min() <= PIVOT_TOL * max(pivots.max(), 1.0):
            raise ResonanceSingularityError(f"λ = {self.lam} lies on the discrete NP spectrum")
        self._constant_response: Optional[np.ndarray] = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """(λI − K*)⁻¹ rhs"""
        return linalg.lu_solve(self._lu, rhs)

    def solve_mean_zero(self, rhs: np.ndarray) -> Tuple[np.ndarray, complex]:
        """Mean-zero φ and constant c with (λI − K*)φ = rhs − c.

        The discrete K* keeps the weighted mean only up to quadrature error,
        so c is of the size of that error.
        """
        if self._constant_response is None:
            self._constant_response = self.solve(np.ones(self.curve.n, dtype=complex))
        w = self.curve.weights
        u = self.solve(rhs)
        c = complex((w @ u) / (w @ self._constant_response))
        return u - c * self._constant_response, c

    def solve_adjoint(self, rhs: np.ndarray) -> np.ndarray:
        """(λI − K)⁻¹ rhs with K = W⁻¹K*ᵀW, columns batched"""
        w = self.curve.weights
        scaled = rhs * (w[:, None] if np.ndim(rhs) == 2 else w)
        out = linalg.lu_solve(self._lu, scaled, trans=1)
        return out / (w[:, None] if np.ndim(rhs) == 2 else w)


def incident_traces(H: IncidentField, curve: DiscreteCurve) -> Tuple[BoundaryField, np.ndarray, np.ndarray]:
    """(∂H/∂ν, ∇H, ∇²H) at the nodes"""
    grad = H.gradient(curve.x)
    hess = H.hessian(curve.x)
    dH_dnu = np.einsum("id,id->i", grad, curve.normal)
    return BoundaryField(values=dH_dnu, curve=curve), grad, hess


def solve_density(curve: DiscreteCurve, lam: complex, H: IncidentField,
                  solver: Optional[ContrastSolver] = None) -> BoundaryField:
    """Mean-zero φ with (λI − K*)φ = ∂H/∂ν up to a constant"""
    solver = solver or ContrastSolver(curve, lam)
    rhs = project_mean_zero(curve, incident_traces(H, curve)[0].values)
    phi, drift = solver.solve_mean_zero(rhs)
    logger.debug("density solve n=%d λ=%s mean drift=%.2e", curve.n, lam, abs(drift))
    return BoundaryField(values=phi, curve=curve, mean_zero=True)


def far_field(curve: DiscreteCurve, lam: complex, H: IncidentField, grid: MeasurementGrid) -> np.ndarray:
    """u^s = S_D[φ] at the grid points for an arbitrary discretized boundary"""
    phi = solve_density(curve, lam, H)
    return eval_exterior(curve, phi, grid.points)


def forward_map(shape: Parametrization, n: int, lam: complex, H: IncidentField,
                grid: MeasurementGrid) -> FarFieldData:
    """F(q): far-field data of a shape"""
    values = far_field(discretize(shape, n), lam, H, grid)
    return FarFieldData(values=values, grid=grid, lam=complex(lam), incident=H, n=n)


@dataclass(frozen=True)
class ForwardModel:
    """Shape ↦ far field at fixed (n, λ, H, grid)"""

    n: int
    lam: complex
    incident: IncidentField
    grid: MeasurementGrid

    def __call__(self, shape: Parametrization) -> np.ndarray:
        return far_field(discretize(shape, self.n), self.lam, self.incident, self.grid)


def add_noise(data: FarFieldData, delta: float, seed: int, model: str = "absolute") -> FarFieldData:
    """u + δξ (absolute) or u + δ‖u‖_∞ξ (relative), ξ standard normal in each real and imaginary component"""
    if delta < 0:
        raise DomainError(f"Noise level must be non-negative, got {delta}")
    if model not in NOISE_MODELS:
        raise DomainError(f"Noise model '{model}' not available. Choose from: {', '.join(NOISE_MODELS)}")
    rng = np.random.default_rng(seed)
    count = data.values.size
    xi = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    scale = delta if model == "absolute" else delta * float(np.max(np.abs(data.values)))
    return FarFieldData(
        values=data.values + scale * xi,
        grid=data.grid,
        lam=data.lam,
        incident=data.incident,
        n=data.n,
        delta=delta,
        seed=seed,
        noise_model=model,
    )
