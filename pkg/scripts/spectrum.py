#!/usr/bin/env python3
"""
Neumann–Poincaré spectrum in the H* inner product
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, DiscretizationError, DomainError
from .geometry import DiscreteCurve
from .layer_potentials import BoundaryField, boundary_operators, project_mean_zero

logger = logging.getLogger(__name__)

DEFAULT_RETAINED_MODES = 12
ASYMMETRY_TOL = 1e-4
EQUILIBRIUM_EIGENVALUE = 0.5
PAIR_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class NPSpectrum:
    """Retained eigenpairs, sorted by |λ_j| descending"""

    lambdas: np.ndarray
    vectors: np.ndarray  # (n, J), columns H*-orthonormal and mean-zero
    curve: DiscreteCurve
    asymmetry: float = 0.0

    @property
    def J(self) -> int:
        return self.lambdas.size

    @property
    def eigfuns(self) -> List[BoundaryField]:
        return [BoundaryField(values=v, curve=self.curve, mean_zero=True) for v in self.vectors.T]

    def truncated(self, J: int) -> "NPSpectrum":
        if J > self.J:
            raise ConfigurationError(f"Cannot keep {J} modes from a spectrum with {self.J}")
        return NPSpectrum(self.lambdas[:J], self.vectors[:, :J], self.curve, self.asymmetry)


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    peak = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[peak, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _magnitude_order(values: np.ndarray) -> np.ndarray:
    """Indices by decreasing |λ|; within a ± pair of equal magnitude the positive member comes first"""
    order = np.argsort(-np.abs(values), kind="stable")
    magnitudes = np.abs(values[order])
    for i in range(order.size - 1):
        tied = magnitudes[i] - magnitudes[i + 1] <= PAIR_TOL * max(magnitudes[i], 1.0)
        if tied and values[order[i]] < values[order[i + 1]]:
            order[i], order[i + 1] = order[i + 1], order[i]
    return order


def np_spectrum(curve: DiscreteCurve, J: int = DEFAULT_RETAINED_MODES,
                asymmetry_tol: float = ASYMMETRY_TOL) -> NPSpectrum:
    """Eigenpairs of K*_D on the discrete mean-zero subspace"""
    if J < 1 or J >= curve.n // 2:
        raise ConfigurationError(f"Retained mode count J must satisfy 1 <= J < n/2 = {curve.n // 2}, got {J}")
    ops = boundary_operators(curve)
    gram = ops.hstar_gram
    basis = linalg.null_space(curve.weights[None, :])

    stiffness = basis.T @ gram @ ops.np_star.entries @ basis
    mass = basis.T @ gram @ basis
    asymmetry = linalg.norm(stiffness - stiffness.T) / linalg.norm(mass)
    if asymmetry > asymmetry_tol:
        raise DiscretizationError(
            f"K* is not H*-self-adjoint to tolerance on this grid "
            f"(relative asymmetry {asymmetry:.2e} > {asymmetry_tol:.0e}); increase n"
        )
    stiffness = 0.5 * (stiffness + stiffness.T)
    mass = 0.5 * (mass + mass.T)

    values, coeffs = linalg.eigh(stiffness, mass)
    order = _magnitude_order(values)[:J]
    lambdas = values[order]
    vectors = _fix_sign(basis @ coeffs[:, order])

    if np.any(np.abs(lambdas) > 0.5 + 1e-6):
        logger.warning("eigenvalue magnitude above 1/2 (max %.6f): grid too coarse", np.max(np.abs(lambdas)))
    logger.debug("NP spectrum on %d nodes: leading %s", curve.n, np.round(lambdas[:4], 6))
    return NPSpectrum(lambdas=lambdas, vectors=vectors, curve=curve, asymmetry=float(asymmetry))


def spectral_distance(lam: complex, spec: NPSpectrum, include_zero: bool = True) -> float:
    """min_j |λ − λ_j|, optionally counting the accumulation point 0"""
    if spec.J == 0:
        raise DomainError("Spectral distance of an empty spectrum is undefined")
    candidates = list(spec.lambdas)
    if include_zero:
        candidates.append(0.0)
    return float(np.min(np.abs(lam - np.asarray(candidates))))


def hstar_coefficients(g: np.ndarray, spec: NPSpectrum) -> np.ndarray:
    """⟨g, φ_j⟩_H* for every retained mode"""
    gram = boundary_operators(spec.curve).hstar_gram
    return spec.vectors.T @ (gram @ project_mean_zero(spec.curve, g))


def resolvent_expansion(g: np.ndarray, spec: NPSpectrum, lam: complex) -> np.ndarray:
    """Σ_j ⟨g, φ_j⟩_H* / (λ − λ_j) φ_j"""
    coeffs = hstar_coefficients(g, spec)
    return spec.vectors @ (coeffs / (lam - spec.lambdas))


def spectral_tail(g: np.ndarray, spec: NPSpectrum, lam: complex) -> float:
    """H*-norm bound on the part of (λ − K*)⁻¹g missed by the retained modes"""
    g = project_mean_zero(spec.curve, g)
    gram = boundary_operators(spec.curve).hstar_gram
    total = float(np.real(np.conj(g) @ gram @ g))
    captured = float(np.sum(np.abs(hstar_coefficients(g, spec)) ** 2))
    remainder = np.sqrt(max(total - captured, 0.0))
    gap = max(abs(lam) - abs(spec.lambdas[-1]), abs(np.imag(lam)))
    if remainder == 0.0:
        return 0.0
    if gap <= 0.0:
        return float("inf")
    return float(remainder / gap)


def equilibrium_density(curve: DiscreteCurve) -> np.ndarray:
    """Density with K*φ = φ/2 and unit integral"""
    n = curve.n
    system = np.vstack([boundary_operators(curve).np_star.entries - EQUILIBRIUM_EIGENVALUE * np.eye(n),
                        curve.weights[None, :]])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    density, *_ = linalg.lstsq(system, rhs)
    return density


def biorthogonal_modes(spec: NPSpectrum, include_equilibrium: bool = True) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(eigenvalues, right vectors, left vectors) with ∫ right_j · left_k dσ = δ_jk.

    Left vectors of the mean-zero modes are −S[φ_j]; the equilibrium mode
    pairs with the constant function.
    """
    ops = boundary_operators(spec.curve)
    lambdas = spec.lambdas.astype(float)
    right = spec.vectors
    left = -(ops.single_layer.entries @ right)
    if include_equilibrium:
        lambdas = np.concatenate([[EQUILIBRIUM_EIGENVALUE], lambdas])
        right = np.hstack([equilibrium_density(spec.curve)[:, None], right])
        left = np.hstack([np.ones((spec.curve.n, 1)), left])
    return lambdas, right, left
