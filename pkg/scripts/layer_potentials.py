#!/usr/bin/env python3
"""
Nyström discretization of the Laplace layer potentials on a closed curve.

Kernel convention: Γ(x, y) = (1/2π) ln|x − y|.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Union

import numpy as np

from .errors import DomainError, NearBoundaryError
from .geometry import DiscreteCurve, differentiation_matrix

logger = logging.getLogger(__name__)

MEAN_ZERO_TOL = 1e-10
KINDS = ("single_layer", "np_star", "np", "double_layer_trace")


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Complex node values of a density on a curve"""

    values: np.ndarray
    curve: DiscreteCurve
    mean_zero: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.curve.n,):
            raise DomainError(f"Field needs {self.curve.n} node values, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        if self.mean_zero and not is_mean_zero(self.curve, values):
            raise DomainError("Field flagged mean-zero has non-zero integral")

    @classmethod
    def projected(cls, curve: DiscreteCurve, values: np.ndarray) -> "BoundaryField":
        """Field with its mean removed"""
        return cls(values=project_mean_zero(curve, values), curve=curve, mean_zero=True)


def is_mean_zero(curve: DiscreteCurve, values: np.ndarray) -> bool:
    scale = np.sum(curve.weights * np.abs(values))
    return abs(np.sum(curve.weights * values)) <= MEAN_ZERO_TOL * max(scale, np.finfo(float).tiny)


def project_mean_zero(curve: DiscreteCurve, values: np.ndarray) -> np.ndarray:
    """values − (∫ values dσ)/|∂D| along the first axis"""
    values = np.asarray(values)
    mean = np.tensordot(curve.weights, values, axes=(0, 0)) / curve.length
    return values - mean


def _as_values(field: Union[BoundaryField, np.ndarray]) -> np.ndarray:
    if isinstance(field, BoundaryField):
        return field.values
    return np.asarray(field)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense Nyström matrix acting on node values"""

    entries: np.ndarray
    kind: str
    quadrature: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"Operator kind '{self.kind}' not recognised. Choose from: {', '.join(KINDS)}")

    def apply(self, field: Union[BoundaryField, np.ndarray]) -> np.ndarray:
        return self.entries @ _as_values(field)

    def __matmul__(self, other):
        return self.entries @ _as_values(other)


@lru_cache(maxsize=16)
def kress_log_weights(n: int) -> np.ndarray:
    """First row r of the circulant matrix R_ij = r[(i−j) mod n].

    Σ_j R_ij f(t_j) integrates ln(4 sin²((t_i − s)/2)) f(s) over a period.
    """
    t = 2.0 * np.pi * np.arange(n) / n
    m = np.arange(1, n // 2)
    row = -(4.0 * np.pi / n) * (np.cos(np.outer(t, m)) @ (1.0 / m))
    row -= (4.0 * np.pi / n ** 2) * np.cos(n * t / 2.0)
    row.setflags(write=False)
    return row


def _circulant(row: np.ndarray) -> np.ndarray:
    n = row.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return row[idx]


def _pairwise(curve: DiscreteCurve):
    diff = curve.x[:, None, :] - curve.x[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    return diff, dist2


def assemble_single_layer(curve: DiscreteCurve) -> OperatorMatrix:
    """S_D with the periodic log singularity split off and integrated exactly"""
    n = curve.n
    _, dist2 = _pairwise(curve)
    dt = curve.t[:, None] - curve.t[None, :]
    sin2 = 4.0 * np.sin(dt / 2.0) ** 2
    np.fill_diagonal(sin2, 1.0)
    smooth = np.log(np.where(dist2 > 0, dist2, 1.0) / sin2)
    np.fill_diagonal(smooth, 2.0 * np.log(curve.jacobian))
    entries = (_circulant(kress_log_weights(n)) + (2.0 * np.pi / n) * smooth) * curve.jacobian[None, :]
    entries /= 4.0 * np.pi
    return OperatorMatrix(entries=entries, kind="single_layer", quadrature="kress_log_split")


def assemble_np_star(curve: DiscreteCurve) -> OperatorMatrix:
    """K*_D: kernel ⟨x − y, ν(x)⟩ / (2π|x − y|²), diagonal κ(x)/(4π)"""
    diff, dist2 = _pairwise(curve)
    np.fill_diagonal(dist2, 1.0)
    kernel = np.einsum("ijk,ik->ij", diff, curve.normal) / (2.0 * np.pi * dist2)
    np.fill_diagonal(kernel, curve.curvature / (4.0 * np.pi))
    return OperatorMatrix(entries=kernel * curve.weights[None, :], kind="np_star", quadrature="trapezoid")


def assemble_np(curve: DiscreteCurve, np_star: OperatorMatrix = None) -> OperatorMatrix:
    """L²-adjoint K = W⁻¹ K*ᵀ W"""
    np_star = np_star or assemble_np_star(curve)
    w = curve.weights
    entries = np_star.entries.T * w[None, :] / w[:, None]
    return OperatorMatrix(entries=entries, kind="np", quadrature="weighted_transpose")


def assemble_double_layer_normal(curve: DiscreteCurve, single_layer: OperatorMatrix = None) -> OperatorMatrix:
    """∂_ν D_D through the Maue identity d/ds S d/ds"""
    single_layer = single_layer or assemble_single_layer(curve)
    ds = differentiation_matrix(curve.n, 1) / curve.jacobian[:, None]
    entries = ds @ single_layer.entries @ ds
    return OperatorMatrix(entries=entries, kind="double_layer_trace", quadrature="maue")


class BoundaryOperators:
    """Lazily assembled operator set for one curve"""

    def __init__(self, curve: DiscreteCurve):
        self.curve = curve

    @cached_property
    def single_layer(self) -> OperatorMatrix:
        logger.debug("assembling single layer, n=%d", self.curve.n)
        return assemble_single_layer(self.curve)

    @cached_property
    def np_star(self) -> OperatorMatrix:
        return assemble_np_star(self.curve)

    @cached_property
    def np_adjoint(self) -> OperatorMatrix:
        return assemble_np(self.curve, self.np_star)

    @cached_property
    def double_layer_normal(self) -> OperatorMatrix:
        return assemble_double_layer_normal(self.curve, self.single_layer)

    @cached_property
    def hstar_gram(self) -> np.ndarray:
        """Real symmetric matrix B with ⟨φ, ψ⟩_H* = φ̄ᵀ B ψ"""
        gram = -self.curve.weights[:, None] * self.single_layer.entries
        return 0.5 * (gram + gram.T)


@lru_cache(maxsize=16)
def boundary_operators(curve: DiscreteCurve) -> BoundaryOperators:
    return BoundaryOperators(curve)


def hstar_pairing(curve: DiscreteCurve, phi: np.ndarray, psi: np.ndarray) -> complex:
    """−⟨S[ψ], φ⟩ without the mean-zero check"""
    return complex(np.conj(phi) @ (boundary_operators(curve).hstar_gram @ psi))


def hstar_inner(phi: BoundaryField, psi: BoundaryField) -> complex:
    """H* inner product, conjugate-linear in phi"""
    if phi.curve is not psi.curve:
        raise DomainError("H* inner product needs fields on the same curve")
    for label, field in (("phi", phi), ("psi", psi)):
        if not is_mean_zero(field.curve, field.values):
            raise DomainError(f"H* inner product is only defined on mean-zero fields ({label} is not)")
    return hstar_pairing(phi.curve, phi.values, psi.values)


def _check_exterior(curve: DiscreteCurve, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inside = curve.contains(points)
    if np.any(inside):
        raise NearBoundaryError(f"{int(np.sum(inside))} evaluation point(s) lie inside the curve")
    too_close = curve.distance_to(points) < curve.spacing
    if np.any(too_close):
        raise NearBoundaryError(
            f"{int(np.sum(too_close))} evaluation point(s) within one node spacing ({curve.spacing:.3e}) of the curve"
        )
    return points


def green_matrix(curve: DiscreteCurve, points: np.ndarray) -> np.ndarray:
    """Γ(x_k, y_j) for exterior points x_k and nodes y_j"""
    diff = points[:, None, :] - curve.x[None, :, :]
    return np.log(np.einsum("kjd,kjd->kj", diff, diff)) / (4.0 * np.pi)


def eval_exterior(curve: DiscreteCurve, phi: Union[BoundaryField, np.ndarray], points: np.ndarray) -> np.ndarray:
    """S_D[φ](x) at exterior points by the trapezoid rule"""
    points = _check_exterior(curve, points)
    return green_matrix(curve, points) @ (curve.weights * _as_values(phi))


def single_layer_gradient(curve: DiscreteCurve, phi: Union[BoundaryField, np.ndarray], points: np.ndarray,
                          allow_interior: bool = False) -> np.ndarray:
    """∇S_D[φ](x) off the curve, shape (len(points), 2)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if allow_interior:
        if np.any(curve.distance_to(points) < curve.spacing):
            raise NearBoundaryError("Gradient evaluation point within one node spacing of the curve")
    else:
        points = _check_exterior(curve, points)
    diff = points[:, None, :] - curve.x[None, :, :]
    dist2 = np.einsum("kjd,kjd->kj", diff, diff)
    density = curve.weights * _as_values(phi)
    return np.einsum("kjd,kj,j->kd", diff, 1.0 / (2.0 * np.pi * dist2), density)


def normal_derivative_double_layer(curve: DiscreteCurve, psi: Union[BoundaryField, np.ndarray]) -> BoundaryField:
    """∂_ν D_D[ψ] on the curve"""
    values = boundary_operators(curve).double_layer_normal.apply(psi)
    return BoundaryField(values=values, curve=curve)
