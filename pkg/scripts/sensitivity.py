#!/usr/bin/env python3
"""
First-order shape sensitivity of the far-field map.

Perturbations move the boundary along the normal, x ↦ x + εh(x)ν(x).
Quantities on the perturbed curve are pulled back to the original nodes.
Curvature κ is positive on convex counterclockwise curves, so the line
element transforms as dσ_ε = (1 + εκh)dσ + O(ε²).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .config import resolve_threads
from .errors import ConfigurationError, DegeneracyError, DomainError, StarShapeError
from .forward import (
    ContrastSolver,
    ForwardModel,
    IncidentField,
    MeasurementGrid,
    far_field,
    incident_traces,
    solve_density,
)
from .geometry import (
    DiscreteCurve,
    NormalPerturbation,
    StarShape,
    TrigShape,
    differentiation_matrix,
    discretize,
    perturb,
)
from .layer_potentials import BoundaryField, boundary_operators, green_matrix, project_mean_zero
from .spectrum import NPSpectrum, biorthogonal_modes, spectral_distance, spectral_tail

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-5
DEGENERACY_GAP = 1e-6
COUPLING_TOL = 1e-8
JACOBIAN_METHODS = ("finite_difference", "ssf")
COUPLINGS = ("biorthogonal", "symmetric")


def _tangential(curve: DiscreteCurve, values: np.ndarray) -> np.ndarray:
    """∂_T along the first axis"""
    d = differentiation_matrix(curve.n, 1)
    scale = curve.jacobian if np.ndim(values) == 1 else curve.jacobian[:, None]
    return (d @ values) / scale


def k1_apply(curve: DiscreteCurve, h: np.ndarray, phi) -> np.ndarray:
    """K^(1)[φ] = −∂_T(h ∂_T S[φ]) + ∂_ν D[hφ] − hκK*[φ] + K*[hκφ].

    phi may be a BoundaryField, a node vector or an (n, k) block of columns.
    """
    ops = boundary_operators(curve)
    values = phi.values if isinstance(phi, BoundaryField) else np.asarray(phi)
    h = np.asarray(h, dtype=float)
    hk = h * curve.curvature
    if values.ndim == 2:
        h, hk = h[:, None], hk[:, None]
    s_phi = ops.single_layer.entries @ values
    term = -_tangential(curve, h * _tangential(curve, s_phi))
    term = term + ops.double_layer_normal.entries @ (h * values)
    term = term - hk * (ops.np_star.entries @ values)
    term = term + ops.np_star.entries @ (hk * values)
    return term


def first_order_source(curve: DiscreteCurve, H: IncidentField, h: np.ndarray) -> np.ndarray:
    """G^(1) = h⟨∇²H ν, ν⟩ − ∂_T h ⟨∇H, T⟩"""
    _, grad, hess = incident_traces(H, curve)
    normal_curv = np.einsum("id,ide,ie->i", curve.normal, hess, curve.normal)
    tangential = np.einsum("id,id->i", grad, curve.tangent)
    return h * normal_curv - _tangential(curve, np.asarray(h, dtype=float)) * tangential


def perturbed_density_first_order(curve: DiscreteCurve, lam: complex, H: IncidentField, h: np.ndarray,
                                  solver: Optional[ContrastSolver] = None,
                                  phi: Optional[BoundaryField] = None) -> BoundaryField:
    """φ^(1) = (λI − K*)⁻¹(G^(1) + K^(1)φ)"""
    solver = solver or ContrastSolver(curve, lam)
    phi = phi or solve_density(curve, lam, H, solver)
    rhs = first_order_source(curve, H, h) + k1_apply(curve, h, phi)
    return BoundaryField(values=solver.solve(rhs), curve=curve)


def _green_normal_derivative(curve: DiscreteCurve, points: np.ndarray) -> np.ndarray:
    """∂Γ(x_k, y_j)/∂ν(y_j)"""
    diff = curve.x[None, :, :] - points[:, None, :]
    dist2 = np.einsum("kjd,kjd->kj", diff, diff)
    return np.einsum("kjd,jd->kj", diff, curve.normal) / (2.0 * np.pi * dist2)


def adjoint_densities(curve: DiscreteCurve, lam: complex, points: np.ndarray,
                      solver: Optional[ContrastSolver] = None) -> np.ndarray:
    """Columns φ_d(x_k, ·) solving (λI − K)φ_d = Γ(x_k, ·), shape (n, count)"""
    solver = solver or ContrastSolver(curve, lam)
    points = np.atleast_2d(points)
    return solver.solve_adjoint(green_matrix(curve, points).T.astype(complex))


def adjoint_density(curve: DiscreteCurve, lam: complex, x: Sequence[float]) -> BoundaryField:
    """φ_d(x, ·) for one exterior point"""
    x = np.asarray(x, dtype=float)
    if curve.contains(x[None, :])[0]:
        raise DomainError(f"Adjoint density needs an exterior point, got {tuple(x)}")
    return BoundaryField(values=adjoint_densities(curve, lam, x[None, :])[:, 0], curve=curve)


@dataclass(frozen=True, eq=False)
class SensitivityKernel:
    """P(x_k, y_j): far-field response to a unit normal displacement at y_j"""

    P: np.ndarray
    curve: DiscreteCurve
    grid: MeasurementGrid
    lam: complex

    def pair(self, h: np.ndarray) -> np.ndarray:
        """SSF(h)(x_k) = ∫ h(y) P(x_k, y) dσ(y); h may hold several columns"""
        h = np.asarray(h)
        weights = self.curve.weights if h.ndim == 1 else self.curve.weights[:, None]
        return self.P @ (weights * h)


def ssf(kernel: SensitivityKernel, h: np.ndarray) -> np.ndarray:
    return kernel.pair(h)


def sensitivity_kernel(curve: DiscreteCurve, lam: complex, H: IncidentField,
                       grid: MeasurementGrid) -> SensitivityKernel:
    """P = ∂_Tφ_d ∂_T(H + S[φ]) + (∂_ν D[φ_d] + ∂Γ/∂ν) φ"""
    ops = boundary_operators(curve)
    solver = ContrastSolver(curve, lam)
    phi = solve_density(curve, lam, H, solver).values
    _, grad, _ = incident_traces(H, curve)

    total_tangential = np.einsum("id,id->i", grad, curve.tangent) + _tangential(curve, ops.single_layer @ phi)
    phi_d = adjoint_densities(curve, lam, grid.points, solver)
    dphi_d = _tangential(curve, phi_d)
    maue = ops.double_layer_normal.entries @ phi_d

    P = dphi_d.T * total_tangential[None, :]
    P += (maue.T + _green_normal_derivative(curve, grid.points)) * phi[None, :]
    logger.debug("sensitivity kernel %d x %d at λ=%s", *P.shape, lam)
    return SensitivityKernel(P=P, curve=curve, grid=grid, lam=complex(lam))


# ---------------------------------------------------------------------------
# spectral picture

@dataclass(frozen=True, eq=False)
class EigenPerturbation:
    """First-order shifts of the retained NP eigenpairs per unit ε"""

    lambda1: np.ndarray
    eigfun1: np.ndarray  # (n, J)
    coupling: np.ndarray  # ⟨K^(1)φ_l, ψ_j⟩ over the modes used


def _mode_coupling(curve: DiscreteCurve, right: np.ndarray, left: np.ndarray, h: np.ndarray) -> np.ndarray:
    """M[j, l] = ∫ K^(1)[φ_l] ψ_j dσ"""
    return left.T @ (curve.weights[:, None] * k1_apply(curve, h, right))


def _eigenvector_shifts(lambdas: np.ndarray, right: np.ndarray, coupling: np.ndarray,
                        gap_tol: float, coupling_tol: float) -> np.ndarray:
    """Column l: Σ_{j≠l} M[j, l]/(λ_l − λ_j) φ_j"""
    gaps = lambdas[None, :] - lambdas[:, None]  # [j, l] = λ_l − λ_j
    scale = coupling_tol * max(1.0, float(np.max(np.abs(coupling))))
    close = np.abs(gaps) < gap_tol
    np.fill_diagonal(close, False)
    coupled = close & (np.abs(coupling) > scale)
    if np.any(coupled):
        j, l = np.argwhere(coupled)[0]
        raise DegeneracyError(
            f"Eigenvalues {lambdas[j]:.8f} and {lambdas[l]:.8f} are closer than {gap_tol:g} "
            f"but coupled by the perturbation ({coupling[j, l]:.2e})"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.where(close | np.eye(lambdas.size, dtype=bool), 0.0, coupling / gaps)
    return right @ factors


def eigen_perturbation(curve: DiscreteCurve, spec: NPSpectrum, h: np.ndarray,
                       include_equilibrium: bool = False, gap_tol: float = DEGENERACY_GAP,
                       coupling_tol: float = COUPLING_TOL) -> EigenPerturbation:
    """λ_j^(1) = ⟨K^(1)φ_j, φ_j⟩_H* and φ_j^(1) = Σ_{l≠j} ⟨K^(1)φ_j, φ_l⟩_H*/(λ_j − λ_l) φ_l"""
    if spec.curve is not curve:
        raise DomainError("Spectrum was computed on a different curve")
    lambdas, right, left = biorthogonal_modes(spec, include_equilibrium)
    coupling = _mode_coupling(curve, right, left, h)
    shifts = _eigenvector_shifts(lambdas, right, coupling, gap_tol, coupling_tol)
    offset = 1 if include_equilibrium else 0
    return EigenPerturbation(
        lambda1=np.diag(coupling)[offset:].copy(),
        eigfun1=shifts[:, offset:],
        coupling=coupling,
    )


@dataclass(frozen=True, eq=False)
class SpectralSSF:
    """Truncated spectral expansion of the shape sensitivity"""

    values: np.ndarray
    tail: float
    distance_squared: float
    modes: int


def spectral_ssf(curve: DiscreteCurve, spec: NPSpectrum, lam: complex, H: IncidentField,
                 grid: MeasurementGrid, h: np.ndarray, J: Optional[int] = None,
                 include_equilibrium: bool = True, coupling: str = "biorthogonal",
                 gap_tol: float = DEGENERACY_GAP, coupling_tol: float = COUPLING_TOL) -> SpectralSSF:
    """T(x) = Σ_j [b_j d_j + ⟨G^(1), ψ_j⟩ b_j + a_j Z_j]/(λ − λ_j) + Σ_j λ_j^(1) a_j b_j/(λ − λ_j)².

    a_j = ⟨∂H/∂ν, ψ_j⟩, b_j = S[φ_j](x), ψ_j the left eigenvectors.
    """
    if coupling not in COUPLINGS:
        raise ConfigurationError(f"Coupling '{coupling}' not available. Choose from: {', '.join(COUPLINGS)}")
    if spec.curve is not curve:
        raise DomainError("Spectrum was computed on a different curve")
    if J is not None:
        spec = spec.truncated(J)
    h = np.asarray(h, dtype=float)
    count = grid.points.shape[0]
    if not np.any(h):
        return SpectralSSF(np.zeros(count, dtype=complex), 0.0, spectral_distance(lam, spec) ** 2, spec.J)

    w = curve.weights
    lambdas, right, left = biorthogonal_modes(spec, include_equilibrium)
    g = project_mean_zero(curve, incident_traces(H, curve)[0].values)
    a = left.T @ (w * g)
    source = left.T @ (w * first_order_source(curve, H, h))
    green = green_matrix(curve, grid.points)
    b = green @ (w[:, None] * right)  # (count, modes)

    M = _mode_coupling(curve, right, left, h)
    shifts = _eigenvector_shifts(lambdas, right, M, gap_tol, coupling_tol)
    gaps = lambdas[:, None] - lambdas[None, :]  # [j, l] = λ_j − λ_l
    off = ~np.eye(lambdas.size, dtype=bool) & (np.abs(gaps) >= gap_tol)
    transfer = M if coupling == "biorthogonal" else M.T
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(off, transfer / gaps, 0.0) @ a

    geometric = (_green_normal_derivative(curve, grid.points) * h[None, :]
                 + green * (curve.curvature * h)[None, :])
    Z = geometric @ (w[:, None] * right) + green @ (w[:, None] * shifts)

    resolvent = 1.0 / (lam - lambdas)
    values = (b * (d + source)[None, :] + Z * a[None, :]) @ resolvent
    values = values + b @ (np.diag(M) * a * resolvent ** 2)

    tail = spectral_tail(g, spec, lam)
    dist2 = spectral_distance(lam, spec) ** 2
    logger.debug("spectral SSF with %d modes, tail %.2e, dist² %.2e", lambdas.size, tail, dist2)
    return SpectralSSF(values=values, tail=tail, distance_squared=dist2, modes=lambdas.size)


# ---------------------------------------------------------------------------
# Jacobians and consistency checks

def normal_components(shape: TrigShape, curve: DiscreteCurve) -> np.ndarray:
    """h_k = ⟨∂x/∂q_k, ν⟩ for every coefficient direction, shape (n, 2m+1)"""
    e = np.stack([np.cos(curve.t), np.sin(curve.t)], axis=1)
    radial_normal = np.einsum("id,id->i", e, curve.normal)
    return TrigShape.basis(curve.t, shape.m) * radial_normal[:, None]


def jacobian(shape: TrigShape, model: ForwardModel, method: str = "finite_difference",
             step: float = DEFAULT_FD_STEP, threads: Optional[int] = None) -> np.ndarray:
    """dF/dq, complex (count, 2m+1)"""
    if method not in JACOBIAN_METHODS:
        raise ConfigurationError(f"Jacobian method '{method}' not available. Choose from: {', '.join(JACOBIAN_METHODS)}")
    if method == "ssf":
        curve = discretize(shape, model.n)
        kernel = sensitivity_kernel(curve, model.lam, model.incident, model.grid)
        return kernel.pair(normal_components(shape, curve))

    q = shape.vector

    def evaluate(vector: np.ndarray) -> Optional[np.ndarray]:
        try:
            return model(TrigShape.from_vector(vector))
        except StarShapeError:
            return None

    def column(k: int) -> np.ndarray:
        dq = np.zeros_like(q)
        dq[k] = step
        forward = evaluate(q + dq)
        backward = evaluate(q - dq)
        if forward is not None and backward is not None:
            return (forward - backward) / (2.0 * step)
        if forward is None and backward is None:
            raise StarShapeError(f"Difference stencil of coefficient {k} leaves the star-shaped set on both sides")
        # one-sided near the boundary of the star-shaped set
        logger.debug("coefficient %d: one-sided difference", k)
        center = model(shape)
        if forward is not None:
            return (forward - center) / step
        return (center - backward) / step

    workers = resolve_threads(threads)
    if workers == 1:
        columns = [column(k) for k in range(q.size)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(column, range(q.size)))
    return np.stack(columns, axis=1)


def first_order_remainders(curve: DiscreteCurve, lam: complex, H: IncidentField, grid: MeasurementGrid,
                           h: np.ndarray, epsilons: Sequence[float] = (1e-2, 5e-3, 2.5e-3)
                           ) -> Tuple[np.ndarray, np.ndarray]:
    """‖F(∂D_ε) − F(∂D) − ε SSF(h)‖_∞ per ε and the observed orders between successive ε"""
    h = np.asarray(h, dtype=float)
    base = far_field(curve, lam, H, grid)
    linear = sensitivity_kernel(curve, lam, H, grid).pair(h)
    remainders = np.array([
        np.max(np.abs(far_field(perturb(curve, NormalPerturbation(h, eps)), lam, H, grid) - base - eps * linear))
        for eps in epsilons
    ])
    eps = np.asarray(epsilons, dtype=float)
    orders = np.log(remainders[:-1] / remainders[1:]) / np.log(eps[:-1] / eps[1:])
    return remainders, orders


def named_perturbation(name: str, curve: DiscreteCurve) -> np.ndarray:
    """h values for 'const', 'cosK' or 'sinK' (e.g. cos3)"""
    if name == "const":
        return np.ones(curve.n)
    for prefix, fn in (("cos", np.cos), ("sin", np.sin)):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            return fn(int(name[len(prefix):]) * curve.t)
    raise ConfigurationError(f"Perturbation '{name}' not recognised; use const, cosK or sinK")


def dilation_derivative(shape: StarShape, model: ForwardModel) -> np.ndarray:
    """Far-field response to h ≡ 1 from the kernel"""
    curve = discretize(shape, model.n)
    return sensitivity_kernel(curve, model.lam, model.incident, model.grid).pair(np.ones(curve.n))
