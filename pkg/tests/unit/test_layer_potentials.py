#!/usr/bin/env python3
"""
Unit tests for the single layer, Neumann-Poincaré and H* inner product
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent.parent))
from scripts.errors import DomainError, NearBoundaryError
from scripts.geometry import Ellipse, TrigShape, discretize, preset_shape
from scripts.layer_potentials import (
    BoundaryField,
    OperatorMatrix,
    boundary_operators,
    eval_exterior,
    hstar_inner,
    normal_derivative_double_layer,
    project_mean_zero,
    single_layer_gradient,
)


@pytest.fixture
def disk():
    return discretize(preset_shape("disk05"), 64)


@pytest.fixture
def unit_circle():
    return discretize(TrigShape.circle(1.0), 64)


class TestSingleLayer:
    """S_D[φ] on the boundary"""

    def test_constant_density_on_disk(self, disk):
        """S[1] = R ln R on a circle of radius R"""
        values = boundary_operators(disk).single_layer.apply(np.ones(disk.n))
        np.testing.assert_allclose(values, 0.5 * np.log(0.5), atol=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 7])
    def test_fourier_modes_on_circle(self, unit_circle, k):
        """S[cos kt] = −cos(kt)/(2k) on the unit circle"""
        phi = np.cos(k * unit_circle.t)
        values = boundary_operators(unit_circle).single_layer.apply(phi)
        np.testing.assert_allclose(values, -phi / (2 * k), atol=1e-12)

    def test_spectral_convergence_on_ellipse(self):
        """Coarse and fine grids agree at shared nodes"""
        shape = Ellipse(1.0, 0.6)
        coarse = discretize(shape, 64)
        fine = discretize(shape, 128)
        s_coarse = boundary_operators(coarse).single_layer.apply(np.exp(np.cos(coarse.t)))
        s_fine = boundary_operators(fine).single_layer.apply(np.exp(np.cos(fine.t)))
        np.testing.assert_allclose(s_coarse, s_fine[::2], atol=1e-10)

    def test_unknown_kind_rejected(self):
        with pytest.raises(DomainError, match="not recognised"):
            OperatorMatrix(entries=np.eye(2), kind="hypersingular", quadrature="none")


class TestNeumannPoincare:
    """K*_D and its L² adjoint"""

    def test_constant_on_disk(self, disk):
        values = boundary_operators(disk).np_star.apply(np.ones(disk.n))
        np.testing.assert_allclose(values, 0.5, atol=1e-12)

    def test_annihilates_modes_on_disk(self, disk):
        values = boundary_operators(disk).np_star.apply(np.sin(3 * disk.t))
        np.testing.assert_allclose(values, 0.0, atol=1e-12)

    def test_adjoint_relation(self):
        """∫ K*[φ] ψ dσ = ∫ φ K[ψ] dσ"""
        curve = discretize(preset_shape("bean"), 96)
        ops = boundary_operators(curve)
        phi = np.cos(curve.t) + 0.3 * np.sin(2 * curve.t)
        psi = np.exp(np.sin(curve.t))
        lhs = curve.integrate(ops.np_star.apply(phi) * psi)
        rhs = curve.integrate(phi * ops.np_adjoint.apply(psi))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_constants_are_fixed_by_double_layer(self):
        """K[1] = ½ on any closed curve"""
        curve = discretize(preset_shape("pear"), 128)
        values = boundary_operators(curve).np_adjoint.apply(np.ones(curve.n))
        np.testing.assert_allclose(values, 0.5, atol=1e-8)

    @staticmethod
    def _calderon_residual(n: int, seed: int) -> float:
        """max |S K*φ − K Sφ| / max |Sφ| for ten random smooth mean-zero fields on the bean"""
        curve = discretize(preset_shape("bean"), n)
        ops = boundary_operators(curve)
        rng = np.random.default_rng(seed)
        k = np.arange(1, 13)
        modes = np.hstack([np.cos(np.outer(curve.t, k)), np.sin(np.outer(curve.t, k))])
        coeffs = rng.standard_normal((2 * k.size, 10)) / np.concatenate([k, k])[:, None] ** 2
        fields = np.stack([project_mean_zero(curve, f) for f in (modes @ coeffs).T], axis=1)
        lhs = ops.single_layer.entries @ ops.np_star.entries @ fields
        rhs = ops.np_adjoint.entries @ ops.single_layer.entries @ fields
        return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(ops.single_layer.entries @ fields)))

    def test_calderon_identity(self):
        """S K* = K S, refined from 80 to 160 nodes"""
        coarse = self._calderon_residual(80, seed=6)
        fine = self._calderon_residual(160, seed=6)
        assert fine < 1e-6
        assert fine <= max(coarse, 1e-12)


class TestDoubleLayerNormal:
    """∂_ν D_D through the Maue identity"""

    @pytest.mark.parametrize("m", [1, 3])
    def test_circle_eigenvalues(self, disk, m):
        """∂_ν D[cos mt] = m/(2R) cos mt"""
        phi = np.cos(m * disk.t)
        field = normal_derivative_double_layer(disk, phi)
        np.testing.assert_allclose(field.values.real, m / (2 * 0.5) * phi, atol=1e-10)

    def test_constants_in_kernel(self, disk):
        field = normal_derivative_double_layer(disk, np.ones(disk.n))
        np.testing.assert_allclose(field.values, 0.0, atol=1e-10)


class TestHStarInner:
    """⟨φ, ψ⟩_H* = −⟨S[ψ], φ⟩ on mean-zero fields"""

    def test_cosine_on_unit_circle(self, unit_circle):
        phi = BoundaryField(np.cos(unit_circle.t), unit_circle, mean_zero=True)
        assert hstar_inner(phi, phi) == pytest.approx(np.pi / 2, abs=1e-12)

    def test_orthogonal_modes(self, unit_circle):
        phi = BoundaryField(np.cos(unit_circle.t), unit_circle)
        psi = BoundaryField(np.sin(2 * unit_circle.t), unit_circle)
        assert hstar_inner(phi, psi) == pytest.approx(0.0, abs=1e-12)

    def test_positive_on_mean_zero_fields(self):
        curve = discretize(preset_shape("peanut"), 96)
        rng = np.random.default_rng(3)
        phi = BoundaryField.projected(curve, rng.standard_normal(curve.n))
        assert hstar_inner(phi, phi).real > 0

    def test_conjugate_symmetry(self):
        curve = discretize(preset_shape("bean"), 64)
        phi = BoundaryField.projected(curve, np.exp(1j * curve.t) + np.cos(3 * curve.t))
        psi = BoundaryField.projected(curve, np.sin(curve.t) * (1 + 2j))
        assert hstar_inner(phi, psi) == pytest.approx(np.conj(hstar_inner(psi, phi)), abs=1e-12)

    def test_rejects_non_mean_zero(self, unit_circle):
        phi = BoundaryField(np.ones(unit_circle.n), unit_circle)
        with pytest.raises(DomainError, match="mean-zero"):
            hstar_inner(phi, phi)

    def test_flag_checked_on_construction(self, unit_circle):
        with pytest.raises(DomainError):
            BoundaryField(1.0 + np.cos(unit_circle.t), unit_circle, mean_zero=True)

    def test_projection_removes_mean(self):
        curve = discretize(preset_shape("pear"), 64)
        values = project_mean_zero(curve, 2.0 + np.sin(curve.t))
        assert abs(curve.integrate(values)) < 1e-12


class TestExteriorEvaluation:
    """S_D[φ](x) and its gradient away from the curve"""

    def test_cosine_density_on_disk(self, disk):
        """S[cos t](3, 0) = −R²x1/(2|x|²)"""
        value = eval_exterior(disk, np.cos(disk.t), np.array([[3.0, 0.0]]))
        assert value[0].real == pytest.approx(-0.0416667, abs=1e-7)

    def test_constant_density_gradient(self, disk):
        """∇S[1](x) = R x/|x|²"""
        points = np.array([[3.0, 0.0], [0.0, -2.0]])
        grad = single_layer_gradient(disk, np.ones(disk.n), points)
        np.testing.assert_allclose(grad.real, 0.5 * points / np.sum(points ** 2, axis=1)[:, None], atol=1e-12)

    def test_interior_point_rejected(self, disk):
        with pytest.raises(NearBoundaryError, match="inside"):
            eval_exterior(disk, np.ones(disk.n), np.array([[0.1, 0.0]]))

    def test_point_on_boundary_rejected(self, disk):
        with pytest.raises(NearBoundaryError):
            eval_exterior(disk, np.ones(disk.n), np.array([[0.5 + 1e-3, 0.0]]))

    def test_interior_gradient_when_allowed(self, disk):
        """S[1] is constant inside the disk"""
        grad = single_layer_gradient(disk, np.ones(disk.n), np.array([[0.1, 0.05]]), allow_interior=True)
        np.testing.assert_allclose(grad, 0.0, atol=1e-10)
