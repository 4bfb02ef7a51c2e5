#!/usr/bin/env python3
"""
Boundary curves: star-shaped parametrizations, Nyström discretization and
normal perturbations.

All derivatives in the parameter t are analytic (for parametrizations) or
spectral (for node samples of periodic functions).
"""

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from .errors import (
    ConfigurationError,
    DomainError,
    OrientationError,
    PerturbationTooLargeError,
    StarShapeError,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
STAR_CHECK_POINTS = 2048
MIN_NODES = 16
DEFAULT_MODES = 8


# ---------------------------------------------------------------------------
# spectral calculus on periodic node samples

def node_parameters(n: int) -> np.ndarray:
    """Equispaced parameters t_i = 2πi/n"""
    return TWO_PI * np.arange(n) / n


def spectral_derivative(values: np.ndarray, order: int = 1, axis: int = 0) -> np.ndarray:
    """Differentiate equispaced periodic samples in t by FFT.

    The Nyquist mode is dropped for odd orders so real input stays real.
    """
    values = np.asarray(values)
    if order == 0:
        return values.copy()
    n = values.shape[axis]
    k = np.fft.fftfreq(n, d=1.0 / n)
    multiplier = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        multiplier[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    result = np.fft.ifft(np.fft.fft(values, axis=axis) * multiplier.reshape(shape), axis=axis)
    if np.isrealobj(values):
        return result.real
    return result


@lru_cache(maxsize=32)
def differentiation_matrix(n: int, order: int = 1) -> np.ndarray:
    """Dense matrix D with D @ f == spectral_derivative(f, order)"""
    matrix = spectral_derivative(np.eye(n), order=order, axis=0)
    matrix.setflags(write=False)
    return matrix


# ---------------------------------------------------------------------------
# parametrizations

class Parametrization:
    """Smooth 2π-periodic closed curve x(t)"""

    name = "curve"

    def points(self, t: np.ndarray, der: int = 0) -> np.ndarray:
        """x^(der)(t) as an (len(t), 2) array, der in {0, 1, 2}"""
        raise NotImplementedError


class StarShape(Parametrization):
    """Curve x(t) = q(t)(cos t, sin t) with a positive radial function q"""

    name = "star"

    def radial(self, t: np.ndarray, der: int = 0) -> np.ndarray:
        raise NotImplementedError

    def points(self, t: np.ndarray, der: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        e_perp = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        q = self.radial(t)[..., None]
        if der == 0:
            return q * e
        q1 = self.radial(t, 1)[..., None]
        if der == 1:
            return q1 * e + q * e_perp
        if der == 2:
            q2 = self.radial(t, 2)[..., None]
            return (q2 - q) * e + 2.0 * q1 * e_perp
        raise ValueError(f"Derivative order {der} not supported")

    def min_radius(self) -> float:
        """Smallest radius on the dense check grid"""
        return float(np.min(self.radial(node_parameters(STAR_CHECK_POINTS))))

    def max_radius(self) -> float:
        return float(np.max(self.radial(node_parameters(STAR_CHECK_POINTS))))

    def is_star_shaped(self) -> bool:
        return self.min_radius() > 0.0


@dataclass(frozen=True, eq=False)
class TrigShape(StarShape):
    """q(t) = a0 + Σ a_k cos kt + Σ b_k sin kt, k = 1..m"""

    a: np.ndarray
    b: np.ndarray
    name: str = "trig"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).copy()
        b = np.asarray(self.b, dtype=float).copy()
        if a.ndim != 1 or b.ndim != 1 or a.size != b.size + 1:
            raise ConfigurationError(
                f"TrigShape needs len(a) == len(b) + 1, got {a.size} and {b.size}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise StarShapeError("TrigShape coefficients must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        radius = self.min_radius()
        if radius <= 0.0:
            raise StarShapeError(f"Radial function not positive (min {radius:.3e})")

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def vector(self) -> np.ndarray:
        """Coefficient vector (a0, ..., am, b1, ..., bm)"""
        return np.concatenate([self.a, self.b])

    def radial(self, t: np.ndarray, der: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.m + 1)
        phase = np.multiply.outer(t, k) + der * np.pi / 2.0
        value = (np.cos(phase) * (k ** der)) @ self.a[1:] + (np.sin(phase) * (k ** der)) @ self.b
        if der == 0:
            value = value + self.a[0]
        return value

    @staticmethod
    def basis(t: np.ndarray, m: int) -> np.ndarray:
        """Rows g(t) = (1, cos t, ..., cos mt, sin t, ..., sin mt)"""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.arange(1, m + 1)
        kt = np.multiply.outer(t, k)
        return np.hstack([np.ones((t.size, 1)), np.cos(kt), np.sin(kt)])

    @classmethod
    def from_vector(cls, q: Sequence[float], name: str = "trig") -> "TrigShape":
        q = np.asarray(q, dtype=float)
        if q.size % 2 != 1:
            raise ConfigurationError(f"Coefficient vector must have odd length 2m+1, got {q.size}")
        m = (q.size - 1) // 2
        return cls(a=q[: m + 1], b=q[m + 1:], name=name)

    @classmethod
    def circle(cls, radius: float, m: int = DEFAULT_MODES) -> "TrigShape":
        a = np.zeros(m + 1)
        a[0] = radius
        return cls(a=a, b=np.zeros(m), name=f"circle{radius:g}")

    def to_json(self) -> Dict[str, List[float]]:
        return {"a": [float(v) for v in self.a], "b": [float(v) for v in self.b]}

    @classmethod
    def from_json(cls, payload: Union[str, Dict]) -> "TrigShape":
        if isinstance(payload, str):
            payload = json.loads(payload)
        try:
            return cls(a=payload["a"], b=payload["b"])
        except KeyError as e:
            raise ConfigurationError(f"Shape JSON is missing key {e}")

    def padded(self, m: int) -> "TrigShape":
        """Same curve with m modes (truncating higher ones if m is smaller)"""
        a = np.zeros(m + 1)
        b = np.zeros(m)
        keep = min(m, self.m)
        a[: keep + 1] = self.a[: keep + 1]
        b[:keep] = self.b[:keep]
        return TrigShape(a=a, b=b, name=self.name)


class FormulaShape(StarShape):
    """Star shape with a closed-form radial function and its derivatives"""

    def __init__(self, name: str, radial_fn: Callable[[np.ndarray, int], np.ndarray]):
        self.name = name
        self._radial_fn = radial_fn
        radius = self.min_radius()
        if radius <= 0.0:
            raise StarShapeError(f"Shape '{name}' has non-positive radius (min {radius:.3e})")

    def radial(self, t: np.ndarray, der: int = 0) -> np.ndarray:
        return self._radial_fn(np.asarray(t, dtype=float), der)


class Ellipse(Parametrization):
    """x(t) = (a cos t, b sin t), centred at the origin"""

    def __init__(self, a: float, b: float):
        if a <= 0 or b <= 0:
            raise StarShapeError(f"Ellipse semi-axes must be positive, got ({a}, {b})")
        self.a = float(a)
        self.b = float(b)
        self.name = f"ellipse{a:g}x{b:g}"

    def points(self, t: np.ndarray, der: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        phase = t + der * np.pi / 2.0
        return np.stack([self.a * np.cos(phase), self.b * np.sin(phase)], axis=-1)


def _bean_radial(t: np.ndarray, der: int) -> np.ndarray:
    num = 4 / 5 + 18 / 25 * np.cos(t) + 3 / 25 * np.sin(2 * t)
    den = 1 + 7 / 10 * np.cos(t)
    q = num / den
    if der == 0:
        return q
    num1 = -18 / 25 * np.sin(t) + 6 / 25 * np.cos(2 * t)
    den1 = -7 / 10 * np.sin(t)
    q1 = (num1 - q * den1) / den
    if der == 1:
        return q1
    num2 = -18 / 25 * np.cos(t) - 12 / 25 * np.sin(2 * t)
    den2 = -7 / 10 * np.cos(t)
    return (num2 - 2 * q1 * den1 - q * den2) / den


def _peanut_radial(t: np.ndarray, der: int) -> np.ndarray:
    g = np.cos(t) ** 2 + 0.26 * np.sin(t + 0.5) ** 2
    q = np.sqrt(g)
    if der == 0:
        return q
    g1 = -np.sin(2 * t) + 0.26 * np.sin(2 * t + 1.0)
    q1 = g1 / (2 * q)
    if der == 1:
        return q1
    g2 = -2 * np.cos(2 * t) + 0.52 * np.cos(2 * t + 1.0)
    return g2 / (2 * q) - q1 ** 2 / q


def _disk05() -> StarShape:
    return TrigShape(a=[0.5], b=[], name="disk05")


def _pear() -> StarShape:
    return TrigShape(a=[18 / 25, 0.0, 0.0, 3 / 20], b=[0.0, 0.0, 0.0], name="pear")


PRESET_SHAPES: Dict[str, Callable[[], StarShape]] = {
    "disk05": _disk05,
    "bean": lambda: FormulaShape("bean", _bean_radial),
    "peanut": lambda: FormulaShape("peanut", _peanut_radial),
    "pear": _pear,
}


def preset_shape(name: str) -> StarShape:
    """Look up one of the named benchmark inclusions"""
    if name not in PRESET_SHAPES:
        raise ConfigurationError(
            f"Shape '{name}' not available. Choose from: {', '.join(PRESET_SHAPES)}"
        )
    return PRESET_SHAPES[name]()


def load_shape(spec: str) -> StarShape:
    """Preset name, inline JSON object, or path to a JSON file"""
    if spec in PRESET_SHAPES:
        return preset_shape(spec)
    text = spec.strip()
    if not text.startswith("{"):
        try:
            with open(spec) as f:
                text = f.read()
        except OSError:
            raise ConfigurationError(
                f"Shape '{spec}' is neither a preset ({', '.join(PRESET_SHAPES)}) nor a readable JSON file"
            )
    return TrigShape.from_json(text)


def project_to_trig(shape: StarShape, m: int = DEFAULT_MODES, samples: int = 512) -> TrigShape:
    """Least-squares trigonometric fit of a radial function (FFT truncation)"""
    t = node_parameters(samples)
    coeffs = np.fft.rfft(shape.radial(t)) / samples
    a = np.empty(m + 1)
    a[0] = coeffs[0].real
    a[1:] = 2.0 * coeffs[1: m + 1].real
    b = -2.0 * coeffs[1: m + 1].imag
    return TrigShape(a=a, b=b, name=f"{shape.name}_m{m}")


def eval_shape(shape: StarShape, t: float) -> Tuple[float, np.ndarray]:
    """Radius q(t) and boundary point q(t)(cos t, sin t)"""
    radius = float(shape.radial(np.asarray(t, dtype=float)))
    if radius <= 0.0:
        raise StarShapeError(f"Non-positive radius {radius:.3e} at t = {t}")
    return radius, radius * np.array([np.cos(t), np.sin(t)])


# ---------------------------------------------------------------------------
# discretized curves

@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Nyström nodes with every differential-geometric quantity the operators need"""

    t: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    ddx: np.ndarray
    jacobian: np.ndarray = field(init=False)
    tangent: np.ndarray = field(init=False)
    normal: np.ndarray = field(init=False)
    curvature: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        jacobian = np.hypot(self.dx[:, 0], self.dx[:, 1])
        tangent = self.dx / jacobian[:, None]
        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        cross = self.dx[:, 0] * self.ddx[:, 1] - self.dx[:, 1] * self.ddx[:, 0]
        derived = {
            "jacobian": jacobian,
            "tangent": tangent,
            "normal": normal,
            "curvature": cross / jacobian ** 3,
            "weights": (TWO_PI / self.n) * jacobian,
        }
        for name, value in derived.items():
            object.__setattr__(self, name, value)
        for name in ("t", "x", "dx", "ddx", *derived):
            getattr(self, name).setflags(write=False)

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def length(self) -> float:
        return float(np.sum(self.weights))

    @property
    def signed_area(self) -> float:
        """Green's theorem ½∮(x1 dx2 − x2 dx1)"""
        integrand = self.x[:, 0] * self.dx[:, 1] - self.x[:, 1] * self.dx[:, 0]
        return 0.5 * float(np.sum(integrand)) * TWO_PI / self.n

    @property
    def spacing(self) -> float:
        """Largest distance between consecutive nodes"""
        steps = np.roll(self.x, -1, axis=0) - self.x
        return float(np.max(np.hypot(steps[:, 0], steps[:, 1])))

    def arclength_derivative(self, values: np.ndarray) -> np.ndarray:
        """d/ds of node samples, ds = J dt"""
        return spectral_derivative(values) / self.jacobian

    def integrate(self, values: np.ndarray) -> complex:
        return np.sum(self.weights * values)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Winding-number test of the node polygon"""
        points = np.atleast_2d(points)
        rel = self.x[None, :, :] - points[:, None, :]
        angles = np.arctan2(rel[..., 1], rel[..., 0])
        turns = np.diff(np.concatenate([angles, angles[:, :1]], axis=1), axis=1)
        turns = (turns + np.pi) % TWO_PI - np.pi
        return np.abs(np.sum(turns, axis=1)) > np.pi

    def distance_to(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest node"""
        points = np.atleast_2d(points)
        diff = points[:, None, :] - self.x[None, :, :]
        return np.min(np.hypot(diff[..., 0], diff[..., 1]), axis=1)

    def self_intersects(self) -> bool:
        """Segment-segment test over all non-adjacent pairs of the node polyline"""
        p = self.x
        q = np.roll(p, -1, axis=0)

        def orient(a, b, c):
            return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

        p_i, q_i = p[:, None, :], q[:, None, :]
        p_j, q_j = p[None, :, :], q[None, :, :]
        o1 = orient(p_i, q_i, p_j)
        o2 = orient(p_i, q_i, q_j)
        o3 = orient(p_j, q_j, p_i)
        o4 = orient(p_j, q_j, q_i)
        crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
        idx = np.arange(self.n)
        gap = np.abs(idx[:, None] - idx[None, :])
        adjacent = (gap <= 1) | (gap == self.n - 1)
        return bool(np.any(crossing & ~adjacent))


@dataclass(frozen=True)
class NormalPerturbation:
    """Boundary map x ↦ x + ε h(x) ν(x)"""

    h: np.ndarray
    epsilon: float

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if not np.all(np.isfinite(h)):
            raise DomainError("Perturbation field h must be finite")
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be non-negative, got {self.epsilon}")
        object.__setattr__(self, "h", h)


def _build_curve(t: np.ndarray, x: np.ndarray, dx: np.ndarray, ddx: np.ndarray) -> DiscreteCurve:
    curve = DiscreteCurve(t=t, x=x, dx=dx, ddx=ddx)
    if curve.signed_area <= 0.0:
        raise OrientationError(f"Curve must be counterclockwise (signed area {curve.signed_area:.3e})")
    return curve


def discretize(shape: Parametrization, n: int) -> DiscreteCurve:
    """Sample a parametrization at n equispaced parameters"""
    if n < MIN_NODES or n % 2 != 0:
        raise ConfigurationError(f"Node count must be even and >= {MIN_NODES}, got {n}")
    t = node_parameters(n)
    if isinstance(shape, StarShape):
        radius = float(np.min(shape.radial(t)))
        if radius <= 0.0:
            raise StarShapeError(f"Shape '{shape.name}' has non-positive radius {radius:.3e}")
    curve = _build_curve(t, shape.points(t, 0), shape.points(t, 1), shape.points(t, 2))
    logger.debug("discretized %s with %d nodes (length %.6f)", shape.name, n, curve.length)
    return curve


def perturb(curve: DiscreteCurve, pert: NormalPerturbation) -> DiscreteCurve:
    """Nodes x + εhν with derivatives of the perturbed parametrization taken spectrally"""
    if pert.h.shape != (curve.n,):
        raise DomainError(f"h must have {curve.n} node values, got shape {pert.h.shape}")
    if pert.epsilon == 0.0:
        return curve
    shift = pert.epsilon * pert.h[:, None] * curve.normal
    try:
        perturbed = _build_curve(
            curve.t,
            curve.x + shift,
            curve.dx + spectral_derivative(shift, 1),
            curve.ddx + spectral_derivative(shift, 2),
        )
    except OrientationError:
        raise PerturbationTooLargeError(f"Perturbation with epsilon = {pert.epsilon:g} reverses the curve")
    if perturbed.self_intersects():
        raise PerturbationTooLargeError(
            f"Perturbation with epsilon = {pert.epsilon:g} produces a self-intersecting curve"
        )
    return perturbed
