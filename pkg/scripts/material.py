#!/usr/bin/env python3
"""
Drude permittivity, contrast parameter and plasmon resonance frequencies
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.constants import epsilon_0
from scipy.optimize import bisect

from .errors import ConfigurationError, DomainError, SingularContrastError
from .spectrum import NPSpectrum

logger = logging.getLogger(__name__)

ROOT_RTOL = 1e-6
SCAN_POINTS = 4000


@dataclass(frozen=True)
class DrudeParams:
    """Free-electron permittivity model"""

    omega_p: float
    gamma: float = 0.0
    eps0: float = epsilon_0

    def __post_init__(self):
        if self.omega_p <= 0:
            raise ConfigurationError(f"Plasma frequency must be positive, got {self.omega_p}")
        if self.gamma < 0:
            raise ConfigurationError(f"Damping must be non-negative, got {self.gamma}")

    def __call__(self, omega: float) -> complex:
        return drude_permittivity(self, omega)


# gold nanoparticle values quoted for the permittivity example
GOLD = DrudeParams(omega_p=2e15, gamma=1e14)


@dataclass(frozen=True)
class MaterialConfig:
    """Background permittivity plus either a direct ε_D or a Drude model at ω"""

    eps_m: float
    eps_D: Optional[complex] = None
    drude: Optional[DrudeParams] = None
    omega: Optional[float] = None

    def __post_init__(self):
        if self.eps_m <= 0:
            raise ConfigurationError(f"Background permittivity must be positive, got {self.eps_m}")
        if (self.eps_D is None) == (self.drude is None):
            raise ConfigurationError("Give exactly one of eps_D or a Drude model")
        if self.drude is not None and (self.omega is None or self.omega <= 0):
            raise ConfigurationError(f"Drude inclusion needs a positive frequency, got {self.omega}")

    @property
    def inclusion_permittivity(self) -> complex:
        if self.eps_D is not None:
            return complex(self.eps_D)
        return drude_permittivity(self.drude, self.omega)

    @property
    def lam(self) -> complex:
        return contrast_lambda(self.inclusion_permittivity, self.eps_m)


@dataclass(frozen=True)
class ResonanceMode:
    """Frequency at which Re λ(ω) meets one NP eigenvalue"""

    index: int
    eigenvalue: float
    omega: Optional[float]
    lam: Optional[complex]

    @property
    def resonant(self) -> bool:
        return self.omega is not None


def drude_permittivity(p: DrudeParams, omega: float) -> complex:
    """ε₀(1 − ω_p²/(ω(ω + iγ)))"""
    if omega <= 0:
        raise DomainError(f"Frequency must be positive, got {omega}")
    return p.eps0 * (1.0 - p.omega_p ** 2 / (omega * (omega + 1j * p.gamma)))


def contrast_lambda(eps_D: complex, eps_m: float) -> complex:
    """(ε_D + ε_m) / (2(ε_D − ε_m))"""
    if eps_D == eps_m:
        raise SingularContrastError(f"Inclusion permittivity equals the background ({eps_m})")
    return complex((eps_D + eps_m) / (2.0 * (eps_D - eps_m)))


def resonance_sweep(p: DrudeParams, eps_m: float, omegas: Sequence[float]) -> np.ndarray:
    """λ(ω) along a frequency grid"""
    return np.array([contrast_lambda(drude_permittivity(p, w), eps_m) for w in omegas])


def froehlich_frequency(p: DrudeParams, eps_m: Optional[float] = None) -> float:
    """Frequency where Re ε_D = −ε_m; sqrt(ω_p²/2 − γ²) in vacuum"""
    eps_m = p.eps0 if eps_m is None else eps_m
    radicand = p.omega_p ** 2 / (1.0 + eps_m / p.eps0) - p.gamma ** 2
    if radicand <= 0:
        raise DomainError("Damping too strong: Re ε_D never reaches −ε_m")
    return float(np.sqrt(radicand))


def _resonance_roots(p: DrudeParams, eps_m: float, target: float, omegas: np.ndarray) -> List[float]:
    def mismatch(w: float) -> float:
        return contrast_lambda(drude_permittivity(p, w), eps_m).real - target

    values = np.array([mismatch(w) for w in omegas])
    roots = []
    for i in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0):
        roots.append(bisect(mismatch, omegas[i], omegas[i + 1], rtol=ROOT_RTOL))
    roots.extend(float(w) for w in omegas[values == 0.0])
    return sorted(roots)


def resonance_frequencies(p: DrudeParams, eps_m: float, spec: NPSpectrum,
                          scan_points: int = SCAN_POINTS) -> List[ResonanceMode]:
    """All ω in (0, ω_p) with Re λ(ω) = λ_j, one entry per root or per non-resonant mode"""
    omegas = np.linspace(p.omega_p / scan_points, p.omega_p, scan_points)
    modes = []
    for j, eigenvalue in enumerate(spec.lambdas):
        roots = _resonance_roots(p, eps_m, float(eigenvalue), omegas)
        if not roots:
            logger.warning("mode %d (λ = %.6f) has no resonance below ω_p", j, eigenvalue)
            modes.append(ResonanceMode(index=j, eigenvalue=float(eigenvalue), omega=None, lam=None))
        for w in roots:
            lam = contrast_lambda(drude_permittivity(p, w), eps_m)
            modes.append(ResonanceMode(index=j, eigenvalue=float(eigenvalue), omega=float(w), lam=lam))
    return modes
