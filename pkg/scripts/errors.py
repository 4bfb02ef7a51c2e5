#!/usr/bin/env python3
"""
Exception hierarchy for plasmoshape
"""


class PlasmoshapeError(Exception):
    """Base class for all plasmoshape failures"""


class ConfigurationError(PlasmoshapeError, ValueError):
    """Invalid node count, preset name or environment value"""


class StarShapeError(PlasmoshapeError, ValueError):
    """Radial function is not strictly positive"""


class OrientationError(PlasmoshapeError, ValueError):
    """Curve is not counterclockwise"""


class PerturbationTooLargeError(PlasmoshapeError, ValueError):
    """Perturbed node polyline intersects itself"""


class DomainError(PlasmoshapeError, ValueError):
    """Input outside the domain of an operation"""


class NearBoundaryError(PlasmoshapeError, ValueError):
    """Evaluation point inside the curve or too close to it"""


class SingularContrastError(PlasmoshapeError, ValueError):
    """Inclusion and background permittivities coincide"""


class UndefinedPosteriorError(PlasmoshapeError, ValueError):
    """Posterior covariance needs positive noise level and regularization"""


class DiscretizationError(PlasmoshapeError, RuntimeError):
    """Discrete operator violates H*-self-adjointness beyond tolerance"""


class ResonanceSingularityError(PlasmoshapeError, RuntimeError):
    """Contrast lies on the discrete spectrum"""


class DegeneracyError(PlasmoshapeError, RuntimeError):
    """Coupled eigenvalues too close for first-order perturbation"""


class RegularizationRequiredError(PlasmoshapeError, RuntimeError):
    """Normal equations singular without regularization"""


class DivergenceError(PlasmoshapeError, RuntimeError):
    """Step halving failed to keep the iterate star-shaped"""


class CovarianceError(PlasmoshapeError, RuntimeError):
    """Cholesky factorization of a covariance failed"""
