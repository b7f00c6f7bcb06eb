"""Exception hierarchy shared across the package.

``ConfigError`` maps to CLI exit code 2, every other ``Melnikov3DError``
subclass to exit code 3.
"""

__all__ = [
    "Melnikov3DError",
    "ConfigError",
    "PoleSingularityError",
    "SaddleClassificationError",
    "IntegrationError",
    "ChartError",
    "QuadratureError",
    "DegenerateNormalError",
]


class Melnikov3DError(Exception):
    """Base class for all package errors."""


class ConfigError(Melnikov3DError):
    """Invalid run configuration (unknown model, bad ranges, ...)."""


class PoleSingularityError(Melnikov3DError):
    """Spherical tangent basis requested at a pole, where it is undefined."""


class SaddleClassificationError(Melnikov3DError):
    """Point is not a fixed point, or its spectrum fits neither saddle case."""


class IntegrationError(Melnikov3DError):
    """Trajectory integration failed (blow-up, step-size underflow)."""


class ChartError(Melnikov3DError):
    """Manifold chart construction or evaluation failed."""


class QuadratureError(Melnikov3DError):
    """Quadrature did not converge, or the integrand fails to decay."""


class DegenerateNormalError(Melnikov3DError):
    """The surface normal vanished where the foliation must be regular."""
