"""Closed-form reference values for the built-in vortex models.

For the radial harmonic forcing, the splitting function of both built-in
fields reduces to explicit expressions; the CLI attaches these as comparison
columns whenever the configured (model, perturbation) pair has one.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "hill_base_integral",
    "classical_amplitude",
    "melnikov_classical_gr",
    "swirl_integrals",
    "melnikov_swirl_gr",
    "classical_lobe_integral",
    "closed_form_for",
]


def _sech(x):
    x = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-x)
    return 2.0 * e / (1.0 + e * e)


def hill_base_integral() -> float:
    """Value of the half-line integral of sech^3(3 tau / 2) cos(4 tau)."""
    return float(73.0 * np.pi / 54.0 * _sech(4.0 * np.pi / 3.0))


def classical_amplitude() -> float:
    return float(73.0 * np.pi**2 / 9.0 * _sech(4.0 * np.pi / 3.0))


def melnikov_classical_gr(p, alpha, t):
    """Splitting function of the classical vortex under the radial forcing."""
    return classical_amplitude() * np.sin(6.0 * np.pi * np.asarray(alpha)) * np.cos(
        4.0 * (np.asarray(p) - t)
    )


def swirl_integrals(R0: float) -> tuple[float, float]:
    """The cosine and sine half-line integrals (A, B) of the swirling case.

    A, B are the values of the integrals of sech^3(3 tau/2) cos(3 tau/(2 R0))
    cos(4 tau) and of its sin-sin counterpart.
    """
    R0 = float(R0)
    c_minus = 73.0 * R0**2 - 48.0 * R0 + 9.0
    c_plus = 73.0 * R0**2 + 48.0 * R0 + 9.0
    s_minus = _sech(np.pi * (8.0 * R0 - 3.0) / (6.0 * R0))
    s_plus = _sech(np.pi * (8.0 * R0 + 3.0) / (6.0 * R0))
    A = np.pi * (c_minus * s_minus + c_plus * s_plus) / (108.0 * R0**2)
    B = np.pi * (c_minus * s_minus - c_plus * s_plus) / (108.0 * R0**2)
    return float(A), float(B)


def melnikov_swirl_gr(p, alpha, t, R0: float):
    """Splitting function of the swirling vortex under the radial forcing.

    Equals 6 pi [A sin(6 pi alpha) cos(4(p-t)) - B cos(6 pi alpha) sin(4(p-t))]
    with the retarded-time convention of the displacement integrals (the
    perturbation sampled at tau + t - p along the trajectory).
    """
    A, B = swirl_integrals(R0)
    a6 = 6.0 * np.pi * np.asarray(alpha)
    ph = 4.0 * (np.asarray(p) - t)
    return 6.0 * np.pi * (A * np.sin(a6) * np.cos(ph) - B * np.cos(a6) * np.sin(ph))


def classical_lobe_integral() -> float:
    """Integral of |M| over one fundamental lobe of the classical case."""
    return hill_base_integral()


def closed_form_for(model_name: str, perturbation_name: str, params: dict):
    """Callable (p, alpha, t) -> M for registered pairs; None otherwise."""
    if perturbation_name != "gr":
        return None
    if model_name == "hill-classical":
        return melnikov_classical_gr
    if model_name == "hill-swirl":
        R0 = params.get("R0")
        if R0 is None:
            return None
        return lambda p, alpha, t: melnikov_swirl_gr(p, alpha, t, R0)
    return None
