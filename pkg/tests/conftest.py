"""Shared fixtures: built-in models, charts, and synthetic test fields.

Frozen reference constants were computed with 30-digit quadrature (mpmath)
from the closed forms and stay independent of the package's own quadrature.
"""

from __future__ import annotations

import numpy as np
import pytest

import melnikov3d as m3
from melnikov3d.charts import HillChartClassical
from melnikov3d.fields import HillClassicalField, PerturbationModel
from melnikov3d.geometry import spherical_angles_many, spherical_components_to_cartesian_many

# int_0^inf sech^3(3 tau / 2) cos(4 tau) dtau = (73 pi / 54) sech(4 pi / 3)
BASE_INTEGRAL = 0.1287776914874360944463065

# amplitude of the classical splitting function: (73 pi^2 / 9) sech(4 pi / 3)
AMPLITUDE = 2.4274022971390925269

# swirl half-line integrals at R0 = 0.1
A_SWIRL_01 = 2.8522263408135192003e-4
B_SWIRL_01 = 2.8483626578599184408e-4

# one-sided integral M^u(0.4, 0.07, 1.3) for the classical field + radial forcing
MU_REFERENCE = -3.2424600873976458152


def classical_m(p, alpha, t):
    """Closed-form splitting function of the classical vortex (radial forcing)."""
    return AMPLITUDE * np.sin(6 * np.pi * np.asarray(alpha)) * np.cos(4 * (np.asarray(p) - t))


def swirl_m(p, alpha, t, A=A_SWIRL_01, B=B_SWIRL_01):
    """Closed-form swirl splitting function; B enters with a minus sign under
    the retarded-time convention g(x(tau, alpha), tau + t - p)."""
    a6 = 6 * np.pi * np.asarray(alpha)
    ph = 4 * (np.asarray(p) - t)
    return 6 * np.pi * (A * np.sin(a6) * np.cos(ph) - B * np.cos(a6) * np.sin(ph))


class ThetaOnlyPerturbation(PerturbationModel):
    """Tangential forcing sin(theta) cos(2 t) theta_hat; no radial component."""

    name = "g-theta"
    coordinate_system = "spherical"

    def evaluate(self, x, t):
        return np.array([0.0, np.sin(x.theta) * np.cos(2.0 * t), 0.0])

    def vector_many(self, points, times):
        pts = np.asarray(points, dtype=float)
        _, _, _, st = spherical_angles_many(pts)
        g_t = st * np.cos(2.0 * np.asarray(times, dtype=float))
        zero = np.zeros_like(g_t)
        return spherical_components_to_cartesian_many(pts, zero, g_t, zero)


class PositiveRadialPerturbation(PerturbationModel):
    """Time-independent radial forcing r^2 sin(theta) (2 + sin 3 phi) r_hat.

    The (2 + sin 3 phi) factor never changes sign, so the splitting function it
    induces is strictly positive: no zero contours anywhere.
    """

    name = "g-positive"
    coordinate_system = "spherical"

    def evaluate(self, x, t):
        return np.array([x.r**2 * np.sin(x.theta) * (2.0 + np.sin(3.0 * x.phi)), 0.0, 0.0])

    def vector_many(self, points, times):
        pts = np.asarray(points, dtype=float)
        r, _, _, st = spherical_angles_many(pts)
        phi = np.arctan2(pts[..., 1], pts[..., 0])
        g_r = r**2 * st * (2.0 + np.sin(3.0 * phi))
        zero = np.zeros_like(g_r)
        return spherical_components_to_cartesian_many(pts, g_r, zero, zero)


class ContractedHillField(HillClassicalField):
    """Classical vortex plus the radial contraction c (1 - r) r_hat.

    The extra term vanishes on the unit sphere, so the heteroclinic geometry
    and its trajectories are untouched, but the flow is no longer
    volume-preserving: div f = c (2/r - 3), equal to -c along the sphere.
    """

    name = "hill-contracted"
    known_volume_preserving = False

    def __init__(self, c: float):
        self.c = float(c)

    def evaluate(self, x):
        base = super().evaluate(x)
        return base + np.array([self.c * (1.0 - x.r), 0.0, 0.0])

    def _components_many(self, points):
        f_r, f_t, f_p = super()._components_many(points)
        r, _, _, _ = spherical_angles_many(np.asarray(points, dtype=float))
        return f_r + self.c * (1.0 - r), f_t, f_p

    def divergence(self, point):
        r = float(np.linalg.norm(point))
        return self.c * (2.0 / r - 3.0)


class ContractedHillChart(HillChartClassical):
    """Analytic chart of the contracted field: same sphere trajectories, with
    the divergence line integral -c (p - tau) along them."""

    def divergence_integral_many(self, tau, p, alpha):
        tau = np.asarray(tau, dtype=float)
        return -self.field.c * (float(p) - tau)


@pytest.fixture(scope="session")
def hill_field():
    return m3.HillClassicalField()


@pytest.fixture(scope="session")
def swirl_field():
    return m3.HillSwirlField(0.1)


@pytest.fixture(scope="session")
def gr():
    return m3.RadialHarmonicPerturbation()


@pytest.fixture(scope="session")
def hill_chart(hill_field):
    return m3.HillChartClassical(hill_field)


@pytest.fixture(scope="session")
def swirl_chart(swirl_field):
    return m3.HillChartSwirl(swirl_field, 0.1)


@pytest.fixture(scope="session")
def gl_quad():
    return m3.QuadratureSpec(rule="gauss-legendre")


@pytest.fixture(scope="session")
def contracted():
    field = ContractedHillField(0.4)
    return field, ContractedHillChart(field)
