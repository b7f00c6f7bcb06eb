"""Velocity-field and perturbation models.

Built-in models are defined analytically by their spherical components; all
cartesian evaluation (including the vectorized fast paths) goes through the
pole-safe basis rotation in :mod:`melnikov3d.geometry`. Jacobians come from
Richardson-extrapolated central differences on the cartesian field: a single
extra extrapolation level is kept because the built-in vortex fields are only
C0 across their unit sphere, which would otherwise leave an O(h) error in
derivatives taken exactly on it.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SaddleClassificationError
from .geometry import (
    SphericalPoint,
    cartesian_to_spherical,
    spherical_angles_many,
    spherical_components_to_cartesian_many,
)

__all__ = [
    "FieldModel",
    "PerturbationModel",
    "SaddleCase",
    "SaddleSpectrum",
    "HillClassicalField",
    "HillSwirlField",
    "RadialHarmonicPerturbation",
    "ZeroPerturbation",
    "classify_saddle",
    "get_field_model",
    "get_perturbation",
    "FIELD_REGISTRY",
    "PERTURBATION_REGISTRY",
]

FD_STEP = 1e-5


class FieldModel(ABC):
    """Autonomous velocity field f(x).

    ``evaluate`` works in the model's own coordinates (spherical components at
    a :class:`SphericalPoint` for the built-ins); ``velocity``/``velocity_many``
    are the cartesian views every downstream consumer uses.
    """

    name: str = "field"
    coordinate_system: str = "cartesian"
    known_volume_preserving: bool = False
    fd_step: float = FD_STEP  # shrink for fields with sub-unit spatial scales

    @abstractmethod
    def evaluate(self, x):
        """Velocity components in model coordinates."""

    def velocity(self, point: np.ndarray) -> np.ndarray:
        """Cartesian velocity at a cartesian point."""
        return self.velocity_many(np.asarray(point, dtype=float)[None, :])[0]

    def velocity_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.coordinate_system == "cartesian":
            return np.stack([np.asarray(self.evaluate(p), dtype=float) for p in pts])
        comps = np.stack(
            [np.asarray(self.evaluate(cartesian_to_spherical(p)), dtype=float) for p in pts]
        )
        return spherical_components_to_cartesian_many(
            pts, comps[:, 0], comps[:, 1], comps[:, 2], tangential_tol=1e-12
        )

    def jacobian(self, point: np.ndarray) -> np.ndarray:
        """Jacobian of the cartesian field by extrapolated central differences."""
        point = np.asarray(point, dtype=float)
        h = self.fd_step * max(1.0, float(np.max(np.abs(point))))
        return 2.0 * self._central_jacobian(point, h / 2) - self._central_jacobian(point, h)

    def _central_jacobian(self, point: np.ndarray, h: float) -> np.ndarray:
        offsets = np.zeros((6, 3))
        for j in range(3):
            offsets[2 * j, j] = h
            offsets[2 * j + 1, j] = -h
        vals = self.velocity_many(point[None, :] + offsets)
        J = np.empty((3, 3))
        for j in range(3):
            J[:, j] = (vals[2 * j] - vals[2 * j + 1]) / (2 * h)
        return J

    def divergence(self, point: np.ndarray) -> float:
        if self.known_volume_preserving:
            return 0.0
        return float(np.trace(self.jacobian(point)))

    def parameters(self) -> dict:
        return {}


class PerturbationModel(ABC):
    """Time-dependent perturbation velocity g(x, t)."""

    name: str = "perturbation"
    coordinate_system: str = "cartesian"
    bounded_hint: float | None = None

    @abstractmethod
    def evaluate(self, x, t: float):
        """Perturbation components in model coordinates."""

    def vector(self, point: np.ndarray, t: float) -> np.ndarray:
        return self.vector_many(np.asarray(point, dtype=float)[None, :], np.array([t]))[0]

    def vector_many(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        times = np.asarray(times, dtype=float)
        if self.coordinate_system == "cartesian":
            return np.stack(
                [np.asarray(self.evaluate(p, t), dtype=float) for p, t in zip(pts, times)]
            )
        comps = np.stack(
            [
                np.asarray(self.evaluate(cartesian_to_spherical(p), t), dtype=float)
                for p, t in zip(pts, times)
            ]
        )
        return spherical_components_to_cartesian_many(
            pts, comps[:, 0], comps[:, 1], comps[:, 2], tangential_tol=1e-12
        )


class HillClassicalField(FieldModel):
    """Classical spherical vortex inside r=1 matched to an outer stream.

    Interior: f_r = (3/2) cos(theta) (1 - r^2), f_theta = -(3/2) sin(theta) (1 - 2 r^2).
    Exterior: f_r = -cos(theta) (1 - r^-3),    f_theta = sin(theta) (1 + r^-3 / 2).
    Divergence-free; the unit sphere is invariant with saddles at both poles.
    """

    name = "hill-classical"
    coordinate_system = "spherical"
    known_volume_preserving = True

    def evaluate(self, x: SphericalPoint) -> np.ndarray:
        r, st, ct = x.r, np.sin(x.theta), np.cos(x.theta)
        if r <= 1.0:
            return np.array([1.5 * ct * (1.0 - r * r), -1.5 * st * (1.0 - 2.0 * r * r), 0.0])
        return np.array([-ct * (1.0 - r**-3), st * (1.0 + 0.5 * r**-3), 0.0])

    def _components_many(self, points: np.ndarray):
        r, _, ct, st = spherical_angles_many(points)
        interior = r <= 1.0
        r_safe = np.where(r > 0, r, 1.0)
        inv_r3 = np.where(interior, 0.0, r_safe**-3.0)
        f_r = np.where(
            interior, 1.5 * ct * (1.0 - r * r), -ct * (1.0 - inv_r3)
        )
        f_t = np.where(
            interior, -1.5 * st * (1.0 - 2.0 * r * r), st * (1.0 + 0.5 * inv_r3)
        )
        return f_r, f_t, np.zeros_like(f_r)

    def velocity_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        f_r, f_t, f_p = self._components_many(pts)
        return spherical_components_to_cartesian_many(pts, f_r, f_t, f_p)


class HillSwirlField(HillClassicalField):
    """Hill vortex with an azimuthal swirl of rate -1/(2 R0).

    The swirl leaves the meridional (r, theta) flow on the unit sphere
    untouched but makes the polar saddles spiral; R0 -> infinity recovers the
    classical field.
    """

    name = "hill-swirl"

    def __init__(self, R0: float):
        if not (np.isfinite(R0) and R0 > 0):
            raise ConfigError(f"swirl Rossby number must be positive, got {R0}")
        self.R0 = float(R0)
        # exterior terms oscillate on the radial scale R0
        self.fd_step = min(FD_STEP, 1.5e-5 * self.R0)

    def evaluate(self, x: SphericalPoint) -> np.ndarray:
        r, st, ct = x.r, np.sin(x.theta), np.cos(x.theta)
        f_phi = -r * st / (2.0 * self.R0)
        if r <= 1.0:
            return np.array(
                [1.5 * ct * (1.0 - r * r), -1.5 * st * (1.0 - 2.0 * r * r), f_phi]
            )
        q = (r - 1.0) / self.R0
        cq, sq = np.cos(q), np.sin(q)
        f_r = -ct * (1.0 - cq / r**2 + self.R0 * sq / r**3)
        f_t = (st / (2.0 * r)) * (2.0 * r + cq / r + (1.0 / self.R0 - self.R0 / r**2) * sq)
        return np.array([f_r, f_t, f_phi])

    def _components_many(self, points: np.ndarray):
        r, _, ct, st = spherical_angles_many(points)
        interior = r <= 1.0
        r_safe = np.where(r > 0, r, 1.0)
        q = np.where(interior, 0.0, (r_safe - 1.0) / self.R0)
        cq, sq = np.cos(q), np.sin(q)
        f_r = np.where(
            interior,
            1.5 * ct * (1.0 - r * r),
            -ct * (1.0 - cq / r_safe**2 + self.R0 * sq / r_safe**3),
        )
        f_t = np.where(
            interior,
            -1.5 * st * (1.0 - 2.0 * r * r),
            (st / (2.0 * r_safe))
            * (2.0 * r_safe + cq / r_safe + (1.0 / self.R0 - self.R0 / r_safe**2) * sq),
        )
        f_p = -r * st / (2.0 * self.R0)
        return f_r, f_t, f_p

    def parameters(self) -> dict:
        return {"R0": self.R0}


class RadialHarmonicPerturbation(PerturbationModel):
    """Purely radial forcing r^2 sin(theta) sin(3 phi) cos(4 t) r_hat."""

    name = "gr"
    coordinate_system = "spherical"
    bounded_hint = None  # r^2 growth: bounded only on bounded domains

    def evaluate(self, x: SphericalPoint, t: float) -> np.ndarray:
        g_r = x.r**2 * np.sin(x.theta) * np.sin(3.0 * x.phi) * np.cos(4.0 * t)
        return np.array([g_r, 0.0, 0.0])

    def vector_many(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        times = np.asarray(times, dtype=float)
        r, rxy, ct, st = spherical_angles_many(pts)
        phi = np.arctan2(pts[..., 1], pts[..., 0])
        g_r = r**2 * st * np.sin(3.0 * phi) * np.cos(4.0 * times)
        zero = np.zeros_like(g_r)
        return spherical_components_to_cartesian_many(pts, g_r, zero, zero)


class ZeroPerturbation(PerturbationModel):
    """g identically zero; the unperturbed flow."""

    name = "none"
    coordinate_system = "cartesian"
    bounded_hint = 0.0

    def evaluate(self, x, t: float) -> np.ndarray:
        return np.zeros(3)

    def vector_many(self, points: np.ndarray, times: np.ndarray) -> np.ndarray:
        return np.zeros((np.asarray(points).shape[0], 3))


class SaddleCase(enum.Enum):
    """Which invariant manifold of the saddle is two-dimensional."""

    TWO_DIM_UNSTABLE = "case1"  # one negative eigenvalue, pair with Re > 0
    TWO_DIM_STABLE = "case2"  # one positive eigenvalue, pair with Re < 0


@dataclass
class SaddleSpectrum:
    """Eigenstructure of the linearization at a saddle fixed point.

    ``lambda_s`` is the sign-isolated eigenvalue, ``lambda_u1``/``lambda_u2``
    the pair whose real parts share the opposite sign (the plane tangent to
    the two-dimensional manifold). Eigenvectors are unit-normalized.
    """

    location: np.ndarray
    lambda_s: float
    lambda_u1: complex
    lambda_u2: complex
    eigvec_s: np.ndarray
    eigvec_u1: np.ndarray
    eigvec_u2: np.ndarray
    case: SaddleCase

    def plane_rate(self) -> float:
        """Common real part of the planar pair."""
        return float(np.real(self.lambda_u1))

    def plane_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Real orthonormal basis of the invariant plane at the saddle."""
        if abs(np.imag(self.lambda_u1)) > 0:
            b1 = np.real(self.eigvec_u1)
            b2 = np.imag(self.eigvec_u1)
        else:
            b1 = np.real(self.eigvec_u1)
            b2 = np.real(self.eigvec_u2)
        b1 = b1 / np.linalg.norm(b1)
        b2 = b2 - (b2 @ b1) * b1
        n2 = np.linalg.norm(b2)
        if n2 < 1e-12:
            raise SaddleClassificationError("planar eigenvectors are not independent")
        return b1, b2 / n2


def classify_saddle(field: FieldModel, x0, tol: float = 1e-9) -> SaddleSpectrum:
    """Eigendecompose the Jacobian at a fixed point and sort it into a saddle case.

    Raises ``SaddleClassificationError`` when x0 is not a fixed point to
    tolerance, when any eigenvalue is too close to the imaginary axis
    (nonhyperbolic), or when the sign pattern fits neither case.
    """
    x0 = np.asarray(x0, dtype=float)
    speed = float(np.linalg.norm(field.velocity(x0)))
    if speed >= tol:
        raise SaddleClassificationError(
            f"|f(x0)| = {speed:.3e} exceeds fixed-point tolerance {tol:.3e}"
        )
    J = field.jacobian(x0)
    w, V = np.linalg.eig(J)
    re = np.real(w)
    hyp_tol = tol * max(1.0, float(np.max(np.abs(w))))
    if np.any(np.abs(re) < hyp_tol):
        raise SaddleClassificationError(
            f"nonhyperbolic spectrum: eigenvalue real parts {re}"
        )
    n_pos = int(np.sum(re > 0))
    if n_pos == 2:
        case = SaddleCase.TWO_DIM_UNSTABLE
        iso = int(np.argmin(re))
        pair = [i for i in range(3) if i != iso]
    elif n_pos == 1:
        case = SaddleCase.TWO_DIM_STABLE
        iso = int(np.argmax(re))
        pair = [i for i in range(3) if i != iso]
    else:
        raise SaddleClassificationError(f"spectrum {w} fits neither saddle case")
    if abs(np.imag(w[iso])) > hyp_tol:
        raise SaddleClassificationError(f"isolated eigenvalue {w[iso]} is not real")
    # orient the pair so the first member carries the nonnegative imaginary part
    if np.imag(w[pair[0]]) < np.imag(w[pair[1]]):
        pair = [pair[1], pair[0]]

    def unit(v):
        return v / np.linalg.norm(v)

    return SaddleSpectrum(
        location=x0,
        lambda_s=float(np.real(w[iso])),
        lambda_u1=complex(w[pair[0]]),
        lambda_u2=complex(w[pair[1]]),
        eigvec_s=unit(V[:, iso]),
        eigvec_u1=unit(V[:, pair[0]]),
        eigvec_u2=unit(V[:, pair[1]]),
        case=case,
    )


# ---------------------------------------------------------------------------
# model registry (CLI entry point)
# ---------------------------------------------------------------------------

FIELD_REGISTRY = {
    "hill-classical": (HillClassicalField, ()),
    "hill-swirl": (HillSwirlField, ("R0",)),
}

PERTURBATION_REGISTRY = {
    "gr": RadialHarmonicPerturbation,
    "none": ZeroPerturbation,
}


def get_field_model(name: str, **params) -> FieldModel:
    if name not in FIELD_REGISTRY:
        raise ConfigError(
            f"unknown field model {name!r}; available: {sorted(FIELD_REGISTRY)}"
        )
    cls, required = FIELD_REGISTRY[name]
    missing = [k for k in required if k not in params or params[k] is None]
    if missing:
        raise ConfigError(f"model {name!r} requires parameters {missing}")
    kwargs = {k: params[k] for k in required}
    extra = set(params) - set(required) - {k for k in params if params[k] is None}
    if extra:
        raise ConfigError(f"model {name!r} does not accept parameters {sorted(extra)}")
    return cls(**kwargs)


def get_perturbation(name: str) -> PerturbationModel:
    if name not in PERTURBATION_REGISTRY:
        raise ConfigError(
            f"unknown perturbation {name!r}; available: {sorted(PERTURBATION_REGISTRY)}"
        )
    return PERTURBATION_REGISTRY[name]()
