"""Exact 3D vector algebra and spherical-coordinate conversions.

Conventions: ``theta`` is the polar angle measured from the +z pole,
``phi`` the azimuth counterclockwise from +x. The local orthonormal basis
is (r_hat, theta_hat, phi_hat), right-handed: theta_hat x phi_hat = r_hat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoleSingularityError

__all__ = [
    "vec3",
    "mat3",
    "wedge",
    "scalar_triple",
    "triple_identity_residual",
    "SphericalPoint",
    "spherical_to_cartesian",
    "cartesian_to_spherical",
    "spherical_vector_to_cartesian",
    "spherical_basis",
]

# sin(theta) below this is treated as sitting exactly on a pole
POLE_TOL = 1e-14

TWO_PI = 2.0 * np.pi


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a finite 3-vector; accepts three scalars or one length-3 array."""
    if y is None:
        v = np.asarray(x, dtype=float)
    else:
        v = np.array([x, y, z], dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


def mat3(entries) -> np.ndarray:
    """Build a finite 3x3 matrix (row-major)."""
    m = np.asarray(entries, dtype=float)
    if m.shape == (9,):
        m = m.reshape(3, 3)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite matrix entries")
    return m


def wedge(b, c) -> np.ndarray:
    """Right-handed cross product b x c."""
    return np.cross(np.asarray(b, dtype=float), np.asarray(c, dtype=float))


def scalar_triple(b, c, d) -> float:
    """(b x c) . d"""
    return float(np.dot(wedge(b, c), np.asarray(d, dtype=float)))


def triple_identity_residual(A, b, c, d) -> float:
    """Residual of the trace identity for the cross product.

    Returns ``[(Ab) x c].d + [b x (Ac)].d + [b x c].(Ad) - Tr(A) [(b x c).d]``,
    which is identically zero; anything beyond rounding signals a broken
    linear-algebra backend.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    lhs = (
        scalar_triple(A @ b, c, d)
        + scalar_triple(b, A @ c, d)
        + float(np.dot(wedge(b, c), A @ d))
    )
    return lhs - float(np.trace(A)) * scalar_triple(b, c, d)


@dataclass(frozen=True)
class SphericalPoint:
    """Point (r, theta, phi) with r >= 0, theta in [0, pi], phi in [0, 2*pi).

    ``theta`` is clamped to [0, pi] against rounding spill; ``phi`` is reduced
    mod 2*pi. Negative r or non-finite input is rejected.
    """

    r: float
    theta: float
    phi: float

    def __post_init__(self):
        r = float(self.r)
        theta = float(self.theta)
        phi = float(self.phi)
        if not (np.isfinite(r) and np.isfinite(theta) and np.isfinite(phi)):
            raise ValueError(f"non-finite spherical coordinates ({r}, {theta}, {phi})")
        if r < 0.0:
            raise ValueError(f"negative radius r={r}")
        theta = min(max(theta, 0.0), np.pi)
        phi = phi % TWO_PI
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    def is_polar(self) -> bool:
        return np.sin(self.theta) < POLE_TOL


def spherical_to_cartesian(p: SphericalPoint) -> np.ndarray:
    st, ct = np.sin(p.theta), np.cos(p.theta)
    cp, sp = np.cos(p.phi), np.sin(p.phi)
    return np.array([p.r * st * cp, p.r * st * sp, p.r * ct])


def cartesian_to_spherical(v) -> SphericalPoint:
    x, y, z = np.asarray(v, dtype=float)
    rxy = np.hypot(x, y)
    r = np.hypot(rxy, z)
    theta = np.arctan2(rxy, z)
    phi = np.arctan2(y, x)
    return SphericalPoint(r, theta, phi)


def spherical_basis(theta: float, phi: float):
    """Return (r_hat, theta_hat, phi_hat) at the given angles.

    Raises ``PoleSingularityError`` at the poles, where phi_hat and theta_hat
    have no intrinsic meaning.
    """
    if np.sin(theta) < POLE_TOL:
        raise PoleSingularityError(
            f"tangent basis undefined at theta={theta} (pole)"
        )
    st, ct = np.sin(theta), np.cos(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    r_hat = np.array([st * cp, st * sp, ct])
    theta_hat = np.array([ct * cp, ct * sp, -st])
    phi_hat = np.array([-sp, cp, 0.0])
    return r_hat, theta_hat, phi_hat


def spherical_vector_to_cartesian(p: SphericalPoint, v_sph) -> np.ndarray:
    """Rotate components (v_r, v_theta, v_phi) at p into cartesian components."""
    v_r, v_t, v_p = np.asarray(v_sph, dtype=float)
    r_hat, theta_hat, phi_hat = spherical_basis(p.theta, p.phi)
    return v_r * r_hat + v_t * theta_hat + v_p * phi_hat


# ---------------------------------------------------------------------------
# vectorized helpers (arrays of points); used by the field/chart fast paths
# ---------------------------------------------------------------------------

def _split_xyz(points: np.ndarray):
    pts = np.asarray(points, dtype=float)
    return pts[..., 0], pts[..., 1], pts[..., 2]


def spherical_angles_many(points: np.ndarray):
    """(r, rxy, cos(theta), sin(theta)) for an (N, 3) array of points.

    sin(theta) comes from hypot(x, y)/r rather than sqrt(1 - cos^2), which
    loses half the significant digits near the poles.
    """
    x, y, z = _split_xyz(points)
    rxy = np.hypot(x, y)
    r = np.hypot(rxy, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        ct = np.where(r > 0, z / np.where(r > 0, r, 1.0), 1.0)
        st = np.where(r > 0, rxy / np.where(r > 0, r, 1.0), 0.0)
    return r, rxy, ct, st


def spherical_components_to_cartesian_many(
    points: np.ndarray, v_r, v_t, v_p, *, tangential_tol: float = 0.0
) -> np.ndarray:
    """Vectorized basis rotation at an (N, 3) array of cartesian points.

    At on-axis points the tangent basis is undefined; there the tangential
    components must not exceed ``tangential_tol`` (then only the radial part
    survives), otherwise ``PoleSingularityError`` is raised.
    """
    x, y, z = _split_xyz(points)
    rxy = np.hypot(x, y)
    r = np.hypot(rxy, z)
    on_axis = rxy < POLE_TOL * np.maximum(r, 1.0)
    if np.any(on_axis):
        bad = (np.abs(np.asarray(v_t)) > tangential_tol) | (
            np.abs(np.asarray(v_p)) > tangential_tol
        )
        if np.any(on_axis & bad):
            raise PoleSingularityError(
                "nonzero tangential components on the polar axis"
            )
    safe_rxy = np.where(on_axis, 1.0, rxy)
    safe_r = np.where(r > 0, r, 1.0)
    cp, sp = x / safe_rxy, y / safe_rxy
    ct, st = z / safe_r, rxy / safe_r
    vx = v_r * st * cp + v_t * ct * cp - v_p * sp
    vy = v_r * st * sp + v_t * ct * sp + v_p * cp
    vz = v_r * ct - v_t * st
    out = np.stack([vx, vy, vz], axis=-1)
    if np.any(on_axis):
        # pure-radial vector along the axis: r_hat = sign(z) * z_hat
        sign_z = np.where(z >= 0, 1.0, -1.0)
        axis_out = np.zeros_like(out)
        axis_out[..., 2] = np.broadcast_to(np.asarray(v_r) * sign_z, axis_out[..., 2].shape)
        out = np.where(on_axis[..., None], axis_out, out)
    return out
