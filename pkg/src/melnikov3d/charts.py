"""Trajectory integration and (p, alpha) parameterizations of 2D invariant manifolds.

A chart x(p, alpha) follows one trajectory per alpha in S^1, with p the time
along it; charts expose the trajectory point, its alpha-partial, the velocity
f(x(p, alpha)), the accumulated divergence integral along the trajectory, and
the induced surface normal f ^ x_alpha. Analytic charts exist for both
built-in vortex fields; ``generic_chart_from_saddle`` builds the same object
for arbitrary fields by shooting a ring of seeds out of the saddle's invariant
plane.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import ChartError, DegenerateNormalError, IntegrationError
from .fields import FieldModel, PerturbationModel, SaddleCase, SaddleSpectrum, classify_saddle
from .geometry import spherical_components_to_cartesian_many

__all__ = [
    "Trajectory",
    "integrate",
    "rk4_integrate",
    "ChartKind",
    "ManifoldChart",
    "HillChartClassical",
    "HillChartSwirl",
    "hill_chart_classical",
    "hill_chart_swirl",
    "ShootingChart",
    "generic_chart_from_saddle",
    "chart_normal",
]

DEGENERATE_NORMAL_TOL = 1e-12


def _sech(x):
    """Overflow-safe sech."""
    x = np.abs(x)
    e = np.exp(-x)
    return 2.0 * e / (1.0 + e * e)


@dataclass
class Trajectory:
    """Sampled solution of x' = f + eps*g with its divergence line integral."""

    times: np.ndarray
    states: np.ndarray
    div_integral: np.ndarray
    nfev: int
    n_steps: int
    sol: object | None = None  # dense-output interpolant over [times[0], times[-1]]

    def __post_init__(self):
        dt = np.diff(self.times)
        if self.times.size > 1 and not (np.all(dt > 0) or np.all(dt < 0)):
            raise ValueError("trajectory sample times must be strictly monotone")

    def state_at(self, t: float) -> np.ndarray:
        if self.sol is None:
            raise ValueError("trajectory was integrated without dense output")
        return np.asarray(self.sol(t))[:3]


def _augmented_rhs(field: FieldModel, perturbation: PerturbationModel | None, eps: float):
    track_div = not field.known_volume_preserving

    def rhs(t, y):
        x = y[:3]
        v = field.velocity(x)
        if perturbation is not None and eps != 0.0:
            v = v + eps * perturbation.vector(x, t)
        div = field.divergence(x) if track_div else 0.0
        return np.array([v[0], v[1], v[2], div])

    return rhs


def integrate(
    field: FieldModel,
    perturbation: PerturbationModel | None = None,
    eps: float = 0.0,
    *,
    x0,
    t0: float,
    t1: float,
    tol: float = 1e-10,
    blowup_radius: float = 1e3,
    dense: bool = True,
) -> Trajectory:
    """Integrate x' = f(x) + eps*g(x, t) from t0 to t1 with local error <= tol.

    The scalar d/dt of the divergence line integral is carried as an augmented
    state so downstream quadrature never re-integrates it. Without a
    perturbation model eps is forced to zero. Blow-up beyond
    ``blowup_radius`` and integrator step failures raise ``IntegrationError``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if perturbation is None:
        eps = 0.0
    x0 = np.asarray(x0, dtype=float)
    y0 = np.append(x0, 0.0)

    def blowup(t, y):
        return float(np.linalg.norm(y[:3]) - blowup_radius)

    blowup.terminal = True

    sol = solve_ivp(
        _augmented_rhs(field, perturbation, eps),
        (t0, t1),
        y0,
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        dense_output=dense,
        events=[blowup],
    )
    if sol.status == 1:
        raise IntegrationError(
            f"trajectory left |x| <= {blowup_radius} at t = {sol.t_events[0][0]:.6g}"
        )
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}")
    return Trajectory(
        times=sol.t,
        states=sol.y[:3].T,
        div_integral=sol.y[3],
        nfev=sol.nfev,
        n_steps=sol.t.size - 1,
        sol=sol.sol if dense else None,
    )


def rk4_integrate(field, perturbation, eps, *, x0, t0, t1, n_steps) -> np.ndarray:
    """Fixed-step classical RK4 endpoint, kept as a cross-check on the adaptive path."""
    rhs = _augmented_rhs(field, perturbation, eps)
    h = (t1 - t0) / n_steps
    y = np.append(np.asarray(x0, dtype=float), 0.0)
    t = t0
    for _ in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y[:3]


class ChartKind(enum.Enum):
    UNSTABLE = "unstable"
    STABLE = "stable"
    HETEROCLINIC = "heteroclinic"


class ManifoldChart:
    """Base chart: the scalar entry points plus loop-based batch fallbacks.

    Subclasses must provide ``point_many``, ``alpha_partial_many``,
    ``velocity_many`` and ``divergence_integral_many`` (vectorized over
    paired arrays); everything else derives from those.
    """

    kind: ChartKind
    field: FieldModel
    p_min: float = -np.inf
    p_max: float = np.inf
    orientation: str = "unspecified"
    spectrum_a: SaddleSpectrum | None = None
    spectrum_b: SaddleSpectrum | None = None

    def check_domain(self, p) -> None:
        p = np.asarray(p, dtype=float)
        if np.any(p < self.p_min) or np.any(p > self.p_max):
            raise ChartError(
                f"p outside chart domain [{self.p_min:.6g}, {self.p_max:.6g}]"
            )

    # -- scalar API ---------------------------------------------------------
    def point(self, p: float, alpha: float) -> np.ndarray:
        return self.point_many(np.atleast_1d(float(p)), np.atleast_1d(float(alpha)))[0]

    def velocity(self, p: float, alpha: float) -> np.ndarray:
        return self.velocity_many(np.atleast_1d(float(p)), np.atleast_1d(float(alpha)))[0]

    def alpha_partial(self, p: float, alpha: float) -> np.ndarray:
        return self.alpha_partial_many(
            np.atleast_1d(float(p)), np.atleast_1d(float(alpha))
        )[0]

    def divergence_integral(self, tau: float, p: float, alpha: float) -> float:
        return float(
            self.divergence_integral_many(np.atleast_1d(float(tau)), float(p), float(alpha))[0]
        )

    def normal(self, p: float, alpha: float) -> np.ndarray:
        n = np.cross(self.velocity(p, alpha), self.alpha_partial(p, alpha))
        if np.linalg.norm(n) < DEGENERATE_NORMAL_TOL:
            raise DegenerateNormalError(
                f"degenerate surface normal at (p, alpha) = ({p}, {alpha})"
            )
        return n

    def normal_many(self, p: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        return np.cross(self.velocity_many(p, alpha), self.alpha_partial_many(p, alpha))

    # -- batch API (must be overridden) --------------------------------------
    def point_many(self, p: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def velocity_many(self, p: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        return self.field.velocity_many(self.point_many(p, alpha))

    def alpha_partial_many(self, p: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def divergence_integral_many(self, tau: np.ndarray, p: float, alpha: float) -> np.ndarray:
        raise NotImplementedError


def chart_normal(chart: ManifoldChart, p: float, alpha: float) -> np.ndarray:
    """f(x(p, alpha)) ^ x_alpha(p, alpha) in cartesian components."""
    return chart.normal(p, alpha)


class HillChartClassical(ManifoldChart):
    """Unit-sphere heteroclinic chart of the classical vortex.

    theta(p) = arccos(-tanh(3p/2)) with p = 0 on the equator, phi = 2*pi*alpha;
    alpha_partial = 2*pi*sech(3p/2) phi_hat and the normal is
    3*pi*sech^2(3p/2) r_hat (outward).
    """

    kind = ChartKind.HETEROCLINIC
    orientation = "outward"

    def __init__(self, field: FieldModel):
        self.field = field
        self._spectra_cache: dict[str, SaddleSpectrum] = {}

    # poles are exact fixed points of both built-in fields
    @property
    def spectrum_a(self) -> SaddleSpectrum:
        if "a" not in self._spectra_cache:
            self._spectra_cache["a"] = classify_saddle(self.field, [0.0, 0.0, 1.0])
        return self._spectra_cache["a"]

    @property
    def spectrum_b(self) -> SaddleSpectrum:
        if "b" not in self._spectra_cache:
            self._spectra_cache["b"] = classify_saddle(self.field, [0.0, 0.0, -1.0])
        return self._spectra_cache["b"]

    def _phi(self, p, alpha):
        return 2.0 * np.pi * alpha

    def _phi_swirl_rate(self):
        return 0.0

    def point_many(self, p, alpha):
        p = np.asarray(p, dtype=float)
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), p.shape)
        st = _sech(1.5 * p)
        ct = -np.tanh(1.5 * p)
        phi = self._phi(p, alpha)
        return np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)

    def velocity_many(self, p, alpha):
        p = np.asarray(p, dtype=float)
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), p.shape)
        pts = self.point_many(p, alpha)
        st = _sech(1.5 * p)
        f_t = 1.5 * st
        f_p = self._phi_swirl_rate() * st
        zeros = np.zeros_like(st)
        # components vanish with st, so the pole limit is well-defined
        return spherical_components_to_cartesian_many(pts, zeros, f_t, f_p,
                                                      tangential_tol=1e-13)

    def alpha_partial_many(self, p, alpha):
        p = np.asarray(p, dtype=float)
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), p.shape)
        pts = self.point_many(p, alpha)
        st = _sech(1.5 * p)
        zeros = np.zeros_like(st)
        return spherical_components_to_cartesian_many(pts, zeros, zeros,
                                                      2.0 * np.pi * st,
                                                      tangential_tol=1e-13)

    def divergence_integral_many(self, tau, p, alpha):
        return np.zeros_like(np.asarray(tau, dtype=float))


class HillChartSwirl(HillChartClassical):
    """Swirling variant: phi(p, alpha) = 2*pi*alpha - p/(2*R0), same normal."""

    def __init__(self, field: FieldModel, R0: float):
        super().__init__(field)
        self.R0 = float(R0)

    def _phi(self, p, alpha):
        return 2.0 * np.pi * alpha - p / (2.0 * self.R0)

    def _phi_swirl_rate(self):
        return -1.0 / (2.0 * self.R0)


def hill_chart_classical(field: FieldModel | None = None) -> HillChartClassical:
    from .fields import HillClassicalField

    return HillChartClassical(field if field is not None else HillClassicalField())


def hill_chart_swirl(R0: float, field: FieldModel | None = None) -> HillChartSwirl:
    from .fields import HillSwirlField

    if field is None:
        field = HillSwirlField(R0)
    return HillChartSwirl(field, R0)


# ---------------------------------------------------------------------------
# shooting chart for generic saddles
# ---------------------------------------------------------------------------


@dataclass
class _SeedTrack:
    """One ring trajectory: two dense segments split at its p = 0 crossing."""

    t_cross: float
    sol_pre: object  # dense solution on [0, t_cross], seed time axis
    sol_post: object  # dense solution on [0, p_hi], p time axis
    div_at_cross: float


class ShootingChart(ManifoldChart):
    """Chart traced from a ring of seeds in the saddle's invariant plane.

    Each of the ``n_alpha`` seeds is integrated forward; p = 0 is calibrated
    where the trajectory first crosses the user section (arc length 1 from the
    saddle when no section is given). Off-grid alpha is served by periodic
    cubic interpolation across the ring; x_alpha differentiates that
    interpolant. The divergence line integral rides along as an augmented
    integrator state.
    """

    kind = ChartKind.UNSTABLE
    orientation = "seed-ring"

    def __init__(
        self,
        field: FieldModel,
        spectrum: SaddleSpectrum,
        tracks: list[_SeedTrack],
        alpha_grid: np.ndarray,
        p_lo: float,
        p_hi: float,
    ):
        self.field = field
        self.spectrum_a = spectrum
        self.p_min = p_lo
        self.p_max = p_hi
        self._tracks = tracks
        self._alpha_grid = alpha_grid
        self._n_alpha = alpha_grid.size
        self._alpha_ext = np.append(alpha_grid, 1.0)

    # -- raw per-track evaluation -------------------------------------------
    def _track_states(self, k: int, p: np.ndarray) -> np.ndarray:
        """States (x, y, z, divergence integral) of ring track k at chart times p."""
        tr = self._tracks[k]
        p = np.asarray(p, dtype=float)
        out = np.empty((p.size, 4))
        pre = p < 0
        if np.any(pre):
            out[pre] = tr.sol_pre(tr.t_cross + p[pre]).T[:, :4]
        if np.any(~pre):
            out[~pre] = tr.sol_post(p[~pre]).T[:, :4]
        return out

    def _grid_states(self, p: np.ndarray) -> np.ndarray:
        """(n_alpha + 1, len(p), 4) augmented states, alpha-periodically closed."""
        p = np.asarray(p, dtype=float)
        data = np.empty((self._n_alpha + 1, p.size, 4))
        for k in range(self._n_alpha):
            data[k] = self._track_states(k, p)
        data[self._n_alpha] = data[0]
        return data

    def _alpha_spline(self, p: np.ndarray) -> CubicSpline:
        data = self._grid_states(p)
        flat = data.reshape(self._n_alpha + 1, -1)
        return CubicSpline(self._alpha_ext, flat, bc_type="periodic")

    def _interp(self, p: np.ndarray, alpha: float, derivative: int = 0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        alpha = float(alpha) % 1.0
        k = int(round(alpha * self._n_alpha))
        if derivative == 0 and abs(alpha * self._n_alpha - k) < 1e-12:
            return self._track_states(k % self._n_alpha, p)
        spline = self._alpha_spline(p)
        if derivative:
            vals = spline.derivative(derivative)(alpha)
        else:
            vals = spline(alpha)
        return vals.reshape(p.size, 4)

    # -- chart API ------------------------------------------------------------
    def point_many(self, p, alpha):
        p = np.asarray(p, dtype=float)
        self.check_domain(p)
        alpha = np.asarray(alpha, dtype=float)
        if alpha.ndim and np.ptp(alpha) > 0:
            return np.stack(
                [self._interp(np.atleast_1d(pp), aa)[0, :3] for pp, aa in zip(p, alpha)]
            )
        a0 = float(alpha.flat[0]) if alpha.ndim else float(alpha)
        return self._interp(p, a0)[:, :3]

    def alpha_partial_many(self, p, alpha):
        p = np.asarray(p, dtype=float)
        self.check_domain(p)
        alpha = np.asarray(alpha, dtype=float)
        if alpha.ndim and np.ptp(alpha) > 0:
            return np.stack(
                [
                    self._interp(np.atleast_1d(pp), aa, derivative=1)[0, :3]
                    for pp, aa in zip(p, alpha)
                ]
            )
        a0 = float(alpha.flat[0]) if alpha.ndim else float(alpha)
        return self._interp(p, a0, derivative=1)[:, :3]

    def divergence_integral_many(self, tau, p, alpha):
        tau = np.asarray(tau, dtype=float)
        if self.field.known_volume_preserving:
            return np.zeros_like(tau)
        self.check_domain(tau)
        self.check_domain(p)
        d_tau = self._interp(tau, float(alpha))[:, 3]
        d_p = self._interp(np.atleast_1d(float(p)), float(alpha))[0, 3]
        return d_p - d_tau


def generic_chart_from_saddle(
    field: FieldModel,
    spectrum: SaddleSpectrum,
    delta: float = 1e-3,
    section=None,
    p_max: float = 2.0,
    *,
    n_alpha: int = 128,
    tol: float = 1e-11,
    max_section_time: float = 30.0,
    escape_radius: float = 50.0,
    plane_basis: tuple[np.ndarray, np.ndarray] | None = None,
    foliation_check: bool = True,
) -> ShootingChart:
    """Trace the 2D unstable manifold of a saddle by shooting a seed ring.

    ``section`` is a scalar function of the cartesian point whose first
    zero-crossing calibrates p = 0 on every trajectory; without one, p = 0 is
    placed at arc length 1 from the saddle. Requires a two-dimensional
    unstable manifold; build the chart of a 2D stable manifold by passing the
    time-reversed field with its mirrored spectrum.
    """
    if spectrum.case is not SaddleCase.TWO_DIM_UNSTABLE:
        raise ChartError(
            "generic unstable chart needs a saddle with a 2D unstable manifold "
            "(reverse time for the stable case)"
        )
    if delta <= 0:
        raise ChartError("seed radius delta must be positive")
    if n_alpha < 8:
        raise ChartError("n_alpha must be at least 8")
    b1, b2 = plane_basis if plane_basis is not None else spectrum.plane_basis()
    a = spectrum.location
    alpha_grid = np.arange(n_alpha) / n_alpha

    track_div = not field.known_volume_preserving

    def rhs(t, y):
        x = y[:3]
        v = field.velocity(x)
        div = field.divergence(x) if track_div else 0.0
        speed = float(np.linalg.norm(v))
        return np.array([v[0], v[1], v[2], div, speed])

    def escape(t, y):
        return float(np.linalg.norm(y[:3] - a)) - escape_radius

    escape.terminal = True

    if section is not None:
        def cross(t, y):
            return float(section(y[:3]))
    else:
        def cross(t, y):
            return y[4] - 1.0

    cross.terminal = True
    cross.direction = 0

    tracks: list[_SeedTrack] = []
    pad = 0.25
    for psi in 2.0 * np.pi * alpha_grid:
        seed = a + delta * (np.cos(psi) * b1 + np.sin(psi) * b2)
        y0 = np.append(seed, [0.0, 0.0])
        pre = solve_ivp(
            rhs,
            (0.0, max_section_time),
            y0,
            method="RK45",
            rtol=tol,
            atol=tol * 1e-2,
            dense_output=True,
            events=[cross, escape],
        )
        if not pre.success:
            raise ChartError(f"seed integration failed: {pre.message}")
        if pre.t_events[1].size:
            raise ChartError(
                f"seed trajectory escaped |x - a| <= {escape_radius} before the section"
            )
        if not pre.t_events[0].size:
            raise ChartError(
                f"seed trajectory never reached the p = 0 section within "
                f"t = {max_section_time}"
            )
        t_cross = float(pre.t_events[0][0])
        y_cross = pre.sol(t_cross)
        post = solve_ivp(
            rhs,
            (0.0, p_max + pad),
            y_cross,
            method="RK45",
            rtol=tol,
            atol=tol * 1e-2,
            dense_output=True,
            events=[escape],
        )
        if not post.success or post.status == 1:
            raise ChartError("trajectory escaped past the p = 0 section")
        tracks.append(
            _SeedTrack(
                t_cross=t_cross,
                sol_pre=pre.sol,
                sol_post=post.sol,
                div_at_cross=float(y_cross[3]),
            )
        )

    # the divergence accumulator keeps its per-seed base; only differences
    # D(p) - D(tau) at fixed alpha ever leave the chart, where the base cancels
    # (alpha interpolation is linear in the track data, so it cancels there too)
    p_lo = -min(tr.t_cross for tr in tracks)
    chart = ShootingChart(field, spectrum, tracks, alpha_grid, p_lo, p_max)
    if foliation_check:
        _check_foliation(chart)
    return chart


def _check_foliation(chart: ShootingChart, n_p: int = 9, n_a: int = 32) -> None:
    p_lo = chart.p_min * 0.98
    p_hi = chart.p_max * 0.98 if chart.p_max > 0 else chart.p_max * 1.02
    p_grid = np.linspace(p_lo, p_hi, n_p)
    ref = None
    for alpha in np.arange(n_a + 1) / n_a:  # last iteration closes the alpha loop
        n = chart.normal_many(p_grid, np.full(n_p, alpha % 1.0))
        mags = np.linalg.norm(n, axis=1)
        if np.any(mags < DEGENERATE_NORMAL_TOL):
            raise ChartError("foliation failure: vanishing normal on the chart interior")
        unit = n / mags[:, None]
        if ref is not None and np.any(np.einsum("ij,ij->i", unit, ref) < 0.0):
            raise ChartError(
                "foliation failure: adjacent trajectories cross (normal flipped sign)"
            )
        ref = unit
