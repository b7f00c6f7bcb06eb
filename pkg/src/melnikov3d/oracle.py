"""Ground-truth checks: direct ODE integration of the perturbed flow versus
the leading-order Melnikov prediction, and the order of the remainder in eps.

A sample seeds the perturbed trajectory on the unperturbed manifold deep in
the linear regime of the saddle (the perturbed hyperbolic trajectory itself is
never computed; the O(eps) seeding offset contracts toward the perturbed
manifold en route and is budgeted via a second launch one unit deeper).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import ChartKind, ManifoldChart, integrate
from .errors import Melnikov3DError
from .fields import FieldModel, PerturbationModel
from .melnikov import melnikov_stable, melnikov_unstable
from .quadrature import QuadratureSpec

__all__ = ["DisplacementSample", "OrderFit", "measure_displacement", "fit_order"]

ORACLE_TOL = 1e-12


@dataclass
class DisplacementSample:
    """Measured vs predicted normal displacement at one (p, alpha, t, eps)."""

    p: float
    alpha: float
    t: float
    eps: float
    p_launch: float
    measured_d: float
    predicted_d: float
    seeding_error_estimate: float
    kind: str = "unstable"

    def error(self) -> float:
        return abs(self.measured_d - self.predicted_d)


@dataclass
class OrderFit:
    """Log-log slope of |measured - predicted| against eps."""

    eps_list: list
    errors: list
    slope: float | None
    intercept: float | None
    r_squared: float | None
    saturated: bool


def _single_launch(chart, field, perturbation, eps, p, alpha, t, p_launch, kind,
                   tol) -> float:
    x0 = chart.point(p_launch, alpha)
    if kind == "unstable":
        t0 = t - (p - p_launch)
    else:
        t0 = t + (p_launch - p)
    traj = integrate(field, perturbation, eps, x0=x0, t0=t0, t1=t, tol=tol,
                     dense=False)
    base = chart.point(p, alpha)
    n = chart.normal(p, alpha)
    n_hat = n / np.linalg.norm(n)
    return float(n_hat @ (traj.states[-1] - base))


def measure_displacement(
    chart: ManifoldChart,
    field: FieldModel,
    perturbation: PerturbationModel,
    eps: float,
    p: float,
    alpha: float,
    t: float,
    p_launch: float,
    *,
    kind: str = "unstable",
    tol: float = ORACLE_TOL,
    quad: QuadratureSpec | None = None,
) -> DisplacementSample:
    """Measure the actual normal displacement of one perturbed-manifold point.

    Unstable case: seed at x(p_launch, alpha) at time t - (p - p_launch) and
    integrate forward to t. Stable case: seed at p_launch beyond p and
    integrate backward. The prediction is eps * M / |f ^ x_alpha| with the
    matching one-sided Melnikov function; the seeding error estimate is the
    difference against a launch one unit deeper.
    """
    if kind not in ("unstable", "stable"):
        raise ValueError(f"kind must be 'unstable' or 'stable', got {kind!r}")
    if chart.kind not in (ChartKind.HETEROCLINIC,
                          ChartKind.UNSTABLE if kind == "unstable" else ChartKind.STABLE):
        raise ValueError(f"chart kind {chart.kind} cannot serve a {kind} measurement")
    rate_spec = chart.spectrum_a if kind == "unstable" else chart.spectrum_b
    if rate_spec is not None:
        margin = 5.0 / abs(rate_spec.plane_rate() or 1.0)
        if kind == "unstable" and p_launch > p - margin:
            raise ValueError(
                f"p_launch must sit at least {margin:.3g} below p to seed in the "
                "linear regime"
            )
        if kind == "stable" and p_launch < p + margin:
            raise ValueError(
                f"p_launch must sit at least {margin:.3g} above p to seed in the "
                "linear regime"
            )

    measured = _single_launch(chart, field, perturbation, eps, p, alpha, t,
                              p_launch, kind, tol)
    deeper = p_launch - 1.0 if kind == "unstable" else p_launch + 1.0
    try:
        chart.check_domain(deeper)
        measured_deep = _single_launch(chart, field, perturbation, eps, p, alpha,
                                       t, deeper, kind, tol)
        seeding_err = abs(measured - measured_deep)
    except Melnikov3DError:
        seeding_err = np.nan  # deeper launch unavailable on this chart

    if quad is None:
        quad = QuadratureSpec()
    if kind == "unstable":
        m = melnikov_unstable(chart, perturbation, p, alpha, t, quad).value
    else:
        m = melnikov_stable(chart, perturbation, p, alpha, t, quad).value
    n_mag = float(np.linalg.norm(chart.normal(p, alpha)))
    return DisplacementSample(
        p=float(p), alpha=float(alpha), t=float(t), eps=float(eps),
        p_launch=float(p_launch), measured_d=measured,
        predicted_d=eps * m / n_mag, seeding_error_estimate=seeding_err,
        kind=kind,
    )


def fit_order(samples: list, *, noise_floor: float = 100.0 * ORACLE_TOL) -> OrderFit:
    """Least-squares slope of log |measured - predicted| against log eps.

    Needs at least three samples at the same (p, alpha, t), strictly decreasing
    in eps and spanning at least a decade. When every error sits below
    ``noise_floor`` the fit is flagged saturated instead of reporting a slope.
    """
    if len(samples) < 3:
        raise ValueError("order fit needs at least 3 eps values")
    eps = np.array([s.eps for s in samples], dtype=float)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps values must be strictly decreasing")
    if eps[0] / eps[-1] < 10.0:
        raise ValueError("eps values must span at least one decade")
    keys = {(s.p, s.alpha, s.t) for s in samples}
    if len(keys) != 1:
        raise ValueError("order fit mixes samples from different (p, alpha, t)")
    errors = np.array([s.error() for s in samples], dtype=float)
    if np.max(errors) < noise_floor:
        return OrderFit(eps_list=list(eps), errors=list(errors), slope=None,
                        intercept=None, r_squared=None, saturated=True)
    x = np.log(eps)
    y = np.log(np.maximum(errors, 1e-300))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return OrderFit(eps_list=list(eps), errors=list(errors), slope=float(slope),
                    intercept=float(intercept), r_squared=r2, saturated=False)
