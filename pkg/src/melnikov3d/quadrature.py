"""1D quadrature backends for the improper Melnikov integrals.

Both backends take a vectorized integrand (array of abscissae in, array of
values out) and return ``(value, error_estimate, l1_norm, nfev)``. The L1 norm
of the integrand is tracked separately from the value because the Melnikov
integrals often cancel heavily; tolerances are meaningful relative to L1, not
to the (possibly tiny) result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import QuadratureError

__all__ = ["QuadratureSpec", "adaptive_simpson", "gauss_legendre_composite", "quad_interval"]

RULES = ("adaptive-simpson", "gauss-legendre")
TRUNCATIONS = ("adaptive", "fixed")


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for the improper-integral evaluation.

    ``truncation="adaptive"`` expands the domain until the integrand envelope
    falls below ``abs_tol`` (capped at 60 / |decay rate|); ``"fixed"`` uses
    ``t_cut`` as the truncation radius directly.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    rule: str = "adaptive-simpson"
    truncation: str = "adaptive"
    t_cut: float | None = None
    max_subdivisions: int = 100000
    panel_width: float = 1.0
    gl_points: int = 32

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.rule not in RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}; choose from {RULES}")
        if self.truncation not in TRUNCATIONS:
            raise ValueError(f"unknown truncation policy {self.truncation!r}")
        if self.truncation == "fixed" and (self.t_cut is None or self.t_cut <= 0):
            raise ValueError("fixed truncation requires a positive t_cut")
        if self.panel_width <= 0 or self.gl_points < 2 or self.max_subdivisions < 8:
            raise ValueError("invalid quadrature discretization settings")

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "rule": self.rule,
            "truncation": self.truncation,
            "t_cut": self.t_cut,
            "max_subdivisions": self.max_subdivisions,
            "panel_width": self.panel_width,
            "gl_points": self.gl_points,
        }


def adaptive_simpson(f, a: float, b: float, rel_tol: float, abs_tol: float,
                     max_subdivisions: int = 100000):
    """Globally adaptive Simpson rule, refining every failing panel per sweep.

    A panel is accepted when its 15-fold Richardson error estimate stays within
    its length-proportional share of the global budget abs_tol + rel_tol * L1.
    Accepted panels contribute the extrapolated (Romberg) value.
    """
    if b <= a:
        return 0.0, 0.0, 0.0, 0

    n0 = 8
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    xs = np.concatenate([edges, mid])
    vals = np.asarray(f(xs), dtype=float)
    nfev = xs.size
    f_edges, fm = vals[: n0 + 1], vals[n0 + 1:]
    fa, fb = f_edges[:-1], f_edges[1:]
    S = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    value = 0.0
    err_total = 0.0
    l1_total = 0.0
    total_len = b - a
    n_panels = n0

    while lo.size:
        if n_panels > max_subdivisions:
            raise QuadratureError(
                f"adaptive Simpson exceeded {max_subdivisions} panels on "
                f"[{a:.6g}, {b:.6g}]"
            )
        m = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + m), 0.5 * (m + hi)
        new_f = np.asarray(f(np.concatenate([lm, rm])), dtype=float)
        nfev += 2 * lo.size
        flm, frm = new_f[: lo.size], new_f[lo.size:]
        h = hi - lo
        S_left = h / 12.0 * (fa + 4.0 * flm + fm)
        S_right = h / 12.0 * (fm + 4.0 * frm + fb)
        S2 = S_left + S_right
        err = np.abs(S2 - S) / 15.0
        l1 = h / 12.0 * (np.abs(fa) + 4 * np.abs(flm) + 2 * np.abs(fm)
                         + 4 * np.abs(frm) + np.abs(fb))
        l1_running = l1_total + float(np.sum(l1))
        budget = (abs_tol + rel_tol * l1_running) * (h / total_len)
        ok = err <= budget

        value += float(np.sum(S2[ok] + (S2[ok] - S[ok]) / 15.0))
        err_total += float(np.sum(err[ok]))
        l1_total += float(np.sum(l1[ok]))

        keep = ~ok
        n_panels += int(np.sum(keep))
        lo, hi = (np.concatenate([lo[keep], m[keep]]),
                  np.concatenate([m[keep], hi[keep]]))
        fa, fm, fb = (np.concatenate([fa[keep], fm[keep]]),
                      np.concatenate([flm[keep], frm[keep]]),
                      np.concatenate([fm[keep], fb[keep]]))
        S = np.concatenate([S_left[keep], S_right[keep]])

    return value, err_total, l1_total, nfev


def gauss_legendre_composite(f, a: float, b: float, rel_tol: float, abs_tol: float,
                             panel_width: float = 1.0, gl_points: int = 32,
                             max_subdivisions: int = 100000):
    """Composite Gauss-Legendre rule with uniform panel halving to convergence.

    The error estimate is the difference between the last two refinement
    levels; refinement stops when it falls below abs_tol + rel_tol * L1.
    """
    if b <= a:
        return 0.0, 0.0, 0.0, 0
    nodes, weights = leggauss(gl_points)
    n_panels = max(1, int(np.ceil((b - a) / panel_width)))
    nfev = 0
    prev = None
    while True:
        if n_panels * gl_points > max_subdivisions * 8:
            raise QuadratureError(
                f"composite Gauss-Legendre exceeded the evaluation cap on "
                f"[{a:.6g}, {b:.6g}]"
            )
        edges = np.linspace(a, b, n_panels + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mids = 0.5 * (edges[1:] + edges[:-1])
        xs = (mids[:, None] + half[:, None] * nodes[None, :]).ravel()
        vals = np.asarray(f(xs), dtype=float).reshape(n_panels, gl_points)
        nfev += xs.size
        panel_vals = half * (vals @ weights)
        panel_l1 = half * (np.abs(vals) @ weights)
        total = float(np.sum(panel_vals))
        l1 = float(np.sum(panel_l1))
        if prev is not None:
            err = abs(total - prev)
            if err <= abs_tol + rel_tol * l1:
                return total, err, l1, nfev
        prev = total
        n_panels *= 2


def quad_interval(f, a: float, b: float, spec: QuadratureSpec):
    """Integrate a vectorized integrand over [a, b] with the configured backend."""
    if spec.rule == "adaptive-simpson":
        return adaptive_simpson(f, a, b, spec.rel_tol, spec.abs_tol,
                                spec.max_subdivisions)
    return gauss_legendre_composite(f, a, b, spec.rel_tol, spec.abs_tol,
                                    spec.panel_width, spec.gl_points,
                                    spec.max_subdivisions)
