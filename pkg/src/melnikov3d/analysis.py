"""Zero contours, transversality, and lobe volumes of a Melnikov field.

The field is sampled on a rectangular (p, alpha) grid, periodic in alpha.
Zero curves come from marching squares with linear edge interpolation
(saddle-ambiguous cells resolved by the cell-center sign); sign-definite
regions are flood-filled over cells whose four corners agree in sign, and the
leading-order lobe volume integrates eps * |M| cell-wise with the bilinear
interpolant, clipping boundary cells along the contour segments.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .charts import ChartKind, ManifoldChart
from .errors import ConfigError, Melnikov3DError
from .fields import PerturbationModel
from .melnikov import melnikov_alpha_block, weighted_integrand, _truncation_point
from .quadrature import QuadratureSpec

__all__ = [
    "MelnikovField",
    "build_melnikov_grid",
    "ContourSet",
    "ContourLine",
    "zero_contours",
    "LobeReport",
    "lobe_regions",
    "lobe_volume",
]


@dataclass
class MelnikovField:
    """M sampled on a (p, alpha) grid at fixed t, with central-difference gradients."""

    t: float
    p_grid: np.ndarray
    alpha_grid: np.ndarray
    values: np.ndarray  # (n_p, n_alpha)
    dm_dp: np.ndarray
    dm_dalpha: np.ndarray
    quad_error: float
    provenance: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        n_p, n_a = self.values.shape
        if self.p_grid.shape != (n_p,) or self.alpha_grid.shape != (n_a,):
            raise ValueError("grid/value dimensions disagree")
        if np.any(np.diff(self.p_grid) <= 0):
            raise ValueError("p grid must be strictly increasing")
        da = np.diff(self.alpha_grid)
        if n_a > 1 and not np.allclose(da, da[0], rtol=1e-9):
            raise ValueError("alpha grid must be uniform")

    @property
    def n_p(self) -> int:
        return self.values.shape[0]

    @property
    def n_alpha(self) -> int:
        return self.values.shape[1]

    @property
    def alpha_step(self) -> float:
        return 1.0 / self.n_alpha

    def corner_value(self, i: int, j: int) -> float:
        return float(self.values[i, j % self.n_alpha])

    def _locate(self, p: float, alpha: float):
        alpha = alpha % 1.0
        i = int(np.clip(np.searchsorted(self.p_grid, p) - 1, 0, self.n_p - 2))
        j = int(alpha / self.alpha_step) % self.n_alpha
        sp = (p - self.p_grid[i]) / (self.p_grid[i + 1] - self.p_grid[i])
        sa = (alpha - self.alpha_grid[j]) / self.alpha_step
        return i, j, float(np.clip(sp, 0.0, 1.0)), float(np.clip(sa, 0.0, 1.0))

    def _bilinear(self, arr: np.ndarray, p: float, alpha: float) -> float:
        i, j, sp, sa = self._locate(p, alpha)
        j1 = (j + 1) % self.n_alpha
        return float(
            arr[i, j] * (1 - sp) * (1 - sa)
            + arr[i + 1, j] * sp * (1 - sa)
            + arr[i, j1] * (1 - sp) * sa
            + arr[i + 1, j1] * sp * sa
        )

    def interpolate(self, p: float, alpha: float) -> float:
        """Bilinear M at an arbitrary in-grid point (alpha periodic)."""
        return self._bilinear(self.values, p, alpha)

    def gradient_at(self, p: float, alpha: float) -> tuple[float, float]:
        return (
            self._bilinear(self.dm_dp, p, alpha),
            self._bilinear(self.dm_dalpha, p, alpha),
        )

    def coarsened(self) -> "MelnikovField":
        """Every-other-node subsample (alpha count must stay even); used for
        grid-refinement error estimates."""
        if self.n_alpha % 2:
            raise ValueError("alpha resolution must be even to coarsen")
        n_p = self.n_p if self.n_p % 2 else self.n_p - 1
        vals = self.values[:n_p:2, ::2]
        p = self.p_grid[:n_p:2]
        a = self.alpha_grid[::2]
        dp, da = _gradients(p, vals)
        return MelnikovField(self.t, p, a, vals, dp, da, self.quad_error,
                             dict(self.provenance, coarsened=True))


def _gradients(p_grid: np.ndarray, values: np.ndarray):
    dm_dp = np.gradient(values, p_grid, axis=0)
    n_alpha = values.shape[1]
    h = 1.0 / n_alpha
    dm_da = (np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1)) / (2 * h)
    return dm_dp, dm_da


def build_melnikov_grid(
    chart: ManifoldChart,
    perturbation: PerturbationModel,
    t: float,
    p_range: tuple[float, float],
    n_p: int,
    n_alpha: int,
    quad: QuadratureSpec | None = None,
    *,
    threads: int = 1,
) -> MelnikovField:
    """Sample the heteroclinic Melnikov function on an n_p x n_alpha grid.

    The fill shares one truncated tau domain across the grid (the integrand
    envelope does not depend on p beyond its retarded-time phase) and runs one
    vectorized composite quadrature per alpha column; columns are independent,
    so ``threads`` > 1 splits them across a thread pool.
    """
    if quad is None:
        quad = QuadratureSpec()
    if n_p < 8 or n_alpha < 8:
        raise ConfigError("melnikov grid needs n_p >= 8 and n_alpha >= 8")
    if chart.kind is not ChartKind.HETEROCLINIC:
        raise ConfigError("melnikov grids are defined for heteroclinic charts")
    p_lo, p_hi = float(p_range[0]), float(p_range[1])
    if not p_lo < p_hi:
        raise ConfigError(f"empty p range [{p_lo}, {p_hi}]")
    chart.check_domain([p_lo, p_hi])

    p_grid = np.linspace(p_lo, p_hi, n_p)
    alpha_grid = np.arange(n_alpha) / n_alpha

    # one tau window for the whole grid: scan the envelope at the p extremes
    # over a few alpha probes (g may vanish at special alpha)
    tau_lo, tau_hi = np.inf, -np.inf
    for alpha_probe in (0.04, 0.29, 0.54, 0.79):
        w = weighted_integrand(chart, perturbation, p_lo, alpha_probe, t)
        lo, _ = _truncation_point(w, p_lo, -1, chart, quad)
        w = weighted_integrand(chart, perturbation, p_hi, alpha_probe, t)
        hi, _ = _truncation_point(w, p_hi, +1, chart, quad)
        tau_lo, tau_hi = min(tau_lo, lo), max(tau_hi, hi)

    values = np.empty((n_p, n_alpha))
    errors = np.empty((n_p, n_alpha))

    def fill(j: int):
        col, err, _ = melnikov_alpha_block(
            chart, perturbation, p_grid, alpha_grid[j], t, tau_lo, tau_hi, quad
        )
        values[:, j] = col
        errors[:, j] = err

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(n_alpha)))
    else:
        for j in range(n_alpha):
            fill(j)

    dm_dp, dm_da = _gradients(p_grid, values)
    provenance = {
        "chart": type(chart).__name__,
        "field_model": getattr(chart.field, "name", "unknown"),
        "field_params": chart.field.parameters(),
        "perturbation": getattr(perturbation, "name", "unknown"),
        "quadrature": quad.to_dict(),
        "tau_window": [tau_lo, tau_hi],
    }
    return MelnikovField(
        t=float(t),
        p_grid=p_grid,
        alpha_grid=alpha_grid,
        values=values,
        dm_dp=dm_dp,
        dm_dalpha=dm_da,
        quad_error=float(np.max(errors)),
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# marching squares (alpha-periodic)
# ---------------------------------------------------------------------------


@dataclass
class ContourLine:
    """One stitched zero polyline in (p, alpha); vertices sit on grid edges."""

    vertices: np.ndarray  # (k, 2) columns p, alpha
    transverse: np.ndarray  # (k,) bool
    closed: bool
    edge_keys: list = dataclass_field(default_factory=list)


@dataclass
class ContourSet:
    lines: list
    grad_threshold: float
    field: MelnikovField

    def __iter__(self):
        return iter(self.lines)

    def __len__(self):
        return len(self.lines)

    def all_vertices(self) -> np.ndarray:
        if not self.lines:
            return np.zeros((0, 2))
        return np.vstack([line.vertices for line in self.lines])


def _edge_crossings(field: MelnikovField):
    """Zero crossings on all grid edges: key -> (p, alpha) by linear interpolation."""
    M = field.values
    p, a = field.p_grid, field.alpha_grid
    n_p, n_a = field.n_p, field.n_alpha
    h_a = field.alpha_step
    pos = M >= 0.0
    crossings = {}
    # p-edges: nodes (i, j) -- (i+1, j)
    for i in range(n_p - 1):
        for j in range(n_a):
            if pos[i, j] != pos[i + 1, j]:
                s = M[i, j] / (M[i, j] - M[i + 1, j])
                crossings[("p", i, j)] = (p[i] + s * (p[i + 1] - p[i]), a[j])
    # alpha-edges: nodes (i, j) -- (i, j+1 mod n), geometric alpha j+1 unwrapped
    for i in range(n_p):
        for j in range(n_a):
            j1 = (j + 1) % n_a
            if pos[i, j] != pos[i, j1]:
                s = M[i, j] / (M[i, j] - M[i, j1])
                crossings[("a", i, j)] = (p[i], a[j] + s * h_a)
    return crossings


def _cell_segments(field: MelnikovField):
    """Marching-squares segments per cell, as (edge_key_1, edge_key_2) pairs."""
    M = field.values
    n_p, n_a = field.n_p, field.n_alpha
    segments = []
    seg_cells = []
    for i in range(n_p - 1):
        for j in range(n_a):
            j1 = (j + 1) % n_a
            v = (M[i, j], M[i + 1, j], M[i + 1, j1], M[i, j1])
            s = tuple(x >= 0.0 for x in v)
            if all(s) or not any(s):
                continue
            e = (("p", i, j), ("a", i + 1, j), ("p", i, j1), ("a", i, j))
            crossed = [k for k in range(4) if s[k] != s[(k + 1) % 4]]
            if len(crossed) == 2:
                segs = [(e[crossed[0]], e[crossed[1]])]
            else:  # saddle cell: resolve the pairing by the center sign
                center_pos = (v[0] + v[1] + v[2] + v[3]) / 4.0 >= 0.0
                # corners 0 and 2 share one sign, 1 and 3 the other
                if center_pos == s[0]:
                    # center joins corners 0 and 2: contour hugs corners 1, 3
                    segs = [(e[0], e[1]), (e[2], e[3])]
                else:
                    segs = [(e[3], e[0]), (e[1], e[2])]
            for seg in segs:
                segments.append(seg)
                seg_cells.append((i, j))
    return segments, seg_cells


def zero_contours(field: MelnikovField, grad_threshold: float | None = None) -> ContourSet:
    """Extract and stitch the zero polylines of M, flagging transverse vertices.

    A vertex is transverse when |dM/dp| + |dM/dalpha| (bilinear at the vertex)
    exceeds ``grad_threshold``; the default threshold is 1e-6 times the grid
    maximum of that gradient norm.
    """
    if grad_threshold is None:
        gnorm = np.abs(field.dm_dp) + np.abs(field.dm_dalpha)
        grad_threshold = 1e-6 * float(np.max(gnorm)) if gnorm.size else 0.0

    crossings = _edge_crossings(field)
    segments, seg_cells = _cell_segments(field)

    adjacency: dict = {}
    for idx, (ka, kb) in enumerate(segments):
        adjacency.setdefault(ka, []).append(idx)
        adjacency.setdefault(kb, []).append(idx)

    used = np.zeros(len(segments), dtype=bool)

    def walk(start_key):
        chain = [start_key]
        key = start_key
        while True:
            nxt = [i for i in adjacency.get(key, ()) if not used[i]]
            if not nxt:
                break
            idx = nxt[0]
            used[idx] = True
            ka, kb = segments[idx]
            key = kb if ka == key else ka
            chain.append(key)
        return chain

    chains = []
    endpoint_keys = [k for k, ids in adjacency.items() if len(ids) == 1]
    for key in endpoint_keys:
        ids = [i for i in adjacency[key] if not used[i]]
        if ids:
            chains.append((walk(key), False))
    for idx in range(len(segments)):
        if not used[idx]:
            used[idx] = True
            ka, kb = segments[idx]
            chain = walk(kb)
            chains.append(([ka] + chain, True))

    lines = []
    for keys, closed in chains:
        verts = np.array([crossings[k] for k in keys])
        grads = np.array([field.gradient_at(pv, av % 1.0) for pv, av in verts])
        transverse = (np.abs(grads[:, 0]) + np.abs(grads[:, 1])) > grad_threshold
        lines.append(ContourLine(vertices=verts, transverse=transverse,
                                 closed=closed, edge_keys=list(keys)))
    return ContourSet(lines=lines, grad_threshold=float(grad_threshold), field=field)


# ---------------------------------------------------------------------------
# sign-definite regions and lobe volumes
# ---------------------------------------------------------------------------


@dataclass
class LobeReport:
    """One sign-definite region of M and (once filled) its leading-order volume."""

    region_id: int
    sign: int
    member_cells: list
    boundary_cells: list
    contour_ids: list
    t: float
    unbounded: bool
    eps: float | None = None
    volume_leading: float | None = None
    volume_error_estimate: float | None = None
    abs_m_integral: float | None = None

    def to_dict(self) -> dict:
        return {
            "region_id": self.region_id,
            "sign": self.sign,
            "n_member_cells": len(self.member_cells),
            "member_cells": [list(c) for c in self.member_cells],
            "boundary_cells": [list(c) for c in self.boundary_cells],
            "contour_ids": self.contour_ids,
            "t": self.t,
            "eps": self.eps,
            "unbounded": self.unbounded,
            "volume_leading": self.volume_leading,
            "volume_error_estimate": self.volume_error_estimate,
            "abs_m_integral": self.abs_m_integral,
        }


def _cell_sign(M: np.ndarray, i: int, j: int, n_a: int) -> int:
    j1 = (j + 1) % n_a
    v = np.array([M[i, j], M[i + 1, j], M[i + 1, j1], M[i, j1]])
    if np.all(v > 0):
        return 1
    if np.all(v < 0):
        return -1
    return 0


def lobe_regions(field: MelnikovField, contours: ContourSet | None = None) -> list:
    """Flood-fill sign-definite cell regions (alpha-periodic adjacency).

    Regions reaching the first or last p cell row are flagged unbounded; their
    volume is unreliable because the grid cuts them off.
    """
    if contours is not None and contours.field is not field:
        raise ValueError("contours were extracted from a different field")
    M = field.values
    n_p, n_a = field.n_p, field.n_alpha
    n_rows = n_p - 1
    signs = np.zeros((n_rows, n_a), dtype=int)
    for i in range(n_rows):
        for j in range(n_a):
            signs[i, j] = _cell_sign(M, i, j, n_a)

    region_of = -np.ones((n_rows, n_a), dtype=int)
    reports: list[LobeReport] = []
    for i0 in range(n_rows):
        for j0 in range(n_a):
            if signs[i0, j0] == 0 or region_of[i0, j0] >= 0:
                continue
            rid = len(reports)
            sgn = signs[i0, j0]
            stack = [(i0, j0)]
            region_of[i0, j0] = rid
            members = []
            while stack:
                i, j = stack.pop()
                members.append((i, j))
                for ni, nj in ((i - 1, j), (i + 1, j), (i, (j - 1) % n_a), (i, (j + 1) % n_a)):
                    if 0 <= ni < n_rows and signs[ni, nj] == sgn and region_of[ni, nj] < 0:
                        region_of[ni, nj] = rid
                        stack.append((ni, nj))
            unbounded = any(i in (0, n_rows - 1) for i, _ in members)
            boundary = set()
            for i, j in members:
                for ni, nj in ((i - 1, j), (i + 1, j), (i, (j - 1) % n_a), (i, (j + 1) % n_a)):
                    if 0 <= ni < n_rows and signs[ni, nj] == 0:
                        boundary.add((ni, nj))
            reports.append(
                LobeReport(
                    region_id=rid,
                    sign=int(sgn),
                    member_cells=sorted(members),
                    boundary_cells=sorted(boundary),
                    contour_ids=[],
                    t=field.t,
                    unbounded=bool(unbounded),
                )
            )

    if contours is not None:
        cell_sets = [set(r.boundary_cells) | set(r.member_cells) for r in reports]
        for cid, line in enumerate(contours.lines):
            touched = set()
            for key in line.edge_keys:
                kind, i, j = key
                if kind == "p":
                    cells = [(i, j), (i, (j - 1) % n_a)]
                else:
                    cells = [(i, j), (i - 1, j)]
                for c in cells:
                    if 0 <= c[0] < n_rows:
                        touched.add(c)
            for rid, cells in enumerate(cell_sets):
                if touched & cells:
                    reports[rid].contour_ids.append(cid)
    return reports


def _cell_geometry(field: MelnikovField, i: int, j: int):
    """Corner coordinates (cyclic) and values of cell (i, j), alpha unwrapped."""
    p0, p1 = field.p_grid[i], field.p_grid[i + 1]
    a0 = field.alpha_grid[j]
    a1 = a0 + field.alpha_step
    j1 = (j + 1) % field.n_alpha
    corners = np.array([[p0, a0], [p1, a0], [p1, a1], [p0, a1]])
    vals = np.array([
        field.values[i, j], field.values[i + 1, j],
        field.values[i + 1, j1], field.values[i, j1],
    ])
    return corners, vals


def _bilinear_on_cell(corners, vals, pts):
    sp = (pts[:, 0] - corners[0, 0]) / (corners[1, 0] - corners[0, 0])
    sa = (pts[:, 1] - corners[0, 1]) / (corners[3, 1] - corners[0, 1])
    return (vals[0] * (1 - sp) * (1 - sa) + vals[1] * sp * (1 - sa)
            + vals[2] * sp * sa + vals[3] * (1 - sp) * sa)


def _triangle_integral_abs(corners, vals, tri):
    """Integral of |bilinear| over a triangle via the edge-midpoint rule
    (exact for the bilinear itself; the polygon lies on one side of the zero
    set, so |.| commutes with the rule up to clipping error)."""
    a, b, c = tri
    area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    mids = np.array([(a + b) / 2, (b + c) / 2, (c + a) / 2])
    return area * float(np.mean(np.abs(_bilinear_on_cell(corners, vals, mids))))


def _polygon_integral_abs(corners, vals, poly):
    if len(poly) < 3:
        return 0.0
    total = 0.0
    for k in range(1, len(poly) - 1):
        total += _triangle_integral_abs(corners, vals, (poly[0], poly[k], poly[k + 1]))
    return total


def _mixed_cell_integral(field: MelnikovField, i: int, j: int, sign: int) -> float:
    """|M| over the ``sign``-side part of a mixed cell, clipped linearly."""
    corners, vals = _cell_geometry(field, i, j)
    pos = vals >= 0.0
    want = pos if sign > 0 else ~pos
    cross = []
    for k in range(4):
        k1 = (k + 1) % 4
        if pos[k] != pos[k1]:
            s = vals[k] / (vals[k] - vals[k1])
            cross.append((k, corners[k] + s * (corners[k1] - corners[k])))
        else:
            cross.append((k, None))

    n_cross = sum(1 for _, c in cross if c is not None)
    if n_cross == 0:
        # only reachable through corner values sitting exactly on zero
        if np.all(want):
            area = (corners[1, 0] - corners[0, 0]) * (corners[3, 1] - corners[0, 1])
            return area * float(np.mean(np.abs(vals)))
        return 0.0
    if n_cross == 2:
        poly = []
        for k in range(4):
            if want[k]:
                poly.append(corners[k])
            if cross[k][1] is not None:
                poly.append(cross[k][1])
        return _polygon_integral_abs(corners, vals, poly)

    # saddle cell: two corner triangles of the wanted sign, plus the central
    # quad of the four crossings when the center shares the wanted sign
    total = 0.0
    pts = [c for _, c in cross]
    for k in range(4):
        if want[k]:
            prev = pts[(k - 1) % 4]
            nxt = pts[k]
            total += _polygon_integral_abs(corners, vals, [corners[k], nxt, prev])
    center_sign = float(np.mean(vals)) >= 0.0
    if center_sign == (sign > 0):
        total += _polygon_integral_abs(corners, vals, pts)
    return total


def lobe_volume(field: MelnikovField, region: LobeReport, eps: float) -> LobeReport:
    """Fill ``region`` with its leading-order volume eps * integral of |M|.

    Definite member cells use the exact bilinear cell integral; boundary cells
    contribute their contour-clipped part. The error estimate comes from
    redoing the integral on the 2x-coarsened grid.
    """
    if region.unbounded:
        raise Melnikov3DError(
            "region touches the open p boundary of the grid; volume unreliable"
        )
    integral = _region_abs_integral(field, region.member_cells, region.boundary_cells,
                                    region.sign)
    estimate = np.nan
    try:
        coarse = field.coarsened()
        coarse_regions = lobe_regions(coarse)
        target = _matching_region(coarse, coarse_regions, field, region)
        if target is not None:
            coarse_integral = _region_abs_integral(
                coarse, target.member_cells, target.boundary_cells, target.sign
            )
            estimate = abs(integral - coarse_integral)
    except (ValueError, Melnikov3DError):
        pass

    region.eps = float(eps)
    region.abs_m_integral = float(integral)
    region.volume_leading = float(eps) * float(integral)
    region.volume_error_estimate = (
        float(eps) * float(estimate) if np.isfinite(estimate) else None
    )
    return region


def _region_abs_integral(field, members, boundary, sign) -> float:
    total = 0.0
    for i, j in members:
        corners, vals = _cell_geometry(field, i, j)
        area = (corners[1, 0] - corners[0, 0]) * (corners[3, 1] - corners[0, 1])
        total += area * float(np.mean(np.abs(vals)))
    for i, j in boundary:
        total += _mixed_cell_integral(field, i, j, sign)
    return total


def _cell_center(field, cell):
    i, j = cell
    return (
        0.5 * (field.p_grid[i] + field.p_grid[i + 1]),
        field.alpha_grid[j] + 0.5 * field.alpha_step,
    )


def _deepest_cell(field, cells):
    """Member cell farthest inside the sign region (largest min |corner M|)."""
    best, best_depth = cells[0], -1.0
    for i, j in cells:
        _, vals = _cell_geometry(field, i, j)
        depth = float(np.min(np.abs(vals)))
        if depth > best_depth:
            best, best_depth = (i, j), depth
    return best


def _matching_region(coarse, coarse_regions, fine, region):
    """Coarse-grid region containing the fine region's deepest interior cell."""
    pc, ac = _cell_center(fine, _deepest_cell(fine, region.member_cells))
    for cand in coarse_regions:
        if cand.sign != region.sign or cand.unbounded:
            continue
        for cell in cand.member_cells:
            i, j = cell
            if (coarse.p_grid[i] <= pc <= coarse.p_grid[i + 1]):
                a0 = coarse.alpha_grid[j]
                if a0 <= (ac % 1.0) <= a0 + coarse.alpha_step:
                    return cand
    return None
