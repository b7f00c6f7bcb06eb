"""Delimited and JSON writers for every artifact the package produces.

CSV bodies are deterministic: floats are rendered with repr-precision %.17g
and no timestamps are written anywhere, so identical configurations produce
byte-identical files. Each CSV starts with a single ``# config: {...}`` line
embedding the run configuration, followed by the column header.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .analysis import ContourSet, LobeReport, MelnikovField
from .geometry import cartesian_to_spherical

__all__ = [
    "fmt",
    "write_csv",
    "write_melnikov_csv",
    "write_melnikov_json",
    "write_chart_csv",
    "write_trajectory_csv",
    "write_contours_csv",
    "write_contours_xyz_csv",
    "write_lobes_json",
    "write_surface_csv",
    "write_surface_mesh",
    "write_samples_csv",
    "write_order_fits_json",
]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, columns, rows, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_melnikov_csv(field: MelnikovField, path, config: dict | None = None,
                       closed_form=None) -> Path:
    """Columns (p, alpha, M); a registered analytic oracle adds M_closed_form
    and deviation columns."""
    columns = ["p", "alpha", "M"]
    if closed_form is not None:
        columns += ["M_closed_form", "deviation"]
    rows = []
    for i, p in enumerate(field.p_grid):
        for j, a in enumerate(field.alpha_grid):
            row = [p, a, field.values[i, j]]
            if closed_form is not None:
                ref = closed_form(p, a, field.t)
                row += [ref, field.values[i, j] - ref]
            rows.append(row)
    return write_csv(path, columns, rows, config)


def write_melnikov_json(field: MelnikovField, path, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "t": field.t,
        "p_grid": [float(v) for v in field.p_grid],
        "alpha_grid": [float(v) for v in field.alpha_grid],
        "n_p": field.n_p,
        "n_alpha": field.n_alpha,
        "max_quadrature_error": field.quad_error,
        "provenance": field.provenance,
    }
    if config is not None:
        payload["config"] = config
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _chart_row(p, alpha, point):
    sp = cartesian_to_spherical(point)
    return [p, alpha, point[0], point[1], point[2], sp.r, sp.theta, sp.phi]


def write_chart_csv(chart, path, p_values, alpha_values, config=None) -> Path:
    """Chart dump with columns (p, alpha, x, y, z, r, theta, phi)."""
    rows = []
    for alpha in alpha_values:
        pts = chart.point_many(np.asarray(p_values, dtype=float),
                               np.full(len(p_values), float(alpha)))
        for p, pt in zip(p_values, pts):
            rows.append(_chart_row(p, alpha, pt))
    return write_csv(path, ["p", "alpha", "x", "y", "z", "r", "theta", "phi"],
                     rows, config)


def write_trajectory_csv(traj, path, config=None) -> Path:
    """Time-parameterized trajectory dump; the divergence accumulator rides along."""
    rows = []
    for t, state, div in zip(traj.times, traj.states, traj.div_integral):
        sp = cartesian_to_spherical(state)
        rows.append([t, state[0], state[1], state[2], sp.r, sp.theta, sp.phi, div])
    return write_csv(path, ["t", "x", "y", "z", "r", "theta", "phi", "div_integral"],
                     rows, config)


def write_contours_csv(contours: ContourSet, chart, path, config=None) -> Path:
    """Contour polylines as (contour_id, p, alpha, theta, phi, transverse)."""
    rows = []
    for cid, line in enumerate(contours.lines):
        for (p, a), tr in zip(line.vertices, line.transverse):
            pt = chart.point(float(p), float(a) % 1.0)
            sp = cartesian_to_spherical(pt)
            rows.append([cid, p, a, sp.theta, sp.phi, bool(tr)])
    return write_csv(path, ["contour_id", "p", "alpha", "theta", "phi", "transverse"],
                     rows, config)


def write_contours_xyz_csv(contours: ContourSet, chart, path, config=None) -> Path:
    """The same polylines mapped onto the unperturbed surface in 3D."""
    rows = []
    for cid, line in enumerate(contours.lines):
        for p, a in line.vertices:
            pt = chart.point(float(p), float(a) % 1.0)
            rows.append([cid, pt[0], pt[1], pt[2]])
    return write_csv(path, ["contour_id", "x", "y", "z"], rows, config)


def write_lobes_json(reports: list, path, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"lobes": [r.to_dict() for r in reports]}
    if config is not None:
        payload["config"] = config
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_surface_csv(path, p_values, alpha_values, points, valid, config=None) -> Path:
    """Structured surface mesh as (p, alpha, x, y, z, valid) node rows."""
    rows = []
    for i, p in enumerate(p_values):
        for j, a in enumerate(alpha_values):
            pt = points[i, j]
            rows.append([p, a, pt[0], pt[1], pt[2], bool(valid[i, j])])
    return write_csv(path, ["p", "alpha", "x", "y", "z", "valid"], rows, config)


def write_surface_mesh(path, p_values, alpha_values, points, config=None) -> Path:
    """Indexed triangle list: vertex lines then face lines, alpha seam closed.

    Format: ``v x y z`` per vertex (row-major over the (p, alpha) grid) and
    ``f i j k`` with zero-based vertex indices.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_p, n_a = len(p_values), len(alpha_values)
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    for i in range(n_p):
        for j in range(n_a):
            x, y, z = points[i, j]
            lines.append(f"v {fmt(x)} {fmt(y)} {fmt(z)}")
    for i in range(n_p - 1):
        for j in range(n_a):
            j1 = (j + 1) % n_a
            v00 = i * n_a + j
            v10 = (i + 1) * n_a + j
            v11 = (i + 1) * n_a + j1
            v01 = i * n_a + j1
            lines.append(f"f {v00} {v10} {v11}")
            lines.append(f"f {v00} {v11} {v01}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_samples_csv(samples: list, path, config=None) -> Path:
    rows = [
        [s.kind, s.p, s.alpha, s.t, s.eps, s.p_launch, s.measured_d,
         s.predicted_d, s.error(), s.seeding_error_estimate]
        for s in samples
    ]
    return write_csv(
        path,
        ["kind", "p", "alpha", "t", "eps", "p_launch", "measured_d",
         "predicted_d", "abs_error", "seeding_error_estimate"],
        rows,
        config,
    )


def write_order_fits_json(fits: list, path, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "fits": [
            {
                "eps": [float(e) for e in f.eps_list],
                "errors": [float(e) for e in f.errors],
                "slope": f.slope,
                "intercept": f.intercept,
                "r_squared": f.r_squared,
                "saturated": f.saturated,
            }
            for f in fits
        ]
    }
    if config is not None:
        payload["config"] = config
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
