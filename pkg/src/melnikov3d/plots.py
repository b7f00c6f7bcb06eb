"""Figure rendering for the CLI report paths (PNG files next to the CSVs)."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "plot_melnikov_heatmap",
    "plot_contours",
    "plot_contours_3d",
    "plot_surface",
    "plot_lobes",
    "plot_order_fits",
]


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_melnikov_heatmap(field, path, closed_form=None):
    n_axes = 2 if closed_form is not None else 1
    fig, axes = plt.subplots(1, n_axes, figsize=(5.5 * n_axes, 4.2), squeeze=False)
    extent = [field.alpha_grid[0], field.alpha_grid[-1] + field.alpha_step,
              field.p_grid[0], field.p_grid[-1]]
    im = axes[0, 0].imshow(field.values, origin="lower", aspect="auto",
                           extent=extent, cmap="RdBu_r")
    axes[0, 0].set_xlabel(r"$\alpha$")
    axes[0, 0].set_ylabel("p")
    axes[0, 0].set_title(f"M(p, $\\alpha$) at t = {field.t:g}")
    fig.colorbar(im, ax=axes[0, 0])
    if closed_form is not None:
        ref = np.array([
            [closed_form(p, a, field.t) for a in field.alpha_grid]
            for p in field.p_grid
        ])
        dev = field.values - ref
        im2 = axes[0, 1].imshow(dev, origin="lower", aspect="auto",
                                extent=extent, cmap="magma")
        axes[0, 1].set_xlabel(r"$\alpha$")
        axes[0, 1].set_title(f"deviation from closed form (max {np.abs(dev).max():.2e})")
        fig.colorbar(im2, ax=axes[0, 1])
    return _save(fig, path)


def plot_contours(contours, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    field = contours.field
    for line in contours.lines:
        v = line.vertices
        # break the polyline at alpha seam jumps so matplotlib does not bridge them
        jumps = np.flatnonzero(np.abs(np.diff(v[:, 1])) > 0.5)
        start = 0
        for j in list(jumps) + [len(v) - 1]:
            seg = v[start:j + 1]
            if len(seg) > 1:
                ax.plot(seg[:, 1], seg[:, 0], "g-", lw=1.0)
            start = j + 1
        bad = ~line.transverse
        if np.any(bad):
            ax.plot(v[bad, 1], v[bad, 0], "r.", ms=3)
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel("p")
    ax.set_xlim(0, 1)
    ax.set_ylim(field.p_grid[0], field.p_grid[-1])
    ax.set_title(f"zero contours of M at t = {field.t:g} "
                 "(red: non-transverse vertices)")
    return _save(fig, path)


def plot_contours_3d(contours, chart, path):
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    th = np.linspace(0, np.pi, 31)
    ph = np.linspace(0, 2 * np.pi, 61)
    TH, PH = np.meshgrid(th, ph)
    ax.plot_wireframe(np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH),
                      np.cos(TH), color="0.85", lw=0.3)
    for line in contours.lines:
        pts = np.array([
            chart.point(float(p), float(a) % 1.0) for p, a in line.vertices
        ])
        ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], "g-", lw=1.2)
    ax.set_box_aspect((1, 1, 1))
    ax.set_title("intersection curves on the unperturbed surface")
    return _save(fig, path)


def plot_surface(path, points_pert, points_unpert, kind):
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    color = "red" if kind == "unstable" else "blue"
    for pts, c, lw in ((points_unpert, "0.6", 0.4), (points_pert, color, 0.8)):
        n_p, n_a, _ = pts.shape
        for i in range(0, n_p, max(1, n_p // 24)):
            ring = np.vstack([pts[i], pts[i, :1]])
            ax.plot(ring[:, 0], ring[:, 1], ring[:, 2], color=c, lw=lw)
        for j in range(0, n_a, max(1, n_a // 24)):
            ax.plot(pts[:, j, 0], pts[:, j, 1], pts[:, j, 2], color=c, lw=lw)
    ax.set_box_aspect((1, 1, 1))
    ax.set_title(f"perturbed {kind} manifold (grey: unperturbed)")
    return _save(fig, path)


def plot_lobes(field, reports, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    extent = [field.alpha_grid[0], field.alpha_grid[-1] + field.alpha_step,
              field.p_grid[0], field.p_grid[-1]]
    shade = np.full(field.values.shape, np.nan)
    for r in reports:
        if r.unbounded:
            continue
        for i, j in r.member_cells:
            shade[i, j] = r.region_id
    ax.imshow(field.values, origin="lower", aspect="auto", extent=extent,
              cmap="RdBu_r", alpha=0.35)
    ax.imshow(shade, origin="lower", aspect="auto", extent=extent,
              cmap="tab20", interpolation="nearest")
    for r in reports:
        if r.unbounded or not r.member_cells:
            continue
        i, j = r.member_cells[len(r.member_cells) // 2]
        p = 0.5 * (field.p_grid[i] + field.p_grid[i + 1])
        a = field.alpha_grid[j] + 0.5 * field.alpha_step
        label = f"{r.region_id}"
        if r.volume_leading is not None:
            label += f"\n{r.volume_leading:.3e}"
        ax.annotate(label, (a, p), fontsize=7, ha="center")
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel("p")
    ax.set_title(f"sign-definite lobes at t = {field.t:g}")
    return _save(fig, path)


def plot_order_fits(fits, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for k, f in enumerate(fits):
        eps = np.asarray(f.eps_list)
        err = np.asarray(f.errors)
        label = f"tuple {k}"
        if f.slope is not None:
            label += f": slope {f.slope:.2f}"
        elif f.saturated:
            label += ": saturated"
        ax.loglog(eps, np.maximum(err, 1e-300), "o-", label=label)
    ref = np.array([min(min(f.eps_list) for f in fits),
                    max(max(f.eps_list) for f in fits)])
    scale = max(max(f.errors) for f in fits) / ref[-1] ** 2
    ax.loglog(ref, scale * ref**2, "k--", lw=0.8, label=r"$\epsilon^2$")
    ax.set_xlabel(r"$\epsilon$")
    ax.set_ylabel("|measured - predicted|")
    ax.legend(fontsize=7)
    ax.set_title("remainder order of the displacement prediction")
    return _save(fig, path)
