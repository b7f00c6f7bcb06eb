"""Command-line interface: reproducible file outputs for every pipeline stage.

Every command writes delimited output plus a JSON sidecar embedding the full
merged run configuration, and renders matplotlib figures alongside unless
``--no-plot`` is given. Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field as dataclass_field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analysis import build_melnikov_grid, lobe_regions, lobe_volume, zero_contours
from .charts import HillChartClassical, HillChartSwirl
from .errors import ConfigError, Melnikov3DError
from .fields import get_field_model, get_perturbation
from .io import (
    write_chart_csv,
    write_contours_csv,
    write_contours_xyz_csv,
    write_lobes_json,
    write_melnikov_csv,
    write_melnikov_json,
    write_order_fits_json,
    write_samples_csv,
    write_surface_csv,
    write_surface_mesh,
)
from .melnikov import melnikov_stable, melnikov_unstable
from .oracle import fit_order, measure_displacement
from .quadrature import QuadratureSpec
from .reference import closed_form_for

__all__ = ["main"]


@dataclass
class RunConfig:
    """Fully merged settings of one CLI invocation; serialized into every output."""

    command: str
    model: str = "hill-classical"
    model_params: dict = dataclass_field(default_factory=dict)
    perturbation: str = "gr"
    t: float = 0.0
    eps: float = 0.1
    eps_list: list = dataclass_field(default_factory=list)
    p_min: float = -2.0
    p_max: float = 2.0
    n_p: int = 200
    n_alpha: int = 192
    quad_rule: str = "adaptive-simpson"
    quad_rel_tol: float = 1e-10
    quad_abs_tol: float = 1e-12
    grid_quad_rule: str = "gauss-legendre"
    kind: str = "unstable"
    grad_threshold: float | None = None
    max_displacement: float = 0.25
    tuples: int = 5
    p_launch: float = -5.0
    seed: int = 0
    threads: int = 1
    out_dir: str = "melnikov3d-out"
    plot: bool = True
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def quad(self, rule: str | None = None) -> QuadratureSpec:
        return QuadratureSpec(
            rel_tol=self.quad_rel_tol,
            abs_tol=self.quad_abs_tol,
            rule=rule or self.quad_rule,
        )


def _parse_p_range(spec: str):
    try:
        lo, hi, n = spec.split(":")
        return float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigError(f"bad p range {spec!r}; expected 'lo:hi:n'") from exc


def _parse_eps_list(spec: str):
    try:
        values = [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad eps list {spec!r}") from exc
    if not values:
        raise ConfigError("empty eps list")
    return values


def _build_config(command: str, kwargs: dict) -> RunConfig:
    """Merge defaults <- config file <- explicit flags into one RunConfig."""
    merged: dict = {}
    config_path = kwargs.pop("config", None)
    if config_path:
        try:
            merged.update(json.loads(Path(config_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc

    flag_map = {k: v for k, v in kwargs.items() if v is not None}
    if "p" in flag_map:
        lo, hi, n = _parse_p_range(flag_map.pop("p"))
        flag_map.update(p_min=lo, p_max=hi, n_p=n)
    if "alpha" in flag_map:
        flag_map["n_alpha"] = flag_map.pop("alpha")
    if "eps" in flag_map and command == "verify":
        flag_map["eps_list"] = _parse_eps_list(flag_map.pop("eps"))
    if "r0" in flag_map:
        merged.setdefault("model_params", {})
        flag_map["model_params"] = {"R0": flag_map.pop("r0")}
    flag_map.pop("r0", None)
    merged.update(flag_map)

    if "threads" not in merged:
        env = os.environ.get("MELNIKOV3D_THREADS")
        if env:
            try:
                merged["threads"] = int(env)
            except ValueError as exc:
                raise ConfigError(f"bad MELNIKOV3D_THREADS value {env!r}") from exc

    allowed = set(RunConfig.__dataclass_fields__) - {"command", "version"}
    unknown = set(merged) - allowed
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    cfg = RunConfig(command=command, **merged)
    if cfg.command == "verify" and not cfg.eps_list:
        cfg.eps_list = [1e-2, 3e-3, 1e-3]
    try:
        cfg.quad()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.n_p < 2 or cfg.n_alpha < 2:
        raise ConfigError("grid sizes must be at least 2")
    if not cfg.p_min < cfg.p_max:
        raise ConfigError(f"empty p range [{cfg.p_min}, {cfg.p_max}]")
    return cfg


def _build_pipeline(cfg: RunConfig):
    field = get_field_model(cfg.model, **cfg.model_params)
    perturbation = get_perturbation(cfg.perturbation)
    if cfg.model == "hill-classical":
        chart = HillChartClassical(field)
    elif cfg.model == "hill-swirl":
        chart = HillChartSwirl(field, field.R0)
    else:  # pragma: no cover - registry and charts move together
        raise ConfigError(f"no chart construction registered for {cfg.model!r}")
    return field, perturbation, chart


def _out(cfg: RunConfig, name: str) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


PLOT_SCRIPT = '''\
#!/usr/bin/env python3
"""Standalone plotting companion: renders the CSV outputs in this directory."""
import csv
import json
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(".")


def read_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            rows.append(line.rstrip("\\n").split(","))
    header, body = rows[0], rows[1:]
    return header, body


for csv_path in sorted(out.glob("*.csv")):
    header, body = read_csv(csv_path)
    stem = csv_path.stem
    fig, ax = plt.subplots()
    if header[:3] == ["p", "alpha", "M"]:
        p = np.array([float(r[0]) for r in body])
        a = np.array([float(r[1]) for r in body])
        m = np.array([float(r[2]) for r in body])
        n_a = len(np.unique(a))
        sc = ax.tricontourf(a, p, m, levels=41, cmap="RdBu_r")
        fig.colorbar(sc, ax=ax)
        ax.set_xlabel("alpha"); ax.set_ylabel("p")
    elif header[0] == "contour_id":
        ids = np.array([float(r[0]) for r in body])
        p = np.array([float(r[1]) for r in body])
        a = np.array([float(r[2]) for r in body])
        for cid in np.unique(ids):
            sel = ids == cid
            ax.plot(a[sel], p[sel], ".", ms=2)
        ax.set_xlabel("alpha"); ax.set_ylabel("p")
    elif header[0] == "kind":
        eps = np.array([float(r[4]) for r in body])
        err = np.array([float(r[8]) for r in body])
        ax.loglog(eps, np.maximum(err, 1e-300), "o")
        ax.set_xlabel("eps"); ax.set_ylabel("|measured - predicted|")
    else:
        plt.close(fig)
        continue
    ax.set_title(stem)
    fig.savefig(out / (stem + "_replot.png"), dpi=150, bbox_inches="tight")
    plt.close(fig)
print("replotted into", out)
'''


def _maybe_emit_plot_script(cfg: RunConfig, emit: bool):
    if emit:
        path = _out(cfg, "plot_results.py")
        path.write_text(PLOT_SCRIPT)
        click.echo(f"wrote {path}")


def _run(command_fn, command_name, kwargs):
    try:
        cfg = _build_config(command_name, kwargs)
        command_fn(cfg)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    except Melnikov3DError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)
    sys.exit(0)


def common_options(fn):
    decorators = [
        click.option("--model", type=str, default=None, help="field model name"),
        click.option("--R0", "r0", type=float, default=None,
                     help="swirl Rossby number (hill-swirl)"),
        click.option("--perturbation", type=str, default=None),
        click.option("--t", type=float, default=None, help="evaluation time"),
        click.option("--p", type=str, default=None, metavar="LO:HI:N",
                     help="p range and resolution"),
        click.option("--alpha", type=int, default=None, help="alpha resolution"),
        click.option("--quad-rule", "quad_rule", default=None,
                     type=click.Choice(["adaptive-simpson", "gauss-legendre"])),
        click.option("--quad-rel-tol", "quad_rel_tol", type=float, default=None),
        click.option("--quad-abs-tol", "quad_abs_tol", type=float, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--threads", type=int, default=None,
                     help="worker cap for the grid fill (MELNIKOV3D_THREADS fallback)"),
        click.option("--out", "out_dir", type=str, default=None,
                     help="output directory"),
        click.option("--config", type=click.Path(), default=None,
                     help="JSON file with default settings; flags override"),
        click.option("--plot/--no-plot", "plot", default=None,
                     help="render PNG figures next to the delimited output"),
        click.option("--emit-plot-script", is_flag=True, default=False,
                     help="write a standalone plotting script into the output dir"),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Melnikov analysis of split 2D manifolds in 3D flows."""


@main.command("melnikov")
@common_options
def cmd_melnikov(emit_plot_script, **kwargs):
    """Sample the splitting function M on a (p, alpha) grid."""

    def run(cfg: RunConfig):
        _, perturbation, chart = _build_pipeline(cfg)
        grid = build_melnikov_grid(
            chart, perturbation, cfg.t, (cfg.p_min, cfg.p_max), cfg.n_p,
            cfg.n_alpha, cfg.quad(cfg.grid_quad_rule), threads=cfg.threads,
        )
        closed = closed_form_for(cfg.model, cfg.perturbation, cfg.model_params)
        csv_path = write_melnikov_csv(grid, _out(cfg, "melnikov.csv"),
                                      cfg.to_dict(), closed)
        write_melnikov_json(grid, _out(cfg, "melnikov.json"), cfg.to_dict())
        click.echo(f"wrote {csv_path}")
        if closed is not None:
            dev = max(
                abs(grid.values[i, j] - closed(p, a, grid.t))
                for i, p in enumerate(grid.p_grid)
                for j, a in enumerate(grid.alpha_grid)
            )
            click.echo(f"max deviation from closed form: {dev:.3e}")
        if cfg.plot:
            from .plots import plot_melnikov_heatmap

            click.echo(f"wrote {plot_melnikov_heatmap(grid, _out(cfg, 'melnikov.png'), closed)}")
        _maybe_emit_plot_script(cfg, emit_plot_script)

    _run(run, "melnikov", kwargs)


@main.command("surface")
@common_options
@click.option("--kind", type=click.Choice(["unstable", "stable", "both"]),
              default=None)
@click.option("--eps", type=float, default=None)
@click.option("--max-displacement", "max_displacement", type=float, default=None,
              help="validity window: flag rows whose normal offset exceeds this")
def cmd_surface(emit_plot_script, **kwargs):
    """Mesh the perturbed manifold(s) by the leading-order normal offset."""

    def run(cfg: RunConfig):
        _, perturbation, chart = _build_pipeline(cfg)
        kinds = ["unstable", "stable"] if cfg.kind == "both" else [cfg.kind]
        p_vals = np.linspace(cfg.p_min, cfg.p_max, cfg.n_p)
        a_vals = np.arange(cfg.n_alpha) / cfg.n_alpha
        quad = cfg.quad()
        for kind in kinds:
            mel = melnikov_unstable if kind == "unstable" else melnikov_stable
            pts = np.empty((cfg.n_p, cfg.n_alpha, 3))
            base = np.empty_like(pts)
            valid = np.empty((cfg.n_p, cfg.n_alpha), dtype=bool)
            n_warn = 0
            for i, p in enumerate(p_vals):
                for j, a in enumerate(a_vals):
                    m = mel(chart, perturbation, p, a, cfg.t, quad).value
                    n = chart.normal(p, a)
                    nn = float(n @ n)
                    x_bar = chart.point(p, a)
                    base[i, j] = x_bar
                    pts[i, j] = x_bar + cfg.eps * m * n / nn
                    offset = abs(cfg.eps * m) / np.sqrt(nn)
                    valid[i, j] = offset <= cfg.max_displacement
                    n_warn += int(not valid[i, j])
            csv_path = write_surface_csv(
                _out(cfg, f"surface_{kind}.csv"), p_vals, a_vals, pts, valid,
                cfg.to_dict(),
            )
            write_surface_mesh(_out(cfg, f"surface_{kind}.mesh"), p_vals, a_vals,
                               pts, cfg.to_dict())
            write_surface_csv(_out(cfg, "surface_unperturbed.csv"), p_vals,
                              a_vals, base, np.ones_like(valid), cfg.to_dict())
            click.echo(f"wrote {csv_path}")
            if n_warn:
                click.echo(
                    f"warning: {n_warn} nodes exceed the leading-order validity "
                    f"window (offset > {cfg.max_displacement})", err=True,
                )
            if cfg.plot:
                from .plots import plot_surface

                click.echo(
                    f"wrote {plot_surface(_out(cfg, f'surface_{kind}.png'), pts, base, kind)}"
                )
        _maybe_emit_plot_script(cfg, emit_plot_script)

    _run(run, "surface", kwargs)


@main.command("contours")
@common_options
@click.option("--grad-threshold", "grad_threshold", type=float, default=None,
              help="transversality threshold on |dM/dp| + |dM/dalpha|")
def cmd_contours(emit_plot_script, **kwargs):
    """Extract the zero contours of M and map them onto the surface."""

    def run(cfg: RunConfig):
        _, perturbation, chart = _build_pipeline(cfg)
        grid = build_melnikov_grid(
            chart, perturbation, cfg.t, (cfg.p_min, cfg.p_max), cfg.n_p,
            cfg.n_alpha, cfg.quad(cfg.grid_quad_rule), threads=cfg.threads,
        )
        contours = zero_contours(grid, cfg.grad_threshold)
        csv_path = write_contours_csv(contours, chart,
                                      _out(cfg, "contours.csv"), cfg.to_dict())
        write_contours_xyz_csv(contours, chart, _out(cfg, "contours_xyz.csv"),
                               cfg.to_dict())
        click.echo(f"wrote {csv_path} ({len(contours)} polylines)")
        if cfg.plot:
            from .plots import plot_contours, plot_contours_3d

            click.echo(f"wrote {plot_contours(contours, _out(cfg, 'contours.png'))}")
            click.echo(
                f"wrote {plot_contours_3d(contours, chart, _out(cfg, 'contours_3d.png'))}"
            )
        _maybe_emit_plot_script(cfg, emit_plot_script)

    _run(run, "contours", kwargs)


@main.command("lobes")
@common_options
@click.option("--eps", type=float, default=None)
def cmd_lobes(emit_plot_script, **kwargs):
    """Segment sign-definite regions of M and report leading-order lobe volumes."""

    def run(cfg: RunConfig):
        _, perturbation, chart = _build_pipeline(cfg)
        grid = build_melnikov_grid(
            chart, perturbation, cfg.t, (cfg.p_min, cfg.p_max), cfg.n_p,
            cfg.n_alpha, cfg.quad(cfg.grid_quad_rule), threads=cfg.threads,
        )
        contours = zero_contours(grid, cfg.grad_threshold)
        reports = lobe_regions(grid, contours)
        for report in reports:
            if not report.unbounded:
                lobe_volume(grid, report, cfg.eps)
        json_path = write_lobes_json(reports, _out(cfg, "lobes.json"), cfg.to_dict())
        bounded = [r for r in reports if not r.unbounded]
        click.echo(
            f"wrote {json_path} ({len(bounded)} bounded regions of {len(reports)})"
        )
        for r in bounded:
            click.echo(
                f"  region {r.region_id}: sign {r.sign:+d}, "
                f"volume {r.volume_leading:.6e}"
            )
        if cfg.plot:
            from .plots import plot_lobes

            click.echo(f"wrote {plot_lobes(grid, reports, _out(cfg, 'lobes.png'))}")
        _maybe_emit_plot_script(cfg, emit_plot_script)

    _run(run, "lobes", kwargs)


@main.command("verify")
@common_options
@click.option("--eps", type=str, default=None, metavar="E1,E2,...",
              help="decreasing eps ladder for the order fit")
@click.option("--tuples", type=int, default=None,
              help="number of (p, alpha) sample points")
@click.option("--p-launch", "p_launch", type=float, default=None)
@click.option("--kind", type=click.Choice(["unstable", "stable"]), default=None)
def cmd_verify(emit_plot_script, **kwargs):
    """Check predictions against direct integration and fit the error order."""

    def run(cfg: RunConfig):
        field, perturbation, chart = _build_pipeline(cfg)
        rng = np.random.default_rng(cfg.seed)
        quad = cfg.quad()

        probe = build_melnikov_grid(chart, perturbation, cfg.t, (-1.0, 1.0),
                                    33, 36, cfg.quad(cfg.grid_quad_rule))
        m_scale = float(np.max(np.abs(probe.values)))
        if m_scale == 0.0:
            raise ConfigError(
                "perturbation produces identically zero M; nothing to verify"
            )

        tuples = []
        attempts = 0
        while len(tuples) < cfg.tuples and attempts < 200 * cfg.tuples:
            attempts += 1
            p = float(rng.uniform(-0.8, 0.8))
            a = float(rng.uniform(0.0, 1.0))
            if abs(probe.interpolate(p, a)) >= 0.3 * m_scale:
                tuples.append((p, a))
        if len(tuples) < cfg.tuples:
            raise ConfigError("could not find sample points away from M zeros")

        samples_all, fits = [], []
        for p, a in tuples:
            group = []
            for eps in cfg.eps_list:
                s = measure_displacement(
                    chart, field, perturbation, eps, p, a, cfg.t,
                    cfg.p_launch if cfg.kind == "unstable" else -cfg.p_launch,
                    kind=cfg.kind, quad=quad,
                )
                group.append(s)
                samples_all.append(s)
            fits.append(fit_order(group))
        csv_path = write_samples_csv(samples_all, _out(cfg, "verify_samples.csv"),
                                     cfg.to_dict())
        write_order_fits_json(fits, _out(cfg, "verify_fits.json"), cfg.to_dict())
        click.echo(f"wrote {csv_path}")
        for k, f in enumerate(fits):
            if f.saturated:
                click.echo(f"  tuple {k}: saturated (errors below noise floor)")
            else:
                click.echo(f"  tuple {k}: slope {f.slope:.3f} (R^2 {f.r_squared:.4f})")
        if cfg.plot:
            from .plots import plot_order_fits

            click.echo(f"wrote {plot_order_fits(fits, _out(cfg, 'verify.png'))}")
        _maybe_emit_plot_script(cfg, emit_plot_script)

    _run(run, "verify", kwargs)


@main.command("chart")
@common_options
def cmd_chart(emit_plot_script, **kwargs):
    """Dump the unperturbed chart as CSV (p, alpha, x, y, z, r, theta, phi)."""

    def run(cfg: RunConfig):
        _, _, chart = _build_pipeline(cfg)
        p_vals = np.linspace(cfg.p_min, cfg.p_max, cfg.n_p)
        a_vals = np.arange(cfg.n_alpha) / cfg.n_alpha
        path = write_chart_csv(chart, _out(cfg, "chart.csv"), p_vals, a_vals,
                               cfg.to_dict())
        click.echo(f"wrote {path}")
        _maybe_emit_plot_script(cfg, emit_plot_script)

    _run(run, "chart", kwargs)


if __name__ == "__main__":
    main()
