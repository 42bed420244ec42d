"""Render density heatmaps and characteristic-function panels from CSV files.

Consumes the CSV schemas written by the cisim CLI (`q1,q2,density`,
`q2,density`, and `beta1,beta2,re,im,p_down,p_up,shots`) without importing
the simulator.  Batch tool: identical inputs render pixel-identical images.

Usage: render --kind density|char --config PATH --out PATH
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "render_density_panels", "render_char_panels", "main"]


class RenderError(ValueError):
    pass


@dataclass
class FigureSpec:
    inputs: list[str]
    out: str
    labels: list[str] = field(default_factory=list)
    kappa_hz: float = 1000.0
    omega_hz: float = 667.0
    contour_levels: list[float] = field(default_factory=list)
    vmin: float | None = None
    vmax: float | None = None
    extend: bool = False
    dpi: int = 150

    def __post_init__(self):
        if not self.inputs:
            raise RenderError("no input files given")
        if self.labels and len(self.labels) != len(self.inputs):
            raise RenderError("labels and inputs differ in length")
        if not self.labels:
            self.labels = [Path(p).stem for p in self.inputs]


CONFIG_KEYS = {"inputs", "labels", "kappa_hz", "omega_hz", "contour_levels",
               "vmin", "vmax", "extend", "dpi"}


def parse_spec(path: str, out: str) -> FigureSpec:
    raw: dict[str, str] = {}
    cfg_path = Path(path)
    if not cfg_path.exists():
        raise RenderError(f"config file not found: {path}")
    for lineno, line in enumerate(cfg_path.read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise RenderError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key not in CONFIG_KEYS:
            raise RenderError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value
    if "inputs" not in raw:
        raise RenderError(f"{path}: missing required key 'inputs'")
    spec = FigureSpec(
        inputs=[s.strip() for s in raw["inputs"].split(",") if s.strip()],
        out=out,
        labels=[s.strip() for s in raw.get("labels", "").split(",") if s.strip()],
    )
    if "kappa_hz" in raw:
        spec.kappa_hz = float(raw["kappa_hz"])
    if "omega_hz" in raw:
        spec.omega_hz = float(raw["omega_hz"])
    if "contour_levels" in raw:
        spec.contour_levels = [float(s) for s in raw["contour_levels"].split(",")]
    if "vmin" in raw:
        spec.vmin = float(raw["vmin"])
    if "vmax" in raw:
        spec.vmax = float(raw["vmax"])
    if "extend" in raw:
        spec.extend = raw["extend"].lower() in ("1", "true", "yes", "on")
    if "dpi" in raw:
        spec.dpi = int(raw["dpi"])
    return spec


# ---------------------------------------------------------------------------
# CSV readers (schemas owned by the simulator; parsed standalone here)


def _read_rows(path: str, expected_header: list[str]):
    p = Path(path)
    if not p.exists():
        raise RenderError(f"input file not found: {path}")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise RenderError(f"{path}:1: expected header {expected_header}, "
                              f"got {header}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(expected_header):
                raise RenderError(f"{path}:{lineno}: expected "
                                  f"{len(expected_header)} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise RenderError(f"{path}:{lineno}: {exc}") from exc
    return rows


def read_density(path: str):
    """Returns (q1_axis or None, q2_axis, values)."""
    if not Path(path).exists():
        raise RenderError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
    if header == ["q2", "density"]:
        rows = _read_rows(path, ["q2", "density"])
        q2 = np.array([r[0] for r in rows])
        return None, q2, np.array([r[1] for r in rows])
    rows = _read_rows(path, ["q1", "q2", "density"])
    q1 = np.array(sorted({r[0] for r in rows}))
    q2 = np.array(sorted({r[1] for r in rows}))
    vals = np.zeros((len(q1), len(q2)))
    for r in rows:
        i = int(np.searchsorted(q1, r[0]))
        j = int(np.searchsorted(q2, r[1]))
        vals[i, j] = r[2]
    return q1, q2, vals


def read_char(path: str):
    """Returns (beta1_axis, beta2_axis, complex values, shots)."""
    rows = _read_rows(path, ["beta1", "beta2", "re", "im", "p_down", "p_up",
                             "shots"])
    b1 = np.array(sorted({r[0] for r in rows}))
    b2 = np.array(sorted({r[1] for r in rows}))
    vals = np.zeros((len(b1), len(b2)), dtype=complex)
    shots = np.zeros((len(b1), len(b2)))
    for r in rows:
        i = int(np.searchsorted(b1, r[0]))
        j = int(np.searchsorted(b2, r[1]))
        vals[i, j] = r[2] + 1j * r[3]
        shots[i, j] = r[6]
    return b1, b2, vals, shots


def _check_common_axes(axes_list, what: str):
    first = axes_list[0]
    for k, ax in enumerate(axes_list[1:], 1):
        if ax is None or first is None:
            if ax is not first:
                raise RenderError(f"panel {k} mixes 1D and 2D {what} data")
            continue
        if len(ax) != len(first) or not np.allclose(ax, first):
            raise RenderError(f"panel {k} has a different {what} axis")


def _surface_lower(q1, q2, kappa_hz, omega_hz):
    r = np.hypot(q1[:, None], q2[None, :])
    return 0.5 * omega_hz * r**2 - kappa_hz * r


# ---------------------------------------------------------------------------
# renderers


def render_density_panels(spec: FigureSpec) -> None:
    """Heatmaps with shared color scale and lower-surface contours, or stacked
    1D marginal curves when the inputs are one-dimensional."""
    data = [read_density(p) for p in spec.inputs]
    _check_common_axes([d[0] for d in data], "Q1")
    _check_common_axes([d[1] for d in data], "Q2")

    if data[0][0] is None:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for (_, q2, vals), label in zip(data, spec.labels):
            ax.plot(q2, vals, label=label)
        ax.set_xlabel("$Q_2$")
        ax.set_ylabel(r"$|\Psi(Q_2)|^2$")
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(spec.out, dpi=spec.dpi)
        plt.close(fig)
        return

    vmin = 0.0 if spec.vmin is None else spec.vmin
    vmax = (max(d[2].max() for d in data) if spec.vmax is None else spec.vmax)
    n = len(data)
    fig, axes = plt.subplots(1, n, figsize=(3.1 * n, 3.2), squeeze=False,
                             sharey=True)
    q1, q2 = data[0][0], data[0][1]
    surface = _surface_lower(q1, q2, spec.kappa_hz, spec.omega_hz)
    if spec.contour_levels:
        levels = sorted(spec.contour_levels)
    else:
        depth = abs(surface.min())
        levels = sorted(depth * np.array([-0.9, -0.5, 0.0, 1.0, 3.0]))
    for ax, (g1, g2, vals), label in zip(axes[0], data, spec.labels):
        mesh = ax.pcolormesh(g1, g2, vals.T, vmin=vmin, vmax=vmax,
                             cmap="inferno", shading="nearest",
                             rasterized=True)
        ax.contour(q1, q2, surface.T, levels=levels, colors="w",
                   linewidths=0.5, alpha=0.6)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("$Q_1$")
        ax.set_aspect("equal")
    axes[0][0].set_ylabel("$Q_2$")
    fig.colorbar(mesh, ax=axes[0], shrink=0.85, label="density")
    fig.savefig(spec.out, dpi=spec.dpi)
    plt.close(fig)


def _extend_for_display(b, vals):
    full = np.concatenate([-b[:0:-1], b])
    n1, n2 = vals.shape
    out = np.empty((2 * n1 - 1, 2 * n2 - 1), dtype=complex)
    out[n1 - 1:, n2 - 1:] = vals
    out[: n1 - 1, : n2 - 1] = vals[:0:-1, :0:-1].conj()
    out[n1 - 1:, : n2 - 1] = vals[:, :0:-1]
    out[: n1 - 1, n2 - 1:] = vals[:0:-1, :].conj()
    return full, out


def render_char_panels(spec: FigureSpec) -> None:
    """Real/imaginary heatmap pairs for 2D grids; error-barred line plots for
    one-mode grids (error bars from quantum projection noise at the recorded
    shot counts)."""
    data = [read_char(p) for p in spec.inputs]
    one_mode = [len(d[0]) == 1 for d in data]
    if any(one_mode) != all(one_mode):
        raise RenderError("inputs mix one-mode and two-mode grids")

    if all(one_mode):
        _check_common_axes([d[1] for d in data], "beta2")
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for (b1, b2, vals, shots), label in zip(data, spec.labels):
            re = vals[0].real
            err = np.where(shots[0] > 0,
                           np.sqrt(np.clip(1.0 - re**2, 0.0, 1.0)
                                   / np.maximum(shots[0], 1)), 0.0)
            ax.errorbar(b2, re, yerr=err, fmt="o-", ms=3, lw=1, capsize=2,
                        label=label)
        ax.set_xlabel(r"$\beta_2$")
        ax.set_ylabel(r"$\mathrm{Re}\,\chi(i\beta_2)$")
        ax.axhline(0.0, color="0.7", lw=0.5)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(spec.out, dpi=spec.dpi)
        plt.close(fig)
        return

    _check_common_axes([d[0] for d in data], "beta1")
    _check_common_axes([d[1] for d in data], "beta2")
    n = len(data)
    fig, axes = plt.subplots(n, 2, figsize=(6.4, 2.9 * n), squeeze=False)
    for row, ((b1, b2, vals, _), label) in enumerate(zip(data, spec.labels)):
        if spec.extend and b1.min() >= 0 and b2.min() >= 0:
            # quadrant-only data shown over the full plane via the
            # characteristic function's point symmetry
            axes_b1, ext = _extend_for_display(b1, vals)
            axes_b2 = np.concatenate([-b2[:0:-1], b2])
            b1, b2, vals = axes_b1, axes_b2, ext
        for col, (part, name) in enumerate(((vals.real, "Re"),
                                            (vals.imag, "Im"))):
            ax = axes[row][col]
            lim = max(np.abs(part).max(), 1e-12)
            mesh = ax.pcolormesh(b1, b2, part.T, cmap="RdBu_r", vmin=-lim,
                                 vmax=lim, shading="nearest", rasterized=True)
            ax.set_title(f"{name} $\\chi$ — {label}", fontsize=9)
            ax.set_xlabel(r"$\beta_1$")
            ax.set_ylabel(r"$\beta_2$")
            ax.set_aspect("equal")
            fig.colorbar(mesh, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=spec.dpi)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__)
    parser.add_argument("--kind", required=True, choices=["density", "char"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        spec = parse_spec(args.config, args.out)
        if args.kind == "density":
            render_density_panels(spec)
        else:
            render_char_panels(spec)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    print(f"render: wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
