"""Render scatter, uncertainty-ellipse, and variance-curve figures.

Inputs are the embedding CLI's documented text formats:
  coordinates TSV  -> header "id<TAB>x<TAB>y[<TAB>uncertainty]" then one row per node
  labels           -> whitespace-separated "node label" lines, '#' comments
  variance CSV     -> header "epoch,dim,mean_sigma" then one row per (epoch, dim)
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Ellipse  # noqa: E402


class SchemaError(ValueError):
    """An input artifact is missing a required column."""

    def __init__(self, column: str, path: str):
        super().__init__(f"{path}: missing required column {column!r}")
        self.column = column


KINDS = ("scatter", "ellipse", "variance_curves")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    out_path: str
    coords_path: str | None = None
    labels_path: str | None = None
    variances_path: str | None = None
    ellipse_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if self.kind in ("scatter", "ellipse") and not self.coords_path:
            raise ValueError(f"{self.kind} figures need --coords")
        if self.kind == "variance_curves" and not self.variances_path:
            raise ValueError("variance_curves figures need --variances")
        for path in (self.coords_path, self.labels_path, self.variances_path):
            if path and not os.path.isfile(path):
                raise FileNotFoundError(path)


@dataclass
class RenderInfo:
    """Structural summary of the rendered figure, used by tests."""

    points: int = 0
    colors: int = 0
    ellipses: int = 0
    curves: int = 0
    curve_length: int = 0


def read_coordinates(path: str, need_uncertainty: bool):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split("\t")
        for column in ("id", "x", "y"):
            if column not in header:
                raise SchemaError(column, path)
        if need_uncertainty and "uncertainty" not in header:
            raise SchemaError("uncertainty", path)
        idx = {name: i for i, name in enumerate(header)}
        ids, xs, ys, unc = [], [], [], []
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) < len(header):
                continue
            ids.append(parts[idx["id"]])
            xs.append(float(parts[idx["x"]]))
            ys.append(float(parts[idx["y"]]))
            if need_uncertainty:
                unc.append(float(parts[idx["uncertainty"]]))
    return ids, np.asarray(xs), np.asarray(ys), np.asarray(unc)


def read_labels(path: str) -> dict[str, int]:
    labels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise ValueError(f"{path}: expected 'node label', got {line!r}")
            labels[tokens[0]] = int(tokens[1])
    return labels


def read_variances(path: str) -> np.ndarray:
    """Return an epochs x dims matrix of mean sigmas."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for column in ("epoch", "dim", "mean_sigma"):
            if column not in header:
                raise SchemaError(column, path)
        idx = {name: i for i, name in enumerate(header)}
        entries = {}
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < len(header):
                continue
            e = int(parts[idx["epoch"]])
            d = int(parts[idx["dim"]])
            entries[(e, d)] = float(parts[idx["mean_sigma"]])
    if not entries:
        raise ValueError(f"{path}: no variance rows")
    epochs = 1 + max(e for e, _ in entries)
    dims = 1 + max(d for _, d in entries)
    mat = np.full((epochs, dims), np.nan)
    for (e, d), v in entries.items():
        mat[e, d] = v
    return mat


def _color_table(ids, labels: dict[str, int] | None):
    """Deterministic color per node: sorted label order indexes the colormap."""
    if labels is None:
        return ["C0"] * len(ids), 1
    values = sorted({labels[i] for i in ids if i in labels})
    cmap = plt.get_cmap("tab10")
    lookup = {v: cmap(k % 10) for k, v in enumerate(values)}
    colors = [lookup.get(labels.get(i), (0.5, 0.5, 0.5, 1.0)) for i in ids]
    return colors, len(values)


def render(spec: FigureSpec) -> RenderInfo:
    """Write the figure described by spec and return its element counts."""
    info = RenderInfo()
    fig, ax = plt.subplots(figsize=(6, 5))
    try:
        if spec.kind in ("scatter", "ellipse"):
            ids, xs, ys, unc = read_coordinates(
                spec.coords_path, need_uncertainty=spec.kind == "ellipse")
            labels = read_labels(spec.labels_path) if spec.labels_path else None
            colors, n_colors = _color_table(ids, labels)
            ax.scatter(xs, ys, c=colors, s=18, zorder=3)
            info.points = len(ids)
            info.colors = n_colors
            if spec.kind == "ellipse":
                for x, y, u, c in zip(xs, ys, unc, colors):
                    radius = spec.ellipse_scale * u
                    ax.add_patch(Ellipse((x, y), 2 * radius, 2 * radius,
                                         facecolor=c, alpha=0.25,
                                         edgecolor=c, lw=0.8))
                info.ellipses = len(ids)
            ax.set_xlabel("x")
            ax.set_ylabel("y")
        else:
            mat = read_variances(spec.variances_path)
            epochs = np.arange(mat.shape[0])
            for d in range(mat.shape[1]):
                ax.plot(epochs, mat[:, d], lw=1.2, label=f"dim {d}")
            info.curves = mat.shape[1]
            info.curve_length = mat.shape[0]
            ax.set_xlabel("epoch")
            ax.set_ylabel("mean sigma")
            if mat.shape[1] <= 12:
                ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(spec.out_path, dpi=120)
    finally:
        plt.close(fig)
    return info
