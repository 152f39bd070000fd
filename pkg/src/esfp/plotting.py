"""PNG renders of normal and error maps."""

from __future__ import annotations

import io as _io

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .io import atomic_write

PNG_METADATA = {"Software": None}


def normal_rgb(normals: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """(N + 1) / 2 color encoding; masked-out pixels are black."""
    rgb = np.clip((np.asarray(normals, dtype=float) + 1.0) / 2.0, 0.0, 1.0)
    if mask is not None:
        rgb[~np.asarray(mask, bool)] = 0.0
    return rgb


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    buf = _io.BytesIO()
    fig.savefig(buf, format="png", metadata=PNG_METADATA)
    atomic_write(path, buf.getvalue())


def render_normal_map(path, normals, mask=None, title: str | None = None) -> None:
    h, w = normals.shape[:2]
    fig = Figure(figsize=(4, 4 * h / w + (0.4 if title else 0)), dpi=100)
    ax = fig.add_subplot()
    ax.imshow(normal_rgb(normals, mask), interpolation="nearest")
    ax.set_axis_off()
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def render_error_map(path, error_deg: np.ndarray, vmax: float = 30.0, title: str | None = None) -> None:
    """Angular error in degrees, NaN outside the evaluated pixels."""
    fig = Figure(figsize=(5, 4), dpi=100)
    ax = fig.add_subplot()
    err = np.ma.masked_invalid(np.asarray(error_deg, dtype=float))
    im = ax.imshow(err, cmap="viridis", vmin=0.0, vmax=vmax, interpolation="nearest")
    ax.set_axis_off()
    cb = fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    cb.set_label("angular error [deg]")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def render_comparison(path, pred, gt, error_deg, vmax: float = 30.0) -> None:
    """Prediction, ground truth and error side by side."""
    fig = Figure(figsize=(11, 3.6), dpi=100)
    axes = fig.subplots(1, 3)
    axes[0].imshow(normal_rgb(pred.normals, pred.valid_mask), interpolation="nearest")
    axes[0].set_title("prediction", fontsize=10)
    axes[1].imshow(normal_rgb(gt.normals, gt.valid_mask), interpolation="nearest")
    axes[1].set_title("ground truth", fontsize=10)
    im = axes[2].imshow(np.ma.masked_invalid(error_deg), cmap="viridis", vmin=0, vmax=vmax, interpolation="nearest")
    axes[2].set_title("angular error [deg]", fontsize=10)
    for ax in axes:
        ax.set_axis_off()
    fig.colorbar(im, ax=axes[2], fraction=0.046, pad=0.04)
    fig.tight_layout()
    _save(fig, path)
