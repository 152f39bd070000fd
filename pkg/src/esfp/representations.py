"""Frame-like tensors from event streams: voxel grid, CVGR and CVGR-I.

Layout is bins-major, (B, H, W). Bin ``i`` covers
``[t0 + i T/B, t0 + (i+1) T/B)`` with the last bin closed on the right; bin
indices are computed in integer arithmetic so every event lands in exactly
one bin.

The voxel grid holds exact integer polarity sums. CVGR is stored as float32
(the precision of the PFM export); CVGR-I is float64 so that the sum of a
float32 frame and the float32 CVGR is represented without rounding (exact
whenever their magnitudes lie within 2**29 of each other).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .events import EventStream

DEFAULT_BINS = 8


class EmptyWindow(ValueError):
    pass


class TensorKind(str, enum.Enum):
    VOXEL = "voxel"
    CVGR = "cvgr"
    CVGRI = "cvgri"


@dataclass
class EventTensor:
    data: np.ndarray
    kind: TensorKind
    bins: int
    window: tuple[int, int]
    contrast: float | None = None
    log_frame: bool = False

    def metadata(self) -> dict:
        return {
            "kind": TensorKind(self.kind).value,
            "bins": int(self.bins),
            "window": [int(self.window[0]), int(self.window[1])],
            "contrast": None if self.contrast is None else float(self.contrast),
            "log_frame": bool(self.log_frame),
            "shape": list(self.data.shape),
            "dtype": str(self.data.dtype),
        }


def _window(stream: EventStream, window) -> tuple[int, int]:
    if window is None:
        if len(stream) == 0:
            raise EmptyWindow("no events and no window given")
        window = (int(stream.events["t"][0]), int(stream.events["t"][-1]))
    t0, t1 = int(window[0]), int(window[1])
    if t1 <= t0:
        raise EmptyWindow(f"window [{t0}, {t1}] is empty")
    return t0, t1


def bin_index(t: np.ndarray, window: tuple[int, int], bins: int) -> np.ndarray:
    t0, t1 = window
    b = (np.asarray(t, dtype=np.int64) - t0) * bins // (t1 - t0)
    return np.minimum(b, bins - 1)


def build_voxel_grid(stream: EventStream, window=None, bins: int = DEFAULT_BINS) -> EventTensor:
    if bins < 1:
        raise ValueError("bins must be >= 1")
    win = _window(stream, window)
    ev = stream.events
    inside = (ev["t"] >= win[0]) & (ev["t"] <= win[1])
    ev = ev[inside]
    h, w = stream.height, stream.width
    flat = bin_index(ev["t"], win, bins) * (h * w) + ev["y"].astype(np.int64) * w + ev["x"]
    grid = np.bincount(flat, weights=ev["p"].astype(np.float64), minlength=bins * h * w)
    return EventTensor(grid.astype(np.int64).reshape(bins, h, w), TensorKind.VOXEL, bins, win)


def cvgr_from_voxel(voxel: EventTensor, contrast: float) -> EventTensor:
    """C times the prefix sum of the voxel grid over bins."""
    data = (float(contrast) * np.cumsum(voxel.data, axis=0)).astype(np.float32)
    return EventTensor(data, TensorKind.CVGR, voxel.bins, voxel.window, float(contrast))


def build_cvgr(stream: EventStream, window=None, bins: int = DEFAULT_BINS, contrast: float = 0.05) -> EventTensor:
    if not contrast > 0:
        raise ValueError("contrast must be positive")
    return cvgr_from_voxel(build_voxel_grid(stream, window, bins), contrast)


def build_cvgr_i(
    stream: EventStream,
    frame: np.ndarray,
    window=None,
    bins: int = DEFAULT_BINS,
    contrast: float = 0.05,
    log_frame: bool = False,
) -> EventTensor:
    """CVGR with an intensity frame added to every bin.

    By default the frame is added in linear intensity. With ``log_frame`` its
    logarithm is added instead, so that ``exp`` of each bin approximates the
    intensity at the end of that bin.
    """
    frame = np.asarray(frame)
    if frame.shape != (stream.height, stream.width):
        raise ValueError(f"frame shape {frame.shape} does not match sensor {(stream.height, stream.width)}")
    cvgr = build_cvgr(stream, window, bins, contrast)
    base = np.asarray(frame, dtype=np.float32)
    if log_frame:
        base = np.log(base).astype(np.float32)
    data = base.astype(np.float64)[None] + cvgr.data.astype(np.float64)
    return EventTensor(data, TensorKind.CVGRI, bins, cvgr.window, float(contrast), log_frame)


def check_prefix_identity(voxel: EventTensor, cvgr: EventTensor) -> bool:
    expected = cvgr_from_voxel(voxel, cvgr.contrast).data
    return bool(np.array_equal(expected, cvgr.data))
