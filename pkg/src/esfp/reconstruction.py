"""Relative intensities at polarizer angles from integrated event polarities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import EventStream
from .scene import RotationProfile


class BadWindow(ValueError):
    pass


@dataclass
class AngleSampledIntensities:
    """Relative intensities ``values[k]`` (H, W) at ``angles[k]`` radians."""

    angles: np.ndarray
    values: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.values.shape != (len(self.angles),) + self.valid_mask.shape:
            raise ValueError("values must be (n_angles, H, W)")


def default_angle_grid(n: int = 12) -> np.ndarray:
    """n equally spaced polarizer angles over [0, pi); 15 degree steps by default."""
    return np.arange(n) * (np.pi / n)


def sample_times(rotation: RotationProfile, angles, revolution: int = -1) -> np.ndarray:
    """Sampling instants (us) of ``angles`` within one revolution.

    The window opens when the polarizer first reaches ``angles[0]`` in the
    chosen revolution and every later angle is taken at its next occurrence,
    so all samples lie within half a turn of the window start.
    """
    angles = np.asarray(angles, dtype=float)
    rev = revolution % rotation.revolutions
    t_start = rotation.time_at_angle(angles[0], rev)
    offsets = np.mod(angles - angles[0], np.pi) / rotation.omega * 1e6
    return t_start + offsets


def reconstruct_intensities(
    stream: EventStream,
    rotation: RotationProfile,
    contrast_threshold: float,
    angles=None,
    revolution: int = -1,
) -> AngleSampledIntensities:
    """Event intensities exp(C * sum of polarities) at each polarizer angle.

    The unknown start intensity is fixed to 1 at the first angle: events
    strictly before the window start form the baseline, and each later angle
    sums events up to and including its sampling instant. Pixels without any
    event are invalid and keep value 1.
    """
    angles = default_angle_grid() if angles is None else np.asarray(angles, dtype=float)
    if len(angles) == 0:
        raise ValueError("at least one angle is required")
    times = sample_times(rotation, angles, revolution)
    if np.any(times > rotation.duration_us + 1e-6):
        raise BadWindow("requested angles exceed the event stream's time span")
    h, w = stream.height, stream.width
    ev = stream.events
    pix = stream.pixel_index
    t = ev["t"]
    p = ev["p"].astype(np.int64)

    # sums[j] = polarity sum over events with t < t_start (j=0) or t <= times[j]
    edges = np.searchsorted(t, times, side="right")
    edges[0] = np.searchsorted(t, times[0], side="left")
    sums = np.empty((len(angles), h * w), np.int64)
    for j, e in enumerate(edges):
        sums[j] = np.bincount(pix[:e], weights=p[:e], minlength=h * w).astype(np.int64)
    rel = (sums - sums[0]).reshape(len(angles), h, w)
    values = np.exp(contrast_threshold * rel)
    valid = stream.counts() > 0
    values[:, ~valid] = 1.0
    return AngleSampledIntensities(angles, values, valid)
