"""Event camera model.

Ideal log-intensity threshold triggering over the analytic intensity seen
through a rotating polarizer, plus the two circuit non-idealities we model:
pixel dead time and spurious positive background events.

Timestamps are integer microseconds. The analytic crossing time is floored to
the microsecond tick it falls in, so an event with timestamp ``t`` truly
happened in ``[t, t + 1)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .physics import PolarizationState, intensity_at_angle

logger = logging.getLogger(__name__)

EVENT_DTYPE = np.dtype([("t", "<i8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
US = 1e-6


class DegenerateTrace(ValueError):
    """The intensity trace reaches zero, so its logarithm is undefined."""


@dataclass(frozen=True)
class CameraConfig:
    contrast_threshold: float = 0.05
    bg_rate: float = 0.0  # positive events / pixel / s
    dead_time: float = 0.0  # microseconds
    width: int = 64
    height: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.contrast_threshold > 0:
            raise ValueError("contrast_threshold must be positive")
        if self.bg_rate < 0 or self.dead_time < 0:
            raise ValueError("bg_rate and dead_time must be nonnegative")
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be positive")

    def to_dict(self) -> dict:
        return {
            "contrast_threshold": float(self.contrast_threshold),
            "bg_rate": float(self.bg_rate),
            "dead_time": float(self.dead_time),
            "width": int(self.width),
            "height": int(self.height),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraConfig":
        return cls(**d)


@dataclass(frozen=True)
class IntensityTrace:
    """Intensity of one pixel behind a polarizer turning at ``omega`` rad/s.

    The polarizer angle at time t (seconds) is ``phase0 + omega * t``.
    """

    state: PolarizationState
    omega: float
    phase0: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    def psi(self, t_us):
        """Argument of the cosine, 2 (phi_pol(t) - phi)."""
        return 2.0 * (self.phase0 + self.omega * np.asarray(t_us, dtype=float) * US - self.state.phi)

    def intensity(self, t_us):
        return intensity_at_angle(self.state, self.phase0 + self.omega * np.asarray(t_us, dtype=float) * US)

    @property
    def log_start(self) -> float:
        return float(np.log(self.intensity(0.0)))


@dataclass
class EventStream:
    """Events of a ``width`` x ``height`` sensor, sorted by timestamp."""

    events: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=EVENT_DTYPE)

    def __len__(self) -> int:
        return len(self.events)

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls(np.empty(0, dtype=EVENT_DTYPE), width, height)

    @property
    def pixel_index(self) -> np.ndarray:
        return self.events["y"].astype(np.int64) * self.width + self.events["x"]

    def counts(self) -> np.ndarray:
        """Per-pixel event counts as an (H, W) array."""
        c = np.bincount(self.pixel_index, minlength=self.width * self.height)
        return c.reshape(self.height, self.width)

    def pixel(self, x: int, y: int) -> np.ndarray:
        sel = (self.events["x"] == x) & (self.events["y"] == y)
        return self.events[sel]


def make_events(t, x, y, p) -> np.ndarray:
    ev = np.empty(len(t), dtype=EVENT_DTYPE)
    ev["t"], ev["x"], ev["y"], ev["p"] = t, x, y, p
    return ev


def merge(chunks, width: int, height: int) -> EventStream:
    """Deterministic merge of event chunks ordered by (t, y, x)."""
    chunks = [c for c in chunks if len(c)]
    if not chunks:
        return EventStream.empty(width, height)
    ev = np.concatenate(chunks)
    order = np.lexsort((ev["x"], ev["y"], ev["t"]))
    return EventStream(ev[order], width, height)


def _strictly_increasing(t: np.ndarray) -> np.ndarray:
    # t_i <- max(t_i, t_{i-1} + 1)
    k = np.arange(len(t))
    return np.maximum.accumulate(t - k) + k


def generate_events_ideal(trace: IntensityTrace, config: CameraConfig, duration: float):
    """Threshold crossings of ln I(t) over ``[0, duration]`` microseconds.

    Reference levels lie on the grid L(0) + kC; after each event the reference
    moves to the crossed level. Returns ``(t, p)`` as int64 and int8 arrays.
    The result does not depend on ``i_un``: only log-intensity differences
    enter the computation.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    rho = float(trace.state.rho)
    if rho >= 1.0 or not float(trace.state.i_un) > 0:
        raise DegenerateTrace(f"intensity reaches zero (rho={rho}, i_un={trace.state.i_un})")
    empty = np.empty(0, np.int64), np.empty(0, np.int8)
    if rho == 0.0:
        return empty
    C = float(config.contrast_threshold)
    psi0 = float(trace.psi(0.0))
    psi_end = float(trace.psi(duration))
    base = 1.0 + rho * np.cos(psi0)
    g0 = np.log(base)

    # monotone pieces of ln(1 + rho cos psi) split at multiples of pi
    m0 = int(np.floor(psi0 / np.pi))
    m1 = int(np.ceil(psi_end / np.pi))
    cuts = [psi0] + [m * np.pi for m in range(m0 + 1, m1) if psi0 < m * np.pi < psi_end] + [psi_end]

    k = 0
    psis, pols = [], []
    for i in range(len(cuts) - 1):
        a, b = cuts[i], cuts[i + 1]
        m = m0 + i
        if i + 1 < len(cuts) - 1:
            g_b = np.log1p(rho if (m + 1) % 2 == 0 else -rho)
        else:
            g_b = np.log1p(rho * np.cos(b))
        # a level merely touched at an extremum (to rounding) does not fire
        u_b = (g_b - g0) / C
        tol = 1e-9 * max(1.0, abs(u_b))
        falling = m % 2 == 0
        if falling:
            top = int(np.ceil(u_b + tol))
            if top > k - 1:
                continue
            levels = np.arange(k - 1, top - 1, -1)
        else:
            top = int(np.floor(u_b - tol))
            if top < k + 1:
                continue
            levels = np.arange(k + 1, top + 1)
        target = g0 + levels * C
        c = np.clip((base * np.exp(levels * C) - 1.0) / rho, -1.0, 1.0)
        acos = np.arccos(c)
        psi = m * np.pi + acos if falling else (m + 1) * np.pi - acos
        # one Newton step where the slope is usable
        s = np.sin(psi)
        ok = np.abs(s) > 1e-6
        h = np.log1p(rho * np.cos(psi)) - target
        dh = -rho * s / (1.0 + rho * np.cos(psi))
        psi = np.where(ok, psi - np.where(ok, h / np.where(ok, dh, 1.0), 0.0), psi)
        psis.append(np.clip(psi, max(a, m * np.pi), min(b, (m + 1) * np.pi)))
        pols.append(np.full(len(levels), -1 if falling else 1, np.int8))
        k = int(levels[-1])

    if not psis:
        return empty
    psi = np.concatenate(psis)
    p = np.concatenate(pols)
    t = np.floor((psi - psi0) / (2.0 * trace.omega) / US).astype(np.int64)
    t = _strictly_increasing(np.maximum(t, 0))
    keep = t <= duration
    return t[keep], p[keep]


def _dead_time_pixel(t: np.ndarray, dead_time: float) -> np.ndarray:
    keep = np.zeros(len(t), bool)
    last = None
    for i, ti in enumerate(t.tolist()):
        if last is None or ti - last >= dead_time:
            keep[i] = True
            last = ti
    return keep


def apply_dead_time(events: np.ndarray, dead_time: float) -> np.ndarray:
    """Drop events closer than ``dead_time`` us to the last kept event of their pixel.

    ``events`` is an EVENT_DTYPE array sorted by t; the order of survivors is
    preserved.
    """
    events = np.asarray(events, dtype=EVENT_DTYPE)
    if dead_time <= 0 or len(events) == 0:
        return events
    pix = events["y"].astype(np.int64) << 16 | events["x"]
    order = np.argsort(pix, kind="stable")
    pix_sorted = pix[order]
    starts = np.flatnonzero(np.r_[True, pix_sorted[1:] != pix_sorted[:-1]])
    bounds = np.r_[starts, len(order)]
    keep = np.zeros(len(events), bool)
    t = events["t"]
    for s, e in zip(bounds[:-1], bounds[1:]):
        idx = order[s:e]
        keep[idx] = _dead_time_pixel(t[idx], dead_time)
    return events[keep]


def pixel_rng(seed: int, pixel: int) -> np.random.Generator:
    """Per-pixel generator derived from one seed; independent of processing order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(pixel),))))


def background_events(config: CameraConfig, duration: float, mask: np.ndarray | None = None) -> np.ndarray:
    """Poisson-distributed positive events at ``config.bg_rate`` on each pixel of ``mask``."""
    if config.bg_rate == 0:
        return np.empty(0, dtype=EVENT_DTYPE)
    if mask is None:
        mask = np.ones((config.height, config.width), bool)
    lam = config.bg_rate * duration * US
    chunks = []
    for y, x in zip(*np.nonzero(mask)):
        rng = pixel_rng(config.seed, y * config.width + x)
        n = rng.poisson(lam)
        if n == 0:
            continue
        t = np.unique(rng.integers(0, int(np.floor(duration)) + 1, size=n))
        chunks.append(make_events(t, x, y, 1))
    if not chunks:
        return np.empty(0, dtype=EVENT_DTYPE)
    return np.concatenate(chunks)


def inject_background_events(
    stream: EventStream, config: CameraConfig, duration: float, mask: np.ndarray | None = None
) -> EventStream:
    """Merge background events into ``stream``, preserving global time order.

    A background event landing on a microsecond already used by an event of
    the same pixel is discarded, keeping per-pixel timestamps strictly
    increasing.
    """
    bg = background_events(config, duration, mask)
    if len(bg) == 0:
        return stream
    ev = stream.events
    key_ev = (ev["y"].astype(np.int64) * stream.width + ev["x"]) * (1 << 40) + ev["t"]
    key_bg = (bg["y"].astype(np.int64) * stream.width + bg["x"]) * (1 << 40) + bg["t"]
    bg = bg[~np.isin(key_bg, key_ev)]
    return merge([ev, bg], stream.width, stream.height)


def temporal_contrast(trace: IntensityTrace, t_us) -> np.ndarray | float:
    """d ln I / dt in 1/s."""
    psi = trace.psi(t_us)
    rho = trace.state.rho
    return -2.0 * trace.omega * rho * np.sin(psi) / (1.0 + rho * np.cos(psi))
