"""Analytic scenes and the full-frame forward model.

A scene (normal map, unpolarized intensity, material, object mask) is turned
into per-pixel polarization states, intensity traces behind the rotating
polarizer, and finally an event stream with its ground truth.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import events as ev
from .events import CameraConfig, DegenerateTrace, EventStream, IntensityTrace
from .physics import Material, PolarizationState, SurfaceNormal, angles_from_vector, normal_vector, polarization_from_normal

logger = logging.getLogger(__name__)

DEFAULT_RPM = 150.0


def rpm_to_omega(rpm: float) -> float:
    return rpm * 2.0 * np.pi / 60.0


class SceneKind(str, enum.Enum):
    SPHERE = "sphere"
    PLANE = "plane"
    TILTED_PLANE = "tilted_plane"
    TWO_PERPENDICULAR_PLANES = "two_planes"


@dataclass
class NormalMap:
    """Per-pixel unit normals (H, W, 3) with a validity mask.

    Normals use image axes: x along columns, y along rows (downwards), z
    towards the camera. Invalid pixels hold the zero vector.
    """

    normals: np.ndarray
    valid_mask: np.ndarray
    azimuth_ambiguous: bool = False

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.normals.shape[:2] != self.valid_mask.shape or self.normals.shape[-1] != 3:
            raise ValueError("normals must be (H, W, 3) matching the mask")

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid_mask.shape

    @classmethod
    def invalid(cls, height: int, width: int, azimuth_ambiguous: bool = False) -> "NormalMap":
        return cls(np.zeros((height, width, 3)), np.zeros((height, width), bool), azimuth_ambiguous)


@dataclass
class Scene:
    normals: NormalMap
    i_un: np.ndarray
    material: Material
    mask: np.ndarray

    def __post_init__(self):
        self.i_un = np.asarray(self.i_un, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if np.any(self.i_un[self.mask] <= 0):
            raise ValueError("i_un must be positive on the mask")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    def scaled(self, k: float) -> "Scene":
        """Same scene under k times the illumination."""
        return Scene(self.normals, self.i_un * k, self.material, self.mask)

    def polarization(self) -> PolarizationState:
        theta, alpha = angles_from_vector(self.normals.normals)
        theta = np.where(self.mask, theta, 0.0)
        return polarization_from_normal(SurfaceNormal(theta, np.where(self.mask, alpha, 0.0)), self.i_un, self.material)


@dataclass(frozen=True)
class RotationProfile:
    omega: float = rpm_to_omega(DEFAULT_RPM)
    revolutions: int = 1
    phase0: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if int(self.revolutions) < 1:
            raise ValueError("revolutions must be a positive integer")

    @classmethod
    def from_rpm(cls, rpm: float, revolutions: int = 1, phase0: float = 0.0) -> "RotationProfile":
        return cls(rpm_to_omega(rpm), revolutions, phase0)

    @property
    def period_us(self) -> float:
        """Duration of one polarizer revolution."""
        return 2.0 * np.pi / self.omega * 1e6

    @property
    def duration_us(self) -> float:
        return self.revolutions * self.period_us

    def time_at_angle(self, angle, revolution: int = 0):
        """First time (us) within ``revolution`` the polarizer sits at ``angle`` mod pi."""
        t0 = revolution * self.period_us
        phase = self.phase0 + self.omega * t0 * 1e-6
        return t0 + np.mod(np.asarray(angle) - phase, np.pi) / self.omega * 1e6

    def to_dict(self) -> dict:
        return {"omega": float(self.omega), "revolutions": int(self.revolutions), "phase0": float(self.phase0)}

    @classmethod
    def from_dict(cls, d: dict) -> "RotationProfile":
        return cls(float(d["omega"]), int(d["revolutions"]), float(d["phase0"]))


@dataclass
class GroundTruthBundle:
    scene: Scene
    polarization: PolarizationState
    events: EventStream
    config: CameraConfig
    rotation: RotationProfile
    dropped: int = 0
    metadata: dict = field(default_factory=dict)


def make_analytic_scene(
    kind: SceneKind | str,
    width: int = 64,
    height: int = 64,
    material: Material | None = None,
    i_un_level: float = 1.0,
    zenith: float | None = None,
    azimuth: float = 0.0,
) -> Scene:
    """Build a scene with closed-form normals.

    ``zenith``/``azimuth`` set the plane orientations (Plane defaults to a
    fronto-parallel surface, the tilted and perpendicular variants to pi/4).
    For two perpendicular planes the left half has azimuth ``azimuth`` and
    the right half ``azimuth + pi/2``.
    """
    kind = SceneKind(kind)
    if width < 8 or height < 8:
        raise ValueError("scene must be at least 8x8")
    material = material or Material()
    mask = np.ones((height, width), bool)
    theta = np.zeros((height, width))
    alpha = np.full((height, width), float(azimuth))

    if kind is SceneKind.SPHERE:
        cx, cy = width // 2, height // 2
        radius = (min(width, height) - 1) / 2.0
        y, x = np.mgrid[0:height, 0:width].astype(float)
        dx, dy = x - cx, y - cy
        r = np.hypot(dx, dy)
        mask = r < radius
        theta = np.where(mask, np.arcsin(np.clip(r / radius, 0.0, 1.0)), 0.0)
        alpha = np.arctan2(dy, dx)
    elif kind is SceneKind.PLANE:
        theta[:] = 0.0 if zenith is None else zenith
    elif kind is SceneKind.TILTED_PLANE:
        theta[:] = np.pi / 4 if zenith is None else zenith
    else:
        theta[:] = np.pi / 4 if zenith is None else zenith
        alpha[:, width // 2 :] += np.pi / 2

    normals = normal_vector(theta, alpha)
    normals[~mask] = 0.0
    i_un = np.where(mask, float(i_un_level), 0.0)
    return Scene(NormalMap(normals, mask), i_un, material, mask)


def simulate(scene: Scene, rotation: RotationProfile, config: CameraConfig) -> GroundTruthBundle:
    """Run every masked pixel through the event model and merge the streams.

    Order of effects per pixel: ideal events, dead-time filter, then
    background events; pixels whose trace is degenerate are dropped from the
    mask and counted.
    """
    if (config.height, config.width) != scene.mask.shape:
        config = CameraConfig(
            config.contrast_threshold, config.bg_rate, config.dead_time, scene.width, scene.height, config.seed
        )
    pol = scene.polarization()
    duration = rotation.duration_us
    mask = scene.mask.copy()
    dropped = 0
    chunks = []
    i_un = np.broadcast_to(pol.i_un, mask.shape)
    for y, x in zip(*np.nonzero(mask)):
        state = PolarizationState(float(i_un[y, x]), float(pol.rho[y, x]), float(pol.phi[y, x]))
        try:
            t, p = ev.generate_events_ideal(IntensityTrace(state, rotation.omega, rotation.phase0), config, duration)
        except DegenerateTrace:
            mask[y, x] = False
            dropped += 1
            continue
        if len(t):
            chunks.append(ev.make_events(t, x, y, p))
    if dropped:
        logger.warning("dropped %d pixels with degenerate intensity traces", dropped)
    stream = ev.merge(chunks, scene.width, scene.height)
    if config.dead_time > 0:
        stream = EventStream(ev.apply_dead_time(stream.events, config.dead_time), scene.width, scene.height)
    if config.bg_rate > 0:
        stream = ev.inject_background_events(stream, config, duration, mask)
    if dropped:
        scene = Scene(scene.normals, scene.i_un, scene.material, mask)
    return GroundTruthBundle(scene, pol, stream, config, rotation, dropped)


def fill_rate(bundle: GroundTruthBundle) -> float:
    """Fraction of masked pixels that emitted at least one event."""
    mask = bundle.scene.mask
    n = int(mask.sum())
    if n == 0:
        return 0.0
    fired = bundle.events.counts() > 0
    return float((fired & mask).sum() / n)
