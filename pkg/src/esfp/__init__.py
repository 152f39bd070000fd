"""Event-based shape from polarization: simulation, reconstruction, estimation."""

__version__ = "0.1.0"

from .estimator import estimate_normals, estimate_normals_from_images, stokes_from_4_angles, stokes_from_12_angles
from .evaluation import angular_error, evaluate
from .events import CameraConfig, EventStream, IntensityTrace, generate_events_ideal
from .physics import Material, PolarizationState, Reflection, SurfaceNormal
from .reconstruction import default_angle_grid, reconstruct_intensities
from .scene import NormalMap, RotationProfile, Scene, fill_rate, make_analytic_scene, simulate

__all__ = [
    "CameraConfig",
    "EventStream",
    "IntensityTrace",
    "Material",
    "NormalMap",
    "PolarizationState",
    "Reflection",
    "RotationProfile",
    "Scene",
    "SurfaceNormal",
    "angular_error",
    "default_angle_grid",
    "estimate_normals",
    "estimate_normals_from_images",
    "evaluate",
    "fill_rate",
    "generate_events_ideal",
    "make_analytic_scene",
    "reconstruct_intensities",
    "simulate",
    "stokes_from_12_angles",
    "stokes_from_4_angles",
]
