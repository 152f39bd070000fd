"""Physics-based surface normals from intensities at polarizer angles.

Works identically on event intensities and on frames. Four- and twelve-angle
grids (at any common offset) use the closed-form Stokes combinations; any
other angle set falls back to a linear least-squares sinusoid fit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .physics import (
    HALF_PI,
    Branch,
    Material,
    Reflection,
    azimuth_from_phi,
    normal_vector,
    zenith_from_rho,
)
from .reconstruction import AngleSampledIntensities, default_angle_grid
from .scene import NormalMap


class Disambiguation(str, enum.Enum):
    NONE = "none"
    ORACLE = "oracle"
    CONVEX = "convex"


@dataclass
class StokesEstimate:
    """Sinusoid parameters recovered per pixel.

    ``i_un_rel`` is on the I_max + I_min scale. ``quality`` is the RMS
    residual of the samples against the fitted sinusoid, relative to its mean;
    ``defined`` is False where all samples were equal and phi is meaningless.
    """

    phi: np.ndarray
    rho: np.ndarray
    i_un_rel: np.ndarray
    quality: np.ndarray
    overflow: np.ndarray
    defined: np.ndarray


def _finish(q, u, norm, intens, angles, offset=0.0, mag=None) -> StokesEstimate:
    if mag is None:
        mag = np.hypot(q, u)
    defined = np.hypot(q, u) > 0
    phi = np.where(defined, np.mod(0.5 * np.arctan2(u, q) + offset, np.pi), 0.0)
    rho_raw = np.where(defined, mag / norm, 0.0)
    overflow = rho_raw > 1.0
    rho = np.clip(rho_raw, 0.0, 1.0)
    mean = 0.5 * norm
    model = mean * (1.0 + rho * np.cos(2.0 * (angles.reshape((-1,) + (1,) * rho.ndim) - phi)))
    quality = np.sqrt(np.mean((intens - model) ** 2, axis=0)) / mean
    return StokesEstimate(phi, rho, norm, quality, overflow, defined)


def stokes_from_4_angles(intensities, offset: float = 0.0) -> StokesEstimate:
    """Samples at offset + {0, pi/4, pi/2, 3pi/4}, stacked on axis 0."""
    i = np.asarray(intensities, dtype=float)
    if i.shape[0] != 4:
        raise ValueError("expected 4 samples on axis 0")
    if np.any(i <= 0):
        raise ValueError("intensities must be positive")
    norm = 0.5 * (i[0] + i[1] + i[2] + i[3])
    q = i[0] - i[2]
    u = i[1] - i[3]
    return _finish(q, u, norm, i, offset + np.arange(4) * np.pi / 4, offset)


def stokes_from_12_angles(intensities, offset: float = 0.0) -> StokesEstimate:
    """Samples at offset + k pi/12, k = 0..11, stacked on axis 0.

    Three (Q, U) pairs start at 0, pi/12 and pi/6. Their phasors exp(2i phi_k)
    are combined, each rotated back by its start angle and weighted by its
    magnitude; rho is the RMS pair magnitude over the mean sample sum.
    """
    i = np.asarray(intensities, dtype=float)
    if i.shape[0] != 12:
        raise ValueError("expected 12 samples on axis 0")
    if np.any(i <= 0):
        raise ValueError("intensities must be positive")
    norm = i.sum(axis=0) / 6.0
    re = np.zeros(i.shape[1:])
    im = np.zeros(i.shape[1:])
    power = np.zeros(i.shape[1:])
    for k in range(3):
        q = i[k] - i[k + 6]
        u = i[k + 3] - i[k + 9]
        # phasor of 2 (phi - k pi/12) rotated by 2 k pi/12
        c, s = np.cos(k * np.pi / 6), np.sin(k * np.pi / 6)
        re += q * c - u * s
        im += q * s + u * c
        power += q * q + u * u
    return _finish(re, im, norm, i, offset + default_angle_grid(12), offset, mag=np.sqrt(power / 3.0))


def stokes_least_squares(intensities, angles) -> StokesEstimate:
    """Fit c0 + c1 cos 2a + c2 sin 2a to samples at arbitrary angles."""
    i = np.asarray(intensities, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if len(angles) < 3:
        raise ValueError("at least 3 angles are needed")
    design = np.stack([np.ones_like(angles), np.cos(2 * angles), np.sin(2 * angles)], axis=1)
    coef, *_ = np.linalg.lstsq(design, i.reshape(len(angles), -1), rcond=None)
    c0, c1, c2 = (c.reshape(i.shape[1:]) for c in coef)
    # rescale to the (Q, U, I_max + I_min) convention of the closed forms
    return _finish(2.0 * c1, 2.0 * c2, 2.0 * c0, i, angles)


def _grid_offset(angles: np.ndarray, n: int) -> float | None:
    if len(angles) != n:
        return None
    expected = np.mod(angles[0] + np.arange(n) * np.pi / n, np.pi)
    if np.allclose(np.mod(angles, np.pi), expected, atol=1e-9, rtol=0):
        return float(angles[0])
    return None


def estimate_stokes(samples: AngleSampledIntensities) -> StokesEstimate:
    values = np.where(samples.valid_mask, samples.values, 1.0)
    for n, fn in ((4, stokes_from_4_angles), (12, stokes_from_12_angles)):
        off = _grid_offset(samples.angles, n)
        if off is not None:
            return fn(values, off)
    return stokes_least_squares(values, samples.angles)


@dataclass
class NormalEstimate:
    normal_map: NormalMap
    stokes: StokesEstimate
    saturated: np.ndarray


def estimate_normals(
    samples: AngleSampledIntensities,
    material: Material | None = None,
    disambiguation: Disambiguation | str = Disambiguation.NONE,
    gt: NormalMap | None = None,
    center: tuple[float, float] | None = None,
    branch: Branch | str = Branch.LOW,
    quality_cutoff: float | None = None,
    details: bool = False,
):
    """Per-pixel normals from angle-sampled intensities.

    Disambiguation policies:
      none   -- keep the canonical azimuth in [0, pi); map flagged ambiguous
      oracle -- choose, among zenith roots and both azimuths, the candidate
                closest to ``gt``
      convex -- choose the azimuth pointing away from ``center`` (x, y)

    Returns a NormalMap, or a NormalEstimate when ``details`` is set.
    """
    material = material or Material()
    disambiguation = Disambiguation(disambiguation)
    branch = Branch(branch)
    h, w = samples.valid_mask.shape
    st = estimate_stokes(samples)
    valid = samples.valid_mask.copy()
    if quality_cutoff is not None:
        valid &= st.quality <= quality_cutoff
    sol = zenith_from_rho(st.rho, material)
    alpha = azimuth_from_phi(st.phi, material.reflection)

    if material.reflection is Reflection.SPECULAR:
        roots = [sol.low, sol.high]
        theta = sol.high if branch is Branch.HIGH else sol.low
    else:
        roots = [sol.low]
        theta = sol.low
    theta = np.minimum(theta, HALF_PI)

    if disambiguation is Disambiguation.ORACLE:
        if gt is None:
            raise ValueError("oracle disambiguation needs a ground-truth normal map")
        best = None
        best_dot = np.full((h, w), -np.inf)
        for th in roots:
            for a in (alpha, alpha + np.pi):
                cand = normal_vector(np.minimum(th, HALF_PI), a)
                dot = np.sum(cand * gt.normals, axis=-1)
                better = dot > best_dot
                best = cand if best is None else np.where(better[..., None], cand, best)
                best_dot = np.where(better, dot, best_dot)
        normals = best
        ambiguous = False
    elif disambiguation is Disambiguation.CONVEX:
        if center is None:
            center = ((w - 1) / 2.0, (h - 1) / 2.0)
        y, x = np.mgrid[0:h, 0:w].astype(float)
        outward = np.cos(alpha) * (x - center[0]) + np.sin(alpha) * (y - center[1])
        normals = normal_vector(theta, np.where(outward < 0, alpha + np.pi, alpha))
        ambiguous = False
    else:
        normals = normal_vector(theta, alpha)
        ambiguous = True

    normals = np.where(valid[..., None], normals, 0.0)
    nmap = NormalMap(normals, valid, ambiguous)
    if details:
        return NormalEstimate(nmap, st, np.asarray(sol.saturated) & valid)
    return nmap


def estimate_normals_from_images(
    images,
    material: Material | None = None,
    disambiguation: Disambiguation | str = Disambiguation.NONE,
    angles=None,
    mask=None,
    **kwargs,
):
    """Same estimator applied to frames; 4 or 12 frames use the default grids."""
    images = np.asarray(images, dtype=float)
    if angles is None:
        angles = default_angle_grid(images.shape[0])
    if mask is None:
        mask = np.ones(images.shape[1:], bool)
    samples = AngleSampledIntensities(angles, images, mask)
    return estimate_normals(samples, material, disambiguation, **kwargs)
