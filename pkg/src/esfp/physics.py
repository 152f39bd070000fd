"""Closed-form polarization optics.

Intensity through a linear polarizer, Fresnel degree-of-polarization curves
for diffuse and specular reflection, their inversion to a zenith angle, and
the conversion between surface normals and (zenith, azimuth) pairs.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HALF_PI = 0.5 * np.pi
TABLE_SIZE = 1024
DEFAULT_REFRACTIVE_INDEX = 1.5


class Reflection(str, enum.Enum):
    DIFFUSE = "diffuse"
    SPECULAR = "specular"


class Branch(str, enum.Enum):
    LOW = "low"
    HIGH = "high"


class NoSolution(ValueError):
    """Raised when a degree of polarization lies above the Fresnel curve."""


@dataclass(frozen=True)
class Material:
    refractive_index: float = DEFAULT_REFRACTIVE_INDEX
    reflection: Reflection = Reflection.SPECULAR

    def __post_init__(self):
        if not self.refractive_index > 1.0:
            raise ValueError(f"refractive index must exceed 1, got {self.refractive_index}")
        object.__setattr__(self, "reflection", Reflection(self.reflection))

    def to_dict(self) -> dict:
        return {"refractive_index": float(self.refractive_index), "reflection": self.reflection.value}

    @classmethod
    def from_dict(cls, d: dict) -> "Material":
        return cls(float(d["refractive_index"]), Reflection(d["reflection"]))


@dataclass(frozen=True)
class PolarizationState:
    """Parameters of the transmitted sinusoid: I_un, rho and phi.

    Fields may be scalars or equally shaped arrays (a polarization map).
    ``phi`` is reduced modulo pi on construction.
    """

    i_un: float | np.ndarray
    rho: float | np.ndarray
    phi: float | np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        i_un = np.asarray(self.i_un, dtype=float)
        if np.any(rho < 0) or np.any(rho > 1):
            raise ValueError("rho must lie in [0, 1]")
        if np.any(i_un < 0):
            raise ValueError("i_un must be nonnegative")
        phi = np.mod(np.asarray(self.phi, dtype=float), np.pi)
        if np.ndim(self.phi) == 0:
            phi = float(phi)
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class SurfaceNormal:
    theta: float | np.ndarray
    alpha: float | np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if np.any(theta < 0) or np.any(theta > HALF_PI + 1e-12):
            raise ValueError("theta must lie in [0, pi/2]")
        alpha = np.mod(np.asarray(self.alpha, dtype=float), 2 * np.pi)
        if np.ndim(self.alpha) == 0:
            alpha = float(alpha)
        object.__setattr__(self, "alpha", alpha)

    @property
    def as_vector(self) -> np.ndarray:
        return normal_vector(self.theta, self.alpha)


def normal_vector(theta, alpha) -> np.ndarray:
    """(sin t cos a, sin t sin a, cos t), stacked on a trailing axis."""
    theta = np.asarray(theta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(alpha), st * np.sin(alpha), np.cos(theta)], axis=-1)


def angles_from_vector(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`normal_vector`; alpha in [0, 2pi)."""
    n = np.asarray(n, dtype=float)
    theta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
    alpha = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2 * np.pi)
    return theta, alpha


def intensity_at_angle(state: PolarizationState, phi_pol):
    return state.i_un * (1.0 + state.rho * np.cos(2.0 * (np.asarray(phi_pol) - state.phi)))


def rho_diffuse(theta, n):
    s2 = np.sin(theta) ** 2
    num = (n - 1.0 / n) ** 2 * s2
    den = 2.0 + 2.0 * n**2 - (n + 1.0 / n) ** 2 * s2 + 4.0 * np.cos(theta) * np.sqrt(n**2 - s2)
    return num / den


def rho_specular(theta, n):
    # Dielectric form with real index; peaks at exactly 1 where tan(t) sin(t) = n.
    t = np.tan(theta)
    s = np.sin(theta)
    return 2.0 * n * t * s / (t**2 * s**2 + n**2)


def _curve(reflection: Reflection):
    return rho_diffuse if reflection is Reflection.DIFFUSE else rho_specular


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0) or np.any(theta >= HALF_PI):
        raise ValueError("theta must lie in [0, pi/2)")
    return theta


def rho_from_zenith(theta, material: Material):
    theta = _check_theta(theta)
    rho = _curve(material.reflection)(theta, material.refractive_index)
    rho = np.clip(rho, 0.0, 1.0)
    return float(rho) if rho.ndim == 0 else rho


@dataclass(frozen=True)
class _CurveTable:
    theta: np.ndarray
    rho: np.ndarray
    theta_max: float
    rho_max: float


@functools.lru_cache(maxsize=64)
def _table(n: float, reflection: Reflection) -> _CurveTable:
    f = _curve(reflection)
    theta = np.linspace(0.0, HALF_PI, TABLE_SIZE)
    rho = f(theta, n)
    if reflection is Reflection.DIFFUSE:
        return _CurveTable(theta, rho, HALF_PI, float(rho[-1]))
    # golden-section refine around the tabulated peak
    i = int(np.argmax(rho))
    a, b = theta[max(i - 1, 0)], theta[min(i + 1, TABLE_SIZE - 1)]
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    while b - a > 1e-13:
        if f(c, n) > f(d, n):
            b, d = d, c
            c = b - g * (b - a)
        else:
            a, c = c, d
            d = a + g * (b - a)
    tm = 0.5 * (a + b)
    return _CurveTable(theta, rho, float(tm), float(min(f(tm, n), 1.0)))


def curve_maximum(material: Material) -> tuple[float, float]:
    """(theta, rho) at the top of the material's rho(theta) curve."""
    tab = _table(float(material.refractive_index), material.reflection)
    return tab.theta_max, tab.rho_max


def _bisect(f, target, lo, hi, increasing: bool, tol: float):
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        above = f(mid) > target
        if increasing:
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        else:
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


class ZenithSolution(NamedTuple):
    """Zenith roots for a degree of polarization.

    ``low`` is the root at or below the curve peak, ``high`` the root above it
    (NaN on the monotone diffuse curve). Saturated entries hold the peak angle
    in both fields.
    """

    low: np.ndarray
    high: np.ndarray
    saturated: np.ndarray


def zenith_from_rho(rho, material: Material, tol: float = 1e-11) -> ZenithSolution:
    rho = np.asarray(rho, dtype=float)
    if np.any(~np.isfinite(rho)) or np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("rho must lie in [0, 1]")
    n = float(material.refractive_index)
    tab = _table(n, material.reflection)
    f = functools.partial(_curve(material.reflection), n=n)
    saturated = rho >= tab.rho_max - 1e-12
    r = np.minimum(rho, tab.rho_max)

    # bracket from the table, then bisect
    k = int(np.searchsorted(tab.theta, tab.theta_max))
    th_up = np.append(tab.theta[:k], tab.theta_max)
    rho_up = np.append(tab.rho[:k], tab.rho_max)
    i = np.clip(np.searchsorted(rho_up, r), 1, len(rho_up) - 1)
    low = _bisect(f, r, th_up[i - 1], th_up[i], True, tol)
    low = np.where(rho == 0, 0.0, low)
    low = np.where(saturated, tab.theta_max, low)

    if material.reflection is Reflection.DIFFUSE:
        high = np.full_like(low, np.nan)
    else:
        # falling flank, reversed so that rho ascends
        th_dn = np.concatenate([[tab.theta_max], tab.theta[k:]])[::-1]
        rho_dn = np.concatenate([[tab.rho_max], tab.rho[k:]])[::-1]
        j = np.clip(np.searchsorted(rho_dn, r), 1, len(rho_dn) - 1)
        high = _bisect(f, r, th_dn[j], th_dn[j - 1], False, tol)
        high = np.where(rho == 0, HALF_PI, high)
        high = np.where(saturated, tab.theta_max, high)
    if low.ndim == 0:
        return ZenithSolution(float(low), float(high), bool(saturated))
    return ZenithSolution(low, high, saturated)


def azimuth_from_phi(phi, reflection: Reflection):
    """Canonical azimuth in [0, pi); the other candidate is this plus pi."""
    phi = np.asarray(phi, dtype=float)
    if Reflection(reflection) is Reflection.SPECULAR:
        return np.mod(phi - HALF_PI, np.pi)
    return np.mod(phi, np.pi)


def normal_from_polarization(
    state: PolarizationState,
    material: Material,
    branch: Branch = Branch.LOW,
    strict: bool = False,
) -> tuple[SurfaceNormal, SurfaceNormal]:
    """Canonical normal (alpha in [0, pi)) and its pi-shifted alternative.

    With ``strict`` a saturated degree of polarization raises NoSolution;
    otherwise the zenith at the curve maximum is used.
    """
    sol = zenith_from_rho(state.rho, material)
    if strict and np.any(sol.saturated):
        raise NoSolution("degree of polarization above the Fresnel curve maximum")
    if material.reflection is Reflection.SPECULAR and Branch(branch) is Branch.HIGH:
        theta = sol.high
    else:
        theta = sol.low
    theta = np.minimum(theta, HALF_PI)
    alpha = azimuth_from_phi(state.phi, material.reflection)
    if np.ndim(alpha) == 0:
        alpha = float(alpha)
    return SurfaceNormal(theta, alpha), SurfaceNormal(theta, np.asarray(alpha) + np.pi)


def polarization_from_normal(normal: SurfaceNormal, i_un, material: Material) -> PolarizationState:
    theta = np.asarray(normal.theta, dtype=float)
    rho = rho_from_zenith(np.minimum(theta, np.nextafter(HALF_PI, 0)), material)
    alpha = np.asarray(normal.alpha, dtype=float)
    if material.reflection is Reflection.SPECULAR:
        phi = np.mod(alpha + HALF_PI, np.pi)
    else:
        phi = np.mod(alpha, np.pi)
    if phi.ndim == 0:
        phi = float(phi)
    return PolarizationState(i_un, rho, phi)
