"""Normal-map metrics: angular error, MAE, accuracy under thresholds, fill rate."""

from __future__ import annotations

import enum
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .scene import NormalMap

THRESHOLDS = (11.25, 22.5, 30.0)


class EvalDomain(str, enum.Enum):
    VALID_ONLY = "valid_only"
    FULL_MASK = "full_mask"


def angular_error(n1, n2) -> np.ndarray | float:
    """Angle in degrees between unit vectors on the trailing axis."""
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    norms = [np.linalg.norm(v, axis=-1, keepdims=True) for v in (n1, n2)]
    if any(np.any(np.abs(nv - 1.0) > 1e-6) for nv in norms):
        warnings.warn("non-unit normals were normalized before comparison", RuntimeWarning, stacklevel=2)
        n1 = n1 / np.where(norms[0] > 0, norms[0], 1.0)
        n2 = n2 / np.where(norms[1] > 0, norms[1], 1.0)
    # atan2 form stays accurate near 0 and 180 degrees, where arccos loses digits
    dot = np.sum(n1 * n2, axis=-1)
    cross = np.linalg.norm(np.cross(n1, n2), axis=-1)
    err = np.degrees(np.arctan2(cross, dot))
    return float(err) if np.ndim(err) == 0 else err


@dataclass
class EvaluationReport:
    mae_deg: float
    acc_11_25: float
    acc_22_5: float
    acc_30: float
    fill_rate: float
    n_pixels_evaluated: int
    eval_domain: str
    oracle_ambiguity: bool = False
    per_pixel_error_map: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("per_pixel_error_map")
        return d


def evaluate(
    pred: NormalMap,
    gt: NormalMap,
    eval_domain: EvalDomain | str = EvalDomain.VALID_ONLY,
    oracle_ambiguity: bool = False,
    region: np.ndarray | None = None,
) -> EvaluationReport:
    """Score ``pred`` against ``gt`` over the object mask of ``gt``.

    ``valid_only`` restricts to pixels where ``pred`` is valid; ``full_mask``
    scores invalid predictions as 180 degrees. ``region`` further restricts
    the domain. With ``oracle_ambiguity`` and an ambiguous prediction, each
    pixel is scored by the better of its two azimuth candidates.
    """
    eval_domain = EvalDomain(eval_domain)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    domain = gt.valid_mask.copy()
    if region is not None:
        domain &= np.asarray(region, dtype=bool)
    object_pixels = int(domain.sum())
    scored = domain & pred.valid_mask
    fill = float(scored.sum() / object_pixels) if object_pixels else 0.0
    if eval_domain is EvalDomain.VALID_ONLY:
        domain = scored
    if not np.any(domain):
        raise ValueError("empty evaluation domain")

    err = np.full(pred.shape, 180.0)
    err[scored] = angular_error(pred.normals[scored], gt.normals[scored])
    if oracle_ambiguity and pred.azimuth_ambiguous:
        flipped = pred.normals[scored] * np.array([-1.0, -1.0, 1.0])
        err[scored] = np.minimum(err[scored], angular_error(flipped, gt.normals[scored]))
    vals = err[domain]
    acc = [float(np.mean(vals < t)) for t in THRESHOLDS]
    err_map = np.where(domain, err, np.nan)
    return EvaluationReport(
        mae_deg=float(np.mean(vals)),
        acc_11_25=acc[0],
        acc_22_5=acc[1],
        acc_30=acc[2],
        fill_rate=fill,
        n_pixels_evaluated=int(vals.size),
        eval_domain=eval_domain.value,
        oracle_ambiguity=bool(oracle_ambiguity and pred.azimuth_ambiguous),
        per_pixel_error_map=err_map,
    )
