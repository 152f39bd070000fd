"""Command-line interface: simulate, estimate, evaluate, represent.

Exit codes: 0 success, 2 invalid usage or configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .estimator import Disambiguation, estimate_normals
from .evaluation import EvalDomain, evaluate
from .events import CameraConfig, EventStream
from .physics import Branch, Material, Reflection
from .reconstruction import default_angle_grid, reconstruct_intensities
from .representations import DEFAULT_BINS, build_cvgr, build_cvgr_i, build_voxel_grid, check_prefix_identity
from .scene import DEFAULT_RPM, RotationProfile, SceneKind, fill_rate, make_analytic_scene, simulate

log = logging.getLogger("esfp")

EXIT_USAGE = 2
EXIT_IO = 3

ANGLE_SETS = {4: np.arange(4) * np.pi / 4, 12: default_angle_grid(12)}


class UsageError(ValueError):
    pass


def _add_material(p: argparse.ArgumentParser, default_reflection: str | None = "specular") -> None:
    p.add_argument("--material", choices=[r.value for r in Reflection], default=default_reflection)
    p.add_argument("--n", type=float, default=None, help="refractive index (default 1.5)")


def _events_meta(path: Path) -> dict:
    side = fio.sidecar(path)
    return fio.read_json(side) if side.exists() else {}


def _rotation(args, meta: dict) -> RotationProfile:
    if args.rpm is not None:
        return RotationProfile.from_rpm(args.rpm, args.revolutions or 1, args.phase0 or 0.0)
    if "rotation" in meta:
        rot = RotationProfile.from_dict(meta["rotation"])
        if args.revolutions is not None or args.phase0 is not None:
            rot = RotationProfile(rot.omega, args.revolutions or rot.revolutions,
                                  rot.phase0 if args.phase0 is None else args.phase0)
        return rot
    return RotationProfile.from_rpm(DEFAULT_RPM, args.revolutions or 1, args.phase0 or 0.0)


def _contrast(args, meta: dict) -> float:
    if args.contrast is not None:
        return args.contrast
    return float(meta.get("camera", {}).get("contrast_threshold", 0.05))


def _add_stream_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--contrast", type=float, default=None, help="contrast threshold (default: from sidecar, else 0.05)")
    p.add_argument("--rpm", type=float, default=None, help="polarizer speed (default: from sidecar, else 150)")
    p.add_argument("--revolutions", type=int, default=None)
    p.add_argument("--phase0", type=float, default=None)


def cmd_simulate(args) -> int:
    width = args.width or args.size
    height = args.height or args.size
    material = Material(args.n or 1.5, Reflection(args.material))
    scene = make_analytic_scene(args.scene, width, height, material, args.i_un, args.zenith, args.azimuth)
    rotation = RotationProfile.from_rpm(args.rpm, args.revolutions, args.phase0)
    config = CameraConfig(args.contrast, args.bg_rate, args.dead_time_us, width, height, args.seed)
    bundle = simulate(scene, rotation, config)

    out = Path(args.out)
    ext = ".csv" if args.format == "csv" else ".esfp"
    events_path = out / f"events{ext}"
    fio.write_events(events_path, bundle.events)
    meta = {
        "camera": config.to_dict(),
        "rotation": rotation.to_dict(),
        "rpm": float(args.rpm),
        "duration_us": float(rotation.duration_us),
        "material": material.to_dict(),
        "scene": {"kind": SceneKind(args.scene).value, "i_un": args.i_un, "zenith": args.zenith, "azimuth": args.azimuth},
        "n_events": len(bundle.events),
        "dropped_pixels": int(bundle.dropped),
        "version": __version__,
    }
    fio.write_json(fio.sidecar(events_path), meta)
    mask = bundle.scene.mask
    common = {"material": material.to_dict(), "seed": int(args.seed)}
    fio.write_normal_map(out / "gt_normals.pfm", bundle.scene.normals, **common)
    fio.write_map(out / "rho.pfm", np.where(mask, bundle.polarization.rho, 0.0), mask, quantity="rho", **common)
    fio.write_map(out / "phi.pfm", np.where(mask, bundle.polarization.phi, 0.0), mask, quantity="phi", **common)
    fio.write_map(out / "i_un.pfm", np.broadcast_to(bundle.scene.i_un, mask.shape), mask, quantity="i_un", **common)
    fr = fill_rate(bundle)
    print(f"events: {len(bundle.events)}")
    print(f"fill_rate: {fr:.6f}")
    return 0


def cmd_estimate(args) -> int:
    events_path = Path(args.events)
    stream = fio.read_events(events_path)
    meta = _events_meta(events_path)
    rotation = _rotation(args, meta)
    contrast = _contrast(args, meta)
    mat_meta = meta.get("material", {})
    material = Material(
        args.n or mat_meta.get("refractive_index", 1.5),
        Reflection(args.material or mat_meta.get("reflection", "specular")),
    )
    gt = None
    if args.disambiguate == "oracle":
        if not args.gt:
            raise UsageError("--disambiguate oracle requires --gt")
        gt, _ = fio.read_normal_map(args.gt)
        if gt.shape != (stream.height, stream.width):
            raise UsageError("ground-truth map does not match the sensor size")
    center = tuple(float(v) for v in args.center.split(",")) if args.center else None
    angles = ANGLE_SETS[args.angles]

    samples = reconstruct_intensities(stream, rotation, contrast, angles, args.revolution)
    if len(stream) == 0:
        log.warning("event file is empty; every pixel is invalid")
    est = estimate_normals(
        samples, material, args.disambiguate, gt=gt, center=center, branch=args.branch,
        quality_cutoff=args.quality_cutoff, details=True,
    )
    nmap = est.normal_map
    out = Path(args.out)
    info = {
        "angles": int(args.angles),
        "disambiguation": args.disambiguate,
        "branch": Branch(args.branch).value,
        "material": material.to_dict(),
        "contrast_threshold": float(contrast),
        "rotation": rotation.to_dict(),
        "revolution": int(args.revolution),
        "source_events": events_path.name,
    }
    fio.write_normal_map(out / "normals.pfm", nmap, **info)
    valid = nmap.valid_mask
    fio.write_map(out / "quality.pfm", np.where(valid, est.stokes.quality, 0.0), valid, quantity="quality", **info)
    fio.write_map(out / "rho.pfm", np.where(valid, est.stokes.rho, 0.0), valid, quantity="rho", **info)
    fio.write_map(out / "phi.pfm", np.where(valid, est.stokes.phi, 0.0), valid, quantity="phi", **info)
    print(f"valid_pixels: {int(valid.sum())}")
    print(f"saturated_pixels: {int(est.saturated.sum())}")
    print(f"overflow_pixels: {int((est.stokes.overflow & valid).sum())}")
    return 0


def cmd_evaluate(args) -> int:
    pred, _ = fio.read_normal_map(args.pred)
    gt, _ = fio.read_normal_map(args.gt)
    if pred.shape != gt.shape:
        raise UsageError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    region = None
    if args.gt_rho:
        rho, _, _ = fio.read_map(args.gt_rho)
        region = rho > args.min_rho
    report = evaluate(pred, gt, args.eval_domain, args.oracle_ambiguity, region)
    d = report.to_dict()
    text = fio.dumps_json(d)
    out = Path(args.out) if args.out else None
    if out is not None:
        fio.atomic_write(out / "report.json", text.encode())
        rows = ["metric,value"] + [f"{k},{v}" for k, v in sorted(d.items())]
        fio.atomic_write(out / "report.csv", ("\n".join(rows) + "\n").encode())
        err = report.per_pixel_error_map
        fio.write_map(out / "error_map.pfm", np.nan_to_num(err, nan=0.0), np.isfinite(err), quantity="angular_error_deg")
        if not args.no_png:
            from .plotting import render_comparison, render_error_map, render_normal_map

            render_error_map(out / "error_map.png", err, vmax=args.vmax, title=f"MAE {report.mae_deg:.3f} deg")
            render_normal_map(out / "pred_normals.png", pred.normals, pred.valid_mask)
            render_normal_map(out / "gt_normals.png", gt.normals, gt.valid_mask)
            render_comparison(out / "comparison.png", pred, gt, err, vmax=args.vmax)
    sys.stdout.write(text)
    return 0


def cmd_represent(args) -> int:
    events_path = Path(args.events)
    stream: EventStream = fio.read_events(events_path)
    meta = _events_meta(events_path)
    contrast = _contrast(args, meta)
    if args.window:
        window = tuple(int(v) for v in args.window.split(","))
    elif "duration_us" in meta:
        window = (0, int(np.floor(meta["duration_us"])))
    else:
        window = None
    if args.kind == "cvgri" and not args.frame:
        raise UsageError("--kind cvgri requires --frame")
    if args.kind == "voxel":
        tensor = build_voxel_grid(stream, window, args.bins)
    elif args.kind == "cvgr":
        tensor = build_cvgr(stream, window, args.bins, contrast)
    else:
        frame, _, _ = fio.read_map(args.frame)
        tensor = build_cvgr_i(stream, frame, window, args.bins, contrast, args.log_frame)

    if args.check:
        voxel = build_voxel_grid(stream, tensor.window, args.bins)
        ok = check_prefix_identity(voxel, build_cvgr(stream, tensor.window, args.bins, contrast))
        print(f"check: {'ok' if ok else 'FAILED'}")
        if not ok:
            return 1

    out = Path(args.out)
    for b in range(tensor.bins):
        fio.write_pfm(out / f"bin_{b:02d}.pfm", tensor.data[b].astype(np.float32))
    md = tensor.metadata()
    md["files"] = [f"bin_{b:02d}.pfm" for b in range(tensor.bins)]
    md["source_events"] = events_path.name
    fio.write_json(out / "tensor.json", md)
    print(f"kind: {md['kind']}")
    print(f"bins: {md['bins']}")
    print(f"window_us: {md['window'][0]},{md['window'][1]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esfp", description="Event-based shape from polarization toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate events of an analytic scene")
    p.add_argument("--scene", choices=[k.value for k in SceneKind], default="sphere")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    _add_material(p)
    p.add_argument("--i-un", type=float, default=1.0, help="unpolarized intensity level")
    p.add_argument("--zenith", type=float, default=None, help="plane zenith angle, radians")
    p.add_argument("--azimuth", type=float, default=0.0, help="plane azimuth angle, radians")
    p.add_argument("--rpm", type=float, default=DEFAULT_RPM)
    p.add_argument("--revolutions", type=int, default=1)
    p.add_argument("--phase0", type=float, default=0.0)
    p.add_argument("--contrast", type=float, default=0.05)
    p.add_argument("--bg-rate", type=float, default=0.0, help="background events per pixel per second")
    p.add_argument("--dead-time-us", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["bin", "csv"], default="bin")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate normals from an event file")
    p.add_argument("events")
    p.add_argument("--out", required=True)
    p.add_argument("--angles", type=int, choices=[4, 12], default=12)
    p.add_argument("--disambiguate", choices=[d.value for d in Disambiguation], default="none")
    p.add_argument("--gt", help="ground-truth normal map (PFM) for oracle disambiguation")
    p.add_argument("--center", help="convexity center 'x,y' in pixels")
    p.add_argument("--branch", choices=[b.value for b in Branch], default="low")
    p.add_argument("--revolution", type=int, default=-1, help="revolution to sample (default: last)")
    p.add_argument("--quality-cutoff", type=float, default=None)
    _add_material(p, default_reflection=None)
    _add_stream_overrides(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="compare a predicted normal map with ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--out", default=None)
    p.add_argument("--eval-domain", choices=[d.value for d in EvalDomain], default="valid_only")
    p.add_argument("--oracle-ambiguity", action="store_true",
                   help="score ambiguous azimuths by the better of both candidates")
    p.add_argument("--gt-rho", default=None, help="ground-truth rho map restricting the domain")
    p.add_argument("--min-rho", type=float, default=0.0)
    p.add_argument("--vmax", type=float, default=30.0, help="upper end of the error color scale")
    p.add_argument("--no-png", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("represent", help="build voxel / CVGR / CVGR-I tensors")
    p.add_argument("events")
    p.add_argument("--kind", choices=["voxel", "cvgr", "cvgri"], default="cvgr")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--frame", help="intensity frame (PFM) for cvgri")
    p.add_argument("--log-frame", action="store_true", help="add the log of the frame instead of the frame")
    p.add_argument("--window", help="'t0,t1' in microseconds")
    p.add_argument("--contrast", type=float, default=None)
    p.add_argument("--check", action="store_true", help="verify the voxel/CVGR prefix-sum identity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_represent)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except fio.FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
