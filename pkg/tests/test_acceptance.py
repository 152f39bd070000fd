"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdicts are also
listed in the "acceptance criteria" section of the pytest summary.
"""

import time

import numpy as np
import pytest

from esfp import io as fio
from esfp.cli import main
from esfp.estimator import estimate_normals, estimate_normals_from_images
from esfp.evaluation import angular_error, evaluate
from esfp.events import CameraConfig, apply_dead_time, background_events, make_events, merge
from esfp.physics import Material, Reflection, curve_maximum, normal_vector, rho_from_zenith, zenith_from_rho
from esfp.reconstruction import default_angle_grid, reconstruct_intensities, sample_times
from esfp.representations import build_cvgr, build_cvgr_i, build_voxel_grid, cvgr_from_voxel
from esfp.scene import NormalMap, RotationProfile, make_analytic_scene, simulate

from conftest import ACCEPTANCE_LINES
from oracles import sinusoid_samples

SPECULAR = Material(1.5, Reflection.SPECULAR)


def verdict(number, name, ok, detail):
    line = f"criterion {number:02d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def sphere_cli(tmp_path_factory):
    """64x64 specular sphere, ideal events, C = 0.01, one revolution at 150 RPM."""
    out = tmp_path_factory.mktemp("acceptance")
    start = time.process_time()
    assert main(["simulate", "--scene", "sphere", "--size", "64", "--material", "specular", "--n", "1.5",
                 "--contrast", "0.01", "--rpm", "150", "--revolutions", "1", "--out", str(out / "sim")]) == 0
    assert main(["estimate", str(out / "sim" / "events.esfp"), "--angles", "12", "--disambiguate", "oracle",
                 "--gt", str(out / "sim" / "gt_normals.pfm"), "--out", str(out / "est")]) == 0
    elapsed = time.process_time() - start
    return out, elapsed


def test_criterion_01_round_trip_fidelity(sphere_cli, capsys):
    out, elapsed = sphere_cli
    pred, _ = fio.read_normal_map(out / "est" / "normals.pfm")
    gt, _ = fio.read_normal_map(out / "sim" / "gt_normals.pfm")
    rho, _, _ = fio.read_map(out / "sim" / "rho.pfm")
    report = evaluate(pred, gt, region=rho > 0.1)
    capsys.readouterr()
    ok = report.mae_deg <= 2.0 and elapsed < 10.0
    verdict(1, "round-trip fidelity", ok,
            f"MAE {report.mae_deg:.4f} deg over {report.n_pixels_evaluated} px (<= 2.0), cpu {elapsed:.2f} s (< 10)")


def test_criterion_02_quantization_bound(sphere_cli):
    out, _ = sphere_cli
    stream = fio.read_events(out / "sim" / "events.esfp")
    # float64 ground truth straight from the scene rather than the float32 maps
    scene = make_analytic_scene("sphere", 64, 64, SPECULAR)
    pol = scene.polarization()
    rot = RotationProfile.from_rpm(150)
    C = 0.01
    angles = default_angle_grid()
    samples = reconstruct_intensities(stream, rot, C, angles)
    t = sample_times(rot, angles)
    phase = rot.phase0 + rot.omega * t * 1e-6
    true = np.log(sinusoid_samples(1.0, pol.rho, pol.phi, phase))
    delta = true - true[0]
    valid = samples.valid_mask
    err = np.abs(np.log(samples.values) - delta)[:, valid]
    worst = float(err.max())
    frac = float(np.mean(err <= C))
    verdict(2, "quantization bound", frac == 1.0,
            f"{frac * 100:.4f}% of {err.size} samples within C; worst {worst / C:.6f} C")


def test_criterion_03_scale_invariance(tmp_path, capsys):
    scene = make_analytic_scene("sphere", 64, 64, SPECULAR)
    rot = RotationProfile.from_rpm(150)
    cfg = CameraConfig(0.01)
    maps = []
    streams = []
    for s in (scene, scene.scaled(10.0)):
        b = simulate(s, rot, cfg)
        streams.append(fio.encode_events(b.events))
        i_e = reconstruct_intensities(b.events, rot, 0.01)
        maps.append(estimate_normals(i_e, SPECULAR, "oracle", gt=scene.normals))
    fio.write_normal_map(tmp_path / "a.pfm", maps[0])
    fio.write_normal_map(tmp_path / "b.pfm", maps[1])
    same_events = streams[0] == streams[1]
    same_normals = maps[0].normals.tobytes() == maps[1].normals.tobytes() and (
        (tmp_path / "a.pfm").read_bytes() == (tmp_path / "b.pfm").read_bytes()
    )
    verdict(3, "scale invariance", same_events and same_normals,
            f"event stream identical: {same_events}, normal map identical: {same_normals}")


def test_criterion_04_more_angles_lower_error():
    scene = make_analytic_scene("sphere", 64, 64, SPECULAR)
    pol = scene.polarization()
    mask = scene.mask
    mae = {4: [], 12: []}
    for seed in range(50):
        rng = np.random.default_rng(seed)
        for n in (4, 12):
            frames = sinusoid_samples(1.0, pol.rho, pol.phi, default_angle_grid(n))
            frames = frames * (1.0 + 0.01 * rng.standard_normal(frames.shape))
            est = estimate_normals_from_images(frames, SPECULAR, "oracle", gt=scene.normals, mask=mask)
            sel = est.valid_mask
            mae[n].append(np.mean(angular_error(est.normals[sel], scene.normals.normals[sel])))
    m4, m12 = float(np.mean(mae[4])), float(np.mean(mae[12]))
    verdict(4, "4-vs-12 angle trend", m12 < m4, f"mean MAE 12 angles {m12:.4f} deg < 4 angles {m4:.4f} deg")


def test_criterion_05_omega_invariance():
    scene = make_analytic_scene("sphere", 64, 64, SPECULAR)
    counts = {}
    for rpm in (150, 300):
        b = simulate(scene, RotationProfile.from_rpm(rpm), CameraConfig(0.01))
        counts[rpm] = b.events.counts()
    diff = int(np.max(np.abs(counts[150] - counts[300])))
    verdict(5, "rotation-speed invariance", diff <= 1, f"max per-pixel count difference {diff} (<= 1)")


def test_criterion_06_dead_time_saturation():
    scene = make_analytic_scene("sphere", 64, 64, SPECULAR)
    dead = 1000.0
    totals, short_frac = {}, None
    for rpm in (150, 1500):
        rot = RotationProfile.from_rpm(rpm)
        ideal = simulate(scene, rot, CameraConfig(0.05))
        totals[rpm] = len(apply_dead_time(ideal.events.events, dead))
        if rpm == 1500:
            ev = ideal.events.events
            order = np.lexsort((ev["t"], ideal.events.pixel_index))
            pix = ideal.events.pixel_index[order]
            gaps = np.diff(ev["t"][order])
            same = pix[1:] == pix[:-1]
            short_pixels = np.unique(pix[1:][same & (gaps < dead)])
            short_frac = len(short_pixels) / int(scene.mask.sum())
    ok = totals[1500] <= totals[150] and (short_frac < 0.1 or totals[1500] < totals[150])
    verdict(6, "dead-time saturation", ok,
            f"events/rev 1500 RPM {totals[1500]} vs 150 RPM {totals[150]}; "
            f"{short_frac * 100:.1f}% of pixels have ideal intervals < dead time")


def test_criterion_07_background_statistics():
    inside, all_positive = 0, True
    for seed in range(100):
        cfg = CameraConfig(0.05, bg_rate=10.0, width=40, height=25, seed=seed)
        bg = background_events(cfg, 1e6)
        inside += abs(len(bg) - 10_000) <= 3 * np.sqrt(10_000)
        all_positive &= bool(np.all(bg["p"] == 1))
    verdict(7, "background statistics", inside >= 99 and all_positive,
            f"{inside}/100 seeds within 3 sigma, all polarities +1: {all_positive}")


def test_criterion_08_representation_exactness():
    rng = np.random.default_rng(8)
    prefix_ok = frame_ok = True
    h, w = 6, 9
    for _ in range(1000):
        n = int(rng.integers(1, 400))
        t = np.sort(rng.integers(0, 100_000, n))
        s = merge([make_events(t, rng.integers(0, w, n), rng.integers(0, h, n), rng.choice([-1, 1], n))], w, h)
        C = float(rng.uniform(0.005, 0.5))
        win = (0, 100_000)
        voxel = build_voxel_grid(s, win, 8)
        cvgr = build_cvgr(s, win, 8, C)
        prefix_ok &= np.array_equal(cvgr.data, (C * np.cumsum(voxel.data, axis=0)).astype(np.float32))
        prefix_ok &= np.array_equal(cvgr.data, cvgr_from_voxel(voxel, C).data)
        frame = rng.uniform(0.01, 10.0, (h, w))
        diff = build_cvgr_i(s, frame, win, 8, C).data - cvgr.data
        frame_ok &= np.array_equal(diff, np.broadcast_to(frame.astype(np.float32).astype(np.float64), diff.shape))
    verdict(8, "representation exactness", prefix_ok and frame_ok,
            f"CVGR == C * prefix sum: {prefix_ok}; CVGR-I - CVGR == I0: {frame_ok} (1000 streams)")


def test_criterion_09_fresnel_inversion():
    worst = 0.0
    thetas = np.round(np.arange(1, 31) * 0.05, 10)
    for n in (1.3, 1.5, 1.8):
        for reflection in (Reflection.DIFFUSE, Reflection.SPECULAR):
            m = Material(n, reflection)
            theta_max, _ = curve_maximum(m)
            sol = zenith_from_rho(rho_from_zenith(thetas, m), m)
            if reflection is Reflection.DIFFUSE:
                got = sol.low
            else:
                # each angle is recovered by the root on its own side of the peak
                got = np.where(thetas <= theta_max, sol.low, sol.high)
            worst = max(worst, float(np.max(np.abs(got - thetas))))
    verdict(9, "Fresnel inversion", worst <= 1e-6, f"max |theta error| {worst:.3e} rad (<= 1e-6)")


def test_criterion_10_metric_sanity():
    gt_scene = make_analytic_scene("sphere", 32, 32, SPECULAR)
    r = evaluate(gt_scene.normals, gt_scene.normals)
    ident = r.mae_deg == 0.0 and r.acc_11_25 == r.acc_22_5 == r.acc_30 == 1.0
    rng = np.random.default_rng(10)
    nested = True
    for _ in range(1000):
        h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        maps = []
        for p_valid in (0.95, 0.7):
            valid = rng.random((h, w)) < p_valid
            valid.flat[0] = True  # keeps the valid-only domain non-empty
            n = normal_vector(rng.uniform(0, 1.55, (h, w)), rng.uniform(0, 2 * np.pi, (h, w)))
            maps.append(NormalMap(np.where(valid[..., None], n, 0.0), valid))
        for dom in ("valid_only", "full_mask"):
            rep = evaluate(maps[1], maps[0], dom)
            nested &= 0 <= rep.acc_11_25 <= rep.acc_22_5 <= rep.acc_30 <= 1
    verdict(10, "metric sanity", ident and nested,
            f"pred == gt gives MAE {r.mae_deg} and accuracies 1: {ident}; nested on 1000 pairs: {nested}")


def _tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_criterion_11_cli_determinism(tmp_path, capsys):
    def pipeline(root):
        sim = root / "sim"
        cmds = [
            ["simulate", "--scene", "two_planes", "--size", "32", "--contrast", "0.03", "--bg-rate", "20",
             "--dead-time-us", "200", "--seed", "11", "--out", sim],
            ["simulate", "--scene", "sphere", "--size", "24", "--format", "csv", "--seed", "11", "--out", root / "csv"],
            ["estimate", sim / "events.esfp", "--disambiguate", "convex", "--out", root / "est"],
            ["estimate", sim / "events.esfp", "--angles", "4", "--disambiguate", "oracle", "--gt",
             sim / "gt_normals.pfm", "--out", root / "est4"],
            ["evaluate", root / "est" / "normals.pfm", sim / "gt_normals.pfm", "--oracle-ambiguity",
             "--out", root / "rep"],
            ["represent", sim / "events.esfp", "--kind", "voxel", "--out", root / "voxel"],
            ["represent", sim / "events.esfp", "--kind", "cvgr", "--check", "--out", root / "cvgr"],
            ["represent", sim / "events.esfp", "--kind", "cvgri", "--frame", sim / "i_un.pfm", "--out", root / "cvgri"],
        ]
        outputs = []
        for c in cmds:
            assert main([str(a) for a in c]) == 0
            outputs.append(capsys.readouterr().out)
        return _tree(root), outputs

    a, out_a = pipeline(tmp_path / "a")
    b, out_b = pipeline(tmp_path / "b")
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = not differing and out_a == out_b
    verdict(11, "CLI determinism", ok,
            f"{len(a)} artifacts from 8 commands byte-identical" if ok else f"differing: {differing}")
