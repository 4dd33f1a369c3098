"""Acceptance gate. Run with ``pytest tests/test_acceptance.py -v``; the terminal
summary prints one PASS/FAIL line per criterion.

Criterion 7 needs real data: point ``FLOWMESD_DATASET_MANIFEST`` at a batch
manifest (ground truth, method outputs and first frames) to enable it.
"""
import json
import math
import os
import random
import struct
import time

import cv2
import numpy as np
import pytest

import oracles
from flowmesd import (
    ColorImage,
    EvalRegion,
    FlowField,
    aepe,
    edge_refine,
    er_weight,
    evaluate,
    gradient,
    mesd,
    read_flo,
    read_kitti_png,
    write_flo,
    write_kitti_png,
)
from flowmesd.cli import main
from flowmesd.io import load_flow, save_flow, save_png
from flowmesd.refine import ErConfig
from helpers import as_lists, random_flow

SEED = 7411


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def counts_ok(flow, minimum=2):
    g = gradient(flow)
    return all(m.sum() >= minimum for _, _, m in g.planes())


def masked_field(rng, h, w):
    while True:
        flow = random_flow(rng, h, w, invalid_frac=rng.uniform(0, 0.5), scale=rng.uniform(0.1, 10))
        if counts_ok(flow):
            return flow


def random_pair(rng, h, w, invalid_frac=0.2):
    while True:
        gt = random_flow(rng, h, w, invalid_frac=invalid_frac, scale=rng.uniform(0.5, 5))
        est = random_flow(rng, h, w, invalid_frac=invalid_frac, scale=rng.uniform(0.5, 5))
        mix = rng.uniform(0, 1)
        est = FlowField(mix * gt.u + (1 - mix) * est.u, mix * gt.v + (1 - mix) * est.v, est.valid)
        joint = FlowField(gt.u, gt.v, gt.valid & est.valid)
        if counts_ok(joint):
            return gt, est


# 1 ------------------------------------------------------------------------


@criterion(1, "identity: mesd(F,F) <= 1e-7, aepe(F,F) == 0, 200 fields, < 5 s")
def test_identity_suite():
    rng = np.random.default_rng(SEED)
    fields = [masked_field(rng, *rng.integers(4, 65, 2)) for _ in range(200)]
    start = time.perf_counter()
    worst = 0.0
    for flow in fields:
        worst = max(worst, abs(mesd(flow, flow)))
        assert aepe(flow, flow) == 0.0
    elapsed = time.perf_counter() - start
    assert worst <= 1e-7
    assert elapsed < 5.0, f"{elapsed:.2f} s"


# 2 ------------------------------------------------------------------------


@criterion(2, "oracle equivalence on 100 random 8x8 pairs within 1e-9")
def test_oracle_equivalence():
    rng = np.random.default_rng(SEED + 1)
    for _ in range(100):
        gt, est = random_pair(rng, 8, 8)
        expected_mesd, _ = oracles.mesd(as_lists(gt), as_lists(est))
        expected_aepe = oracles.aepe(as_lists(gt), as_lists(est))
        report = evaluate(gt, est)
        assert abs(report.mesd - expected_mesd) <= 1e-9
        assert abs(report.aepe - expected_aepe) <= 1e-9


# 3 ------------------------------------------------------------------------


def adversarial_pairs(rng, n):
    """Random pairs mixed with reflected, negated and near-constant estimates."""
    for i in range(n):
        h, w = rng.integers(3, 17, 2)
        gt, est = random_pair(rng, h, w)
        kind = i % 4
        if kind == 1:
            est = FlowField(2 * gt.u.mean() - gt.u, 2 * gt.v.mean() - gt.v, est.valid)
        elif kind == 2:
            est = FlowField(-gt.u * rng.uniform(0.1, 10), -gt.v, est.valid)
        elif kind == 3:
            est = FlowField(np.full(gt.shape, 1.0) + 1e-9 * rng.standard_normal(gt.shape),
                            est.v, est.valid)
        joint = FlowField(gt.u, gt.v, gt.valid & est.valid)
        if counts_ok(joint):
            yield gt, est


@criterion(3, "range [0, 200], sign flip <= 1e-12, scale <= 1e-6, masking no-op")
def test_mesd_range():
    rng = np.random.default_rng(SEED + 2)
    for gt, est in adversarial_pairs(rng, 400):
        assert 0.0 <= mesd(gt, est) <= 200.0


@criterion(3, "range [0, 200], sign flip <= 1e-12, scale <= 1e-6, masking no-op")
def test_joint_sign_flip():
    rng = np.random.default_rng(SEED + 3)
    for gt, est in adversarial_pairs(rng, 300):
        assert abs(mesd(-gt, -est) - mesd(gt, est)) <= 1e-12


def min_plane_std(flow):
    return min(p[m].std() for _, p, m in gradient(flow).planes())


@criterion(3, "range [0, 200], sign flip <= 1e-12, scale <= 1e-6, masking no-op")
def test_joint_scale_quasi_invariance():
    rng = np.random.default_rng(SEED + 4)
    checked = 0
    while checked < 300:
        h, w = rng.integers(4, 33, 2)
        gt, est = random_pair(rng, h, w)
        gt, est = gt.scaled(10 ** rng.uniform(-2.5, 0.5)), est.scaled(10 ** rng.uniform(-2.5, 0.5))
        s = 10 ** rng.uniform(-2, 2)
        sgt, sest = gt.scaled(s), est.scaled(s)
        joint = gt.valid & est.valid
        if min(min_plane_std(FlowField(f.u, f.v, joint)) for f in (gt, est, sgt, sest)) < 1e-3:
            continue
        checked += 1
        assert abs(mesd(sgt, sest) - mesd(gt, est)) <= 1e-6


@criterion(3, "range [0, 200], sign flip <= 1e-12, scale <= 1e-6, masking no-op")
def test_masking_outside_region_noop():
    rng = np.random.default_rng(SEED + 5)
    for _ in range(200):
        h, w = rng.integers(4, 20, 2)
        gt, est = random_pair(rng, h, w, invalid_frac=0.1)
        top, left = rng.integers(0, h - 3), rng.integers(0, w - 3)
        rh, rw = rng.integers(3, h - top + 1), rng.integers(3, w - left + 1)
        region = EvalRegion(rect=(int(top), int(left), int(rh), int(rw)))
        inside = region.to_mask(gt.shape)
        if not counts_ok(FlowField(gt.u, gt.v, gt.valid & est.valid & inside)):
            continue
        gt2 = FlowField(gt.u, gt.v, gt.valid & ~((rng.random(gt.shape) < 0.5) & ~inside))
        est2 = FlowField(est.u, est.v, est.valid & ~((rng.random(gt.shape) < 0.5) & ~inside))
        assert evaluate(gt2, est2, region).to_dict() == evaluate(gt, est, region).to_dict()


# 4 ------------------------------------------------------------------------


def boundary_trial(rng, size=24, noise=1.5, band=3):
    c = np.arange(size)[None, :].repeat(size, axis=0)
    left = c < size // 2
    gt = FlowField(np.where(left, 3.0, -2.0), np.where(left, -1.0, 2.5))
    img = ColorImage(np.where(left, 60, 190).astype(np.uint8))
    near = np.abs(c - size // 2 + 0.5) <= band
    est = FlowField(gt.u + near * rng.normal(0, noise, gt.shape),
                    gt.v + near * rng.normal(0, noise, gt.shape))
    return gt, est, img


@criterion(4, "edge refinement: constant identity, weight spot values, median AEPE drop, < 30 s")
def test_edge_refinement_suite():
    rng = np.random.default_rng(SEED + 6)
    start = time.perf_counter()

    for _ in range(5):
        h, w = rng.integers(3, 20, 2)
        flow = FlowField(np.full((h, w), rng.normal()), np.full((h, w), rng.normal()))
        img = ColorImage(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))
        out = edge_refine(flow, img)
        assert np.array_equal(out.u, flow.u) and np.array_equal(out.v, flow.v)

    flat = ColorImage(np.full((3, 3), 50, np.uint8))
    assert abs(er_weight(flat, (1, 1), (2, 1)) - math.exp(-0.5 / 49)) <= 1e-12
    pair = ColorImage(np.array([[128, 135]], np.uint8))
    assert abs(er_weight(pair, (0, 0), (0, 1), ErConfig(n1=1e100)) - math.exp(-0.5)) <= 1e-12

    before, after = [], []
    for _ in range(25):
        gt, est, img = boundary_trial(rng)
        before.append(aepe(gt, est))
        after.append(aepe(gt, edge_refine(est, img)))
    assert np.median(after) < np.median(before)

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"{elapsed:.2f} s"


# 5 ------------------------------------------------------------------------


@criterion(5, "formats: .flo bit-exact, KITTI within 1/128, sentinel and validity")
def test_flo_round_trip(tmp_path):
    rng = np.random.default_rng(SEED + 7)
    for i in range(10):
        flow = random_flow(rng, *rng.integers(1, 40, 2), invalid_frac=0.2, scale=50, dtype=np.float32)
        path = tmp_path / f"f{i}.flo"
        save_flow(path, flow)
        back = load_flow(path)
        assert np.array_equal(back.valid, flow.valid)
        assert back.u[flow.valid].tobytes() == flow.u[flow.valid].tobytes()
        assert back.v[flow.valid].tobytes() == flow.v[flow.valid].tobytes()
        assert write_flo(back) == write_flo(flow)


@criterion(5, "formats: .flo bit-exact, KITTI within 1/128, sentinel and validity")
def test_kitti_round_trip(tmp_path):
    rng = np.random.default_rng(SEED + 8)
    for i in range(10):
        h, w = rng.integers(1, 40, 2)
        u = rng.uniform(-512, 511.98, (h, w))
        v = rng.uniform(-512, 511.98, (h, w))
        flow = FlowField(u, v, rng.random((h, w)) > 0.25)
        path = tmp_path / f"k{i}.png"
        save_flow(path, flow)
        back = load_flow(path)
        assert np.array_equal(back.valid, flow.valid)
        assert np.abs(back.u - u)[flow.valid].max(initial=0) <= 1 / 128
        assert np.abs(back.v - v)[flow.valid].max(initial=0) <= 1 / 128


@criterion(5, "formats: .flo bit-exact, KITTI within 1/128, sentinel and validity")
def test_sentinel_and_validity_channel():
    header = struct.pack("<fii", 202021.25, 3, 1)
    flow = read_flo(header + struct.pack("<6f", 3.5, -2.0, 1e10, 0.0, 0.0, -1e10))
    assert flow.valid.tolist() == [[True, False, False]]
    assert (flow.u[0, 0], flow.v[0, 0]) == (3.5, -2.0)

    raw = np.array([[[32768, 32768, 1], [32832, 32704, 1], [1234, 50000, 0]]], np.uint16)
    ok, buf = cv2.imencode(".png", raw[..., ::-1])
    kitti = read_kitti_png(buf.tobytes())
    assert kitti.valid.tolist() == [[True, True, False]]
    assert kitti.u[0, :2].tolist() == [0.0, 1.0] and kitti.v[0, :2].tolist() == [0.0, -1.0]

    encoded = cv2.imdecode(np.frombuffer(write_kitti_png(kitti), np.uint8), cv2.IMREAD_UNCHANGED)
    assert encoded[0, 2].tolist() == [0, 0, 0]


# 6 ------------------------------------------------------------------------


def write_frames(root, rng, n=10, size=16):
    lines = []
    c = np.arange(size)[None, :].repeat(size, axis=0)
    left = c < size // 2
    for i in range(n):
        gt = FlowField(np.where(left, 2.0, -1.0), np.where(left, 0.5, 1.5))
        est = FlowField(gt.u + rng.normal(0, 0.4, gt.shape), gt.v + rng.normal(0, 0.4, gt.shape))
        save_flow(root / f"gt_{i}.flo", gt)
        save_flow(root / f"est_{i}.flo", est)
        save_png(root / f"img_{i}.png", ColorImage(np.where(left, 40, 200).astype(np.uint8)))
        region = "1,1,12,13" if i % 4 == 0 else "-"
        lines.append(f"f{i:02d} gt_{i}.flo est_{i}.flo img_{i}.png {region}")
    return lines


def batch_csv(root, lines, tag, extra=()):
    manifest = root / f"manifest_{tag}.txt"
    manifest.write_text("dataset = synth\n" + "\n".join(lines) + "\n")
    out = root / f"out_{tag}"
    assert main(["batch", str(manifest), "--out-dir", str(out), *extra]) == 0
    return (out / "synth_report.csv").read_bytes()


def sorted_rows(data):
    header, *rows = data.decode().splitlines()
    return [header] + sorted(rows)


@criterion(6, "batch CSV byte-identical across runs and manifest permutations")
@pytest.mark.parametrize("extra", [(), ("--with-er", "--radius", "3"), ("--jobs", "4")],
                         ids=["plain", "with-er", "parallel"])
def test_batch_determinism(tmp_path, capsys, extra):
    lines = write_frames(tmp_path, np.random.default_rng(SEED + 9))
    first = batch_csv(tmp_path, lines, "a", extra)
    assert batch_csv(tmp_path, lines, "b", extra) == first
    shuffler = random.Random(SEED)
    for k in range(3):
        perm = lines[:]
        shuffler.shuffle(perm)
        assert sorted_rows(batch_csv(tmp_path, perm, f"p{k}", extra)) == sorted_rows(first)
    capsys.readouterr()


# 7 ------------------------------------------------------------------------


@criterion(7, "optional: ER improves MESD on user-supplied benchmark frames")
def test_dataset_er_improves_mesd(tmp_path, capsys):
    manifest = os.environ.get("FLOWMESD_DATASET_MANIFEST")
    if not manifest:
        pytest.skip("set FLOWMESD_DATASET_MANIFEST to enable")
    assert main(["batch", manifest, "--with-er", "--out-dir", str(tmp_path), "--jobs", "4"]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["mesd_improvement"] is not None and summary["mesd_improvement"] > 0
