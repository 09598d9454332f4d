"""Acceptance suite: one test per criterion, printing one PASS/FAIL line each.

Run with plain ``pytest``; the criterion lines are written straight to the
terminal so they stay visible under output capture.
"""

import json
import os
import sys
import time

import numpy as np
import pytest

from test_evaluation import detection, nms_oracle, square
from test_textfill import bfs_flood_oracle, dfs_flood_oracle, mask_to_set, sparse_random_heatmap

from textheat import cli
from textheat.cli import main, roundtrip_corpus
from textheat.datasets import make_synthetic_corpus, read_canonical, write_canonical
from textheat.evaluation import fmeasure, match, merge_multiscale, polygon_nms
from textheat.geometry import TextPolygon, pair_vertices, subdivide
from textheat.heatmap import (Heatmap, loss_dice, loss_reg, loss_total,
                              read_uhth, write_uhth)
from textheat.raster import connected_components, dilate, trace_contour
from textheat.textfill import (PRESETS, TextfillConfig, dilation_kernel,
                               flood_region)

from conftest import boundary_pixels


def _criterion(name: str, ok: bool, detail: str = ""):
    line = f"{name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def _straight_polygon(rng, k: int) -> TextPolygon:
    half = k // 2
    xs = np.sort(rng.uniform(0, 200, half)) + np.arange(half)
    height = rng.uniform(4, 30)
    up = np.column_stack([xs, np.zeros(half)])
    down = np.column_stack([xs, np.full(half, height)])
    return TextPolygon(np.vstack([up, down[::-1]]))


def test_a1_count_law():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    ok = True
    for _ in range(1000):
        k = 2 * int(rng.integers(2, 11))          # K even in [4, 20]
        m = int(rng.integers(1, 9))
        pairs = subdivide(pair_vertices(_straight_polygon(rng, k)), m)
        if 2 * len(pairs) != k + (m - 1) * (k - 2):
            ok = False
            break
    # the documented reference case: K=10, m=3 expands to 26 points
    pairs = subdivide(pair_vertices(_straight_polygon(rng, 10)), 3)
    ok = ok and 2 * len(pairs) == 26
    elapsed = time.perf_counter() - start
    _criterion("A1 count law", ok and elapsed < 1.0,
               f"1000 cases + K=10,m=3 -> 26 in {elapsed:.2f}s")


def test_a2_round_trip_fidelity(monkeypatch):
    monkeypatch.setenv("UHT_THREADS", "1")
    corpus = make_synthetic_corpus(200, seed=20260809)
    start = time.perf_counter()
    rep, predictions = roundtrip_corpus(corpus, m=5, config=TextfillConfig(),
                                        iou_threshold=0.5)
    elapsed = time.perf_counter() - start

    matched = total_pred = total_gt = 0
    for result in rep.per_image:
        if result.image_id.startswith("curved"):
            matched += len(result.pairs)
            total_pred += len(result.pairs) + len(result.unmatched_predictions)
            total_gt += len(result.pairs) + len(result.unmatched_groundtruth)
    curved_p = matched / total_pred if total_pred else 0.0
    curved_r = matched / total_gt if total_gt else 0.0
    curved_f = fmeasure(curved_p, curved_r)

    pair_counts = {image_id: len(dets) for image_id, dets in predictions.items()
                   if image_id.startswith("close_pair")}
    pairs_ok = pair_counts and all(count == 2 for count in pair_counts.values())

    ok = rep.fmeasure >= 0.95 and curved_f >= 0.90 and pairs_ok and elapsed < 60.0
    _criterion("A2 round-trip fidelity", ok,
               f"F={rep.fmeasure:.3f} curved F={curved_f:.3f} "
               f"close pairs 2/2 on {len(pair_counts)} images, {elapsed:.1f}s")


def test_a3_flood_oracle():
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    ok = True
    for _ in range(1000):
        h = sparse_random_heatmap(rng)
        seed = (int(rng.integers(0, 48)), int(rng.integers(0, 48)))
        t_end = float(rng.uniform(0.15, 0.8))
        got = mask_to_set(flood_region(h, seed, t_end))
        if got != bfs_flood_oracle(h, seed, t_end) or got != dfs_flood_oracle(h, seed, t_end):
            ok = False
            break
    elapsed = time.perf_counter() - start
    _criterion("A3 flood oracle", ok and elapsed < 10.0,
               f"1000 heatmaps vs BFS+DFS in {elapsed:.1f}s")


def _dilate_integral_oracle(mask: np.ndarray, k: int) -> np.ndarray:
    """Window-occupancy via integral image: independent of the shift-OR path."""
    a = k // 2
    h, w = mask.shape
    integral = np.zeros((h + 1, w + 1), dtype=np.int64)
    integral[1:, 1:] = mask.astype(np.int64).cumsum(0).cumsum(1)
    y0 = np.clip(np.arange(h) - (k - 1 - a), 0, h)
    y1 = np.clip(np.arange(h) + a + 1, 0, h)
    x0 = np.clip(np.arange(w) - (k - 1 - a), 0, w)
    x1 = np.clip(np.arange(w) + a + 1, 0, w)
    total = (integral[np.ix_(y1, x1)] - integral[np.ix_(y0, x1)]
             - integral[np.ix_(y1, x0)] + integral[np.ix_(y0, x0)])
    return total > 0


def test_a4_morphology_oracle():
    rng = np.random.default_rng(104)
    start = time.perf_counter()
    dilate_ok = contour_ok = True
    for _ in range(500):
        mask = rng.random((64, 64)) < 0.12
        for k in list(range(1, 10)) + [35]:
            if not np.array_equal(dilate(mask, k), _dilate_integral_oracle(mask, k)):
                dilate_ok = False
        components = connected_components(mask, 8)
        if components:
            ring = trace_contour(components[0])
            allowed = boundary_pixels(components[0])
            if not all(allowed[y, x] for x, y in ring):
                contour_ok = False
    elapsed = time.perf_counter() - start
    _criterion("A4 morphology oracle", dilate_ok and contour_ok and elapsed < 10.0,
               f"500 masks x k in 1..9,35 in {elapsed:.1f}s")


def test_a5_kernel_formula():
    table = {750: 9, 15000: 28, 20000: 35, 20001: 35}
    ok = all(dilation_kernel(area) == expected for area, expected in table.items())
    _criterion("A5 kernel formula", ok,
               "k(750)=9 k(15000)=28 k(20000)=35 k(20001)=35")


def test_a6_loss_identities():
    rng = np.random.default_rng(106)

    gt = Heatmap((rng.random((32, 32)) * 0.99).astype(np.float32))
    zero_total = loss_total(gt, gt).total == 0.0

    bounds_ok = True
    for _ in range(1000):
        a = Heatmap(rng.random((8, 8)).astype(np.float32))
        b = Heatmap(rng.random((8, 8)).astype(np.float32))
        value = loss_dice(a, b, float(rng.uniform(0.05, 0.95)))
        if not 0.0 <= value <= 1.0:
            bounds_ok = False
            break

    pred = np.zeros((4, 4), dtype=np.float32); pred[0, 0:2] = 1.0
    gt_d = np.zeros((4, 4), dtype=np.float32); gt_d[0:2, 0:2] = 1.0
    dice_third = abs(loss_dice(Heatmap(pred), Heatmap(gt_d), 0.5) - 1.0 / 3.0) < 1e-9

    blank = Heatmap.zeros(10, 10)
    spike = np.zeros((10, 10), dtype=np.float32); spike[4, 4] = 1.0
    reg_001 = abs(loss_reg(Heatmap(spike), blank) - 0.01) < 1e-9

    p = Heatmap(rng.random((8, 8)).astype(np.float32))
    g = Heatmap(rng.random((8, 8)).astype(np.float32))
    zeroed = loss_total(p, g, lambda1=0.0, lambda2=0.0)
    lambda_ok = zeroed.total == zeroed.l_reg

    ok = zero_total and bounds_ok and dice_third and reg_001 and lambda_ok
    _criterion("A6 loss identities", ok,
               "perfect=0, dice bounds x1000, 1/3 dice, 0.01 reg, lambda zeroing")


def test_a7_metric_arithmetic():
    gts = [TextPolygon(square(0, 0, 10)), TextPolygon(square(30, 0, 10)),
           TextPolygon(square(60, 0, 10)), TextPolygon(square(90, 0, 10))]
    preds = [square(0, 0, 10), square(30, 0, 10), square(0, 200, 10)]
    result = match(preds, gts, 0.5)
    precision = len(result.pairs) / 3
    recall = len(result.pairs) / 4
    scenario_ok = (abs(precision - 2 / 3) < 1e-9 and abs(recall - 1 / 2) < 1e-9
                   and abs(fmeasure(precision, recall) - 4 / 7) < 1e-9)

    rng = np.random.default_rng(107)
    nms_ok = True
    for _ in range(200):
        dets = [detection(square(*rng.uniform(0, 40, 2), rng.uniform(8, 24)),
                          score=rng.random())
                for _ in range(int(rng.integers(1, 9)))]
        threshold = float(rng.uniform(0.1, 0.7))
        if polygon_nms(dets, threshold) != [dets[i] for i in nms_oracle(dets, threshold)]:
            nms_ok = False
            break

    regions = [square(10, 10, 30), square(80, 10, 30), square(10, 80, 30),
               square(80, 80, 30)]
    per_scale = []
    for size in (500.0, 700.0, 900.0):
        factor = size / 500.0
        per_scale.append((size, [detection(r * factor, score=0.5 + 0.1 * i)
                                 for i, r in enumerate(regions)]))
    merged = merge_multiscale(per_scale, target_size=500.0)
    merge_ok = len(merged) == len(regions)

    _criterion("A7 metric arithmetic", scenario_ok and nms_ok and merge_ok,
               "P=2/3 R=1/2 F=4/7, 200 NMS sets, 3-scale merge -> 4 survivors")


def _run_cli_pipeline(base, gt_path):
    maps = base / "maps"
    det = base / "det.jsonl"
    rep = base / "report.json"
    assert main(["encode", "--gt", str(gt_path), "--out", str(maps)]) == 0
    assert main(["decode", "--heatmaps", str(maps), "--out", str(det)]) == 0
    assert main(["roundtrip", "--gt", str(gt_path), "--out", str(rep)]) == 0
    payload = {}
    for name in sorted(os.listdir(maps)):
        payload[f"maps/{name}"] = (maps / name).read_bytes()
    payload["det"] = det.read_bytes()
    payload["report"] = rep.read_bytes()
    return payload


def test_a8_determinism(tmp_path, monkeypatch):
    gt = tmp_path / "gt.jsonl"
    write_canonical(make_synthetic_corpus(8, seed=8), gt)
    runs = {}
    for threads in ("1", "1-again", "4"):
        monkeypatch.setenv("UHT_THREADS", threads.split("-")[0])
        runs[threads] = _run_cli_pipeline(tmp_path / f"run{threads}", gt)
    ok = runs["1"] == runs["1-again"] == runs["4"]
    _criterion("A8 determinism", ok,
               "encode/decode/roundtrip byte-identical at 1 and 4 threads")


def test_a9_format_round_trip(tmp_path):
    rng = np.random.default_rng(109)
    uhth_ok = True
    for i in range(100):
        values = rng.random((int(rng.integers(1, 64)),
                             int(rng.integers(1, 64)))).astype(np.float32)
        path = tmp_path / f"h{i}.uhth"
        write_uhth(Heatmap(values), path)
        back = read_uhth(path).values
        if not np.array_equal(back.view(np.uint32), values.view(np.uint32)):
            uhth_ok = False
            break

    corpus = make_synthetic_corpus(1000, seed=9)
    first = tmp_path / "c1.jsonl"
    second = tmp_path / "c2.jsonl"
    write_canonical(corpus, first)
    write_canonical(read_canonical(first), second)
    canonical_ok = first.read_bytes() == second.read_bytes()

    _criterion("A9 format round-trip", uhth_ok and canonical_ok,
               "100 UHTH bit-exact, 1000-image corpus byte-identical rewrite")


def test_a10_threshold_presets():
    cfg = TextfillConfig()
    default_ok = (cfg.t_top, cfg.t_end) == (0.7, 0.2)
    preset_ok = ((PRESETS["total-text"].t_top, PRESETS["total-text"].t_end) == (0.7, 0.2)
                 and (PRESETS["msra-td500"].t_top, PRESETS["msra-td500"].t_end) == (0.75, 0.2))
    parser = cli.build_parser()
    ns = parser.parse_args(["decode", "--heatmaps", "h", "--out", "o",
                            "--t-top", "0.75"])
    cli._resolve(ns)
    flag_cfg = cli._textfill_config(ns)
    flag_ok = (flag_cfg.t_top, flag_cfg.t_end) == (0.75, 0.2)
    _criterion("A10 threshold presets", default_ok and preset_ok and flag_ok,
               "default (0.7,0.2); --t-top 0.75 selects (0.75,0.2)")
