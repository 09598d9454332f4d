"""Batch front door: encode, decode, round-trip, evaluate, loss, render, synth.

Every subcommand is deterministic given its inputs, flags, and seed.
Per-image work runs on a bounded thread pool (``UHT_THREADS`` overrides the
size, default is the logical CPU count); outputs are written in sorted
image-id order, so the pool size never changes the bytes produced.

Exit codes: 0 success, 2 input error, 3 output error, 4 data corruption,
5 validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .datasets import (CanonicalFormatError, Corpus, SYNTH_KINDS,
                       make_synthetic_corpus, read_canonical, write_canonical)
from .evaluation import EvalReport, merge_multiscale, report
from .heatmap import (Heatmap, HeatmapFormatError, loss_total,
                      read_uhth, render_groundtruth, write_uhth)
from .textfill import (Detection, TextfillConfig, decode,
                       read_detections, write_detections)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_OUTPUT = 3
EXIT_CORRUPT = 4
EXIT_VALIDATION = 5

_DEFAULTS = {
    "m": 5,
    "lambda1": 1.0,
    "lambda2": 1.0,
    "t_top": 0.7,
    "t_end": 0.2,
    "iou": 0.5,
    "seed": 0,
    "min_region_area": 16,
    "width": 320,
    "height": 320,
    "count": 16,
    "kinds": ",".join(SYNTH_KINDS),
    "scales": None,
}

_SAFE_ID = re.compile(r"^[A-Za-z0-9._@-]+$")


class CliError(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


def _fail(exit_code: int, message: str) -> CliError:
    return CliError(exit_code, message)


# -- configuration ----------------------------------------------------------

def _parse_config_value(raw: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def _load_config(path: str) -> dict:
    """Parse a TOML-style key = value file; '#' starts a comment."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise _fail(EXIT_INPUT, f"cannot read config {path}: {exc}")
    for line_no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _fail(EXIT_VALIDATION, f"{path}:{line_no}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = _parse_config_value(value)
    return values


def _resolve(ns: argparse.Namespace) -> None:
    """Fill unset flags from the config file, then from built-in defaults."""
    config = _load_config(ns.config) if getattr(ns, "config", None) else {}
    for key, default in _DEFAULTS.items():
        if hasattr(ns, key) and getattr(ns, key) is None:
            setattr(ns, key, config.get(key, default))
    _validate(ns)


def _validate(ns: argparse.Namespace) -> None:
    def check(cond: bool, message: str):
        if not cond:
            raise _fail(EXIT_VALIDATION, message)

    if hasattr(ns, "m"):
        check(isinstance(ns.m, int) and ns.m >= 1, f"--m must be a positive integer, got {ns.m!r}")
    if hasattr(ns, "t_top") and hasattr(ns, "t_end"):
        check(0.0 < ns.t_end < 1.0 and 0.0 < ns.t_top < 1.0,
              "--t-top and --t-end must lie in (0, 1)")
        check(ns.t_top > ns.t_end, "--t-top must exceed --t-end")
    if hasattr(ns, "iou"):
        check(0.0 < ns.iou < 1.0, f"--iou must lie in (0, 1), got {ns.iou!r}")
    if hasattr(ns, "seed"):
        check(isinstance(ns.seed, int) and 0 <= ns.seed < 2 ** 64,
              "--seed must be an unsigned 64-bit integer")
    if hasattr(ns, "count"):
        check(isinstance(ns.count, int) and ns.count >= 0, "--count must be >= 0")
    if hasattr(ns, "width") and hasattr(ns, "height"):
        check(ns.width > 0 and ns.height > 0, "--width/--height must be positive")


def _pool_size() -> int:
    env = os.environ.get("UHT_THREADS", "").strip()
    if env:
        try:
            size = int(env)
        except ValueError:
            raise _fail(EXIT_VALIDATION, f"UHT_THREADS must be an integer, got {env!r}")
        if size < 1:
            raise _fail(EXIT_VALIDATION, "UHT_THREADS must be >= 1")
        return size
    return os.cpu_count() or 1


def _parallel_map(fn, items):
    items = list(items)
    size = _pool_size()
    if size == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=size) as pool:
        return list(pool.map(fn, items))


# -- shared I/O helpers ------------------------------------------------------

def _read_corpus(path: str) -> Corpus:
    try:
        return read_canonical(path)
    except OSError as exc:
        raise _fail(EXIT_INPUT, f"cannot read groundtruth {path}: {exc}")
    except CanonicalFormatError as exc:
        raise _fail(EXIT_CORRUPT, f"{path}: {exc}")


def _ensure_out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _fail(EXIT_OUTPUT, f"cannot create output directory {path}: {exc}")
    return out


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as exc:
        raise _fail(EXIT_OUTPUT, f"cannot write {path}: {exc}")


def _write_json(path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_heatmap(path) -> Heatmap:
    try:
        return read_uhth(path)
    except OSError as exc:
        raise _fail(EXIT_INPUT, f"cannot read heatmap {path}: {exc}")
    except HeatmapFormatError as exc:
        raise _fail(EXIT_CORRUPT, str(exc))


def _heatmap_ids(directory: str) -> list[str]:
    try:
        names = sorted(os.listdir(directory))
    except OSError as exc:
        raise _fail(EXIT_INPUT, f"cannot list heatmap directory {directory}: {exc}")
    return [name[:-5] for name in names
            if name.endswith(".uhth") and not name.endswith(".ignore.uhth")]


def _check_image_id(image_id: str) -> str:
    if not _SAFE_ID.match(image_id):
        raise _fail(EXIT_VALIDATION, f"image id {image_id!r} is not filename-safe")
    return image_id


def _textfill_config(ns) -> TextfillConfig:
    return TextfillConfig(t_top=ns.t_top, t_end=ns.t_end,
                          min_region_area=ns.min_region_area)


def _report_payload(rep: EvalReport, detection_counts: dict | None = None) -> dict:
    per_image = {}
    for result in rep.per_image:
        entry = {
            "pairs": [[p, g, iou] for p, g, iou in result.pairs],
            "unmatched_predictions": result.unmatched_predictions,
            "unmatched_groundtruth": result.unmatched_groundtruth,
            "ignored_predictions": result.ignored_predictions,
        }
        if detection_counts is not None:
            entry["detections"] = detection_counts.get(result.image_id, 0)
        per_image[result.image_id] = entry
    return {
        "precision": rep.precision,
        "recall": rep.recall,
        "fmeasure": rep.fmeasure,
        "per_image": per_image,
    }


# -- subcommands -------------------------------------------------------------

def cmd_encode(ns) -> int:
    corpus = _read_corpus(ns.gt)
    out = _ensure_out_dir(ns.out)
    for img in corpus.images:
        _check_image_id(img.image_id)

    def work(img):
        return img.image_id, render_groundtruth(img.polygons, img.width, img.height, ns.m)

    results = dict(_parallel_map(work, corpus.images))
    manifest: dict = {"m": ns.m, "images": {}}
    try:
        for image_id in sorted(results):
            rendered = results[image_id]
            heatmap_name = f"{image_id}.uhth"
            write_uhth(rendered.heatmap, out / heatmap_name)
            dont_care_name = None
            if rendered.dont_care.any():
                dont_care_name = f"{image_id}.ignore.uhth"
                write_uhth(Heatmap(rendered.dont_care.astype(np.float32)),
                           out / dont_care_name)
            manifest["images"][image_id] = {
                "heatmap": heatmap_name,
                "dont_care": dont_care_name,
                "skipped": rendered.skipped,
            }
    except OSError as exc:
        raise _fail(EXIT_OUTPUT, f"cannot write heatmaps to {ns.out}: {exc}")
    _write_json(out / "manifest.json", manifest)
    skipped = sum(len(entry["skipped"]) for entry in manifest["images"].values())
    print(f"encoded {len(results)} images to {ns.out} ({skipped} polygons skipped)")
    return EXIT_OK


def _decode_flat(ns, cfg: TextfillConfig) -> dict[str, list[Detection]]:
    ids = _heatmap_ids(ns.heatmaps)

    def work(image_id):
        hm = _read_heatmap(Path(ns.heatmaps) / f"{image_id}.uhth")
        return image_id, decode(hm, cfg, raw_contours=ns.raw_contours)

    return dict(_parallel_map(work, ids))


def _decode_multiscale(ns, cfg: TextfillConfig) -> dict[str, list[Detection]]:
    scales = [token.strip() for token in str(ns.scales).split(",") if token.strip()]
    sizes = []
    for token in scales:
        try:
            size = float(token)
        except ValueError:
            raise _fail(EXIT_VALIDATION, f"--scales entries must be numbers, got {token!r}")
        if size <= 0:
            raise _fail(EXIT_VALIDATION, "--scales entries must be positive")
        sizes.append(size)
    if not sizes:
        raise _fail(EXIT_VALIDATION, "--scales must name at least one scale")
    base = Path(ns.heatmaps)
    ids = _heatmap_ids(base / scales[0])

    def work(image_id):
        per_scale = []
        for token, size in zip(scales, sizes):
            hm = _read_heatmap(base / token / f"{image_id}.uhth")
            per_scale.append((size, decode(hm, cfg, raw_contours=ns.raw_contours)))
        # detections are merged into the frame of the first listed scale
        return image_id, merge_multiscale(per_scale, target_size=sizes[0])

    return dict(_parallel_map(work, ids))


def cmd_decode(ns) -> int:
    cfg = _textfill_config(ns)
    per_image = _decode_multiscale(ns, cfg) if ns.scales else _decode_flat(ns, cfg)
    try:
        write_detections(ns.out, per_image)
    except OSError as exc:
        raise _fail(EXIT_OUTPUT, f"cannot write detections {ns.out}: {exc}")
    total = sum(len(d) for d in per_image.values())
    print(f"decoded {len(per_image)} heatmaps -> {total} detections ({ns.out})")
    return EXIT_OK


def roundtrip_corpus(corpus: Corpus, m: int = 5,
                     config: TextfillConfig | None = None,
                     iou_threshold: float = 0.5):
    """Encode every image, decode it back, and score against the corpus.

    Returns (EvalReport, per-image detections).  This is the network-free
    self-test of the whole pipeline.
    """
    cfg = config if config is not None else TextfillConfig()

    def work(img):
        rendered = render_groundtruth(img.polygons, img.width, img.height, m)
        return img.image_id, decode(rendered.heatmap, cfg)

    predictions = dict(_parallel_map(work, corpus.images))
    return report(corpus, predictions, iou_threshold), predictions


def cmd_roundtrip(ns) -> int:
    corpus = _read_corpus(ns.gt)
    if not corpus.images:
        print("warning: empty corpus, precision/recall undefined; reporting 0",
              file=sys.stderr)
        rep = EvalReport(0.0, 0.0, 0.0, [])
        predictions = {}
    else:
        rep, predictions = roundtrip_corpus(corpus, ns.m, _textfill_config(ns), ns.iou)
    counts = {image_id: len(dets) for image_id, dets in predictions.items()}
    print(f"precision={rep.precision:.4f} recall={rep.recall:.4f} "
          f"fmeasure={rep.fmeasure:.4f}")
    if ns.out:
        _write_json(ns.out, _report_payload(rep, counts))
    return EXIT_OK


def cmd_eval(ns) -> int:
    corpus = _read_corpus(ns.gt)
    try:
        predictions = read_detections(ns.det)
    except OSError as exc:
        raise _fail(EXIT_INPUT, f"cannot read detections {ns.det}: {exc}")
    except ValueError as exc:
        raise _fail(EXIT_CORRUPT, str(exc))
    try:
        rep = report(corpus, predictions, ns.iou)
    except ValueError as exc:
        raise _fail(EXIT_VALIDATION, str(exc))
    print(f"precision={rep.precision:.4f} recall={rep.recall:.4f} "
          f"fmeasure={rep.fmeasure:.4f}")
    if ns.out:
        _write_json(ns.out, _report_payload(rep))
    return EXIT_OK


def cmd_loss(ns) -> int:
    gt_ids = _heatmap_ids(ns.heatmaps)
    if not gt_ids:
        raise _fail(EXIT_INPUT, f"no .uhth files in {ns.heatmaps}")

    def work(image_id):
        gt = _read_heatmap(Path(ns.heatmaps) / f"{image_id}.uhth")
        pred_path = Path(ns.pred) / f"{image_id}.uhth"
        if not pred_path.exists():
            raise _fail(EXIT_INPUT, f"missing prediction heatmap {pred_path}")
        pred = _read_heatmap(pred_path)
        ignore_path = Path(ns.heatmaps) / f"{image_id}.ignore.uhth"
        ignore = read_uhth(ignore_path).values > 0.5 if ignore_path.exists() else None
        return image_id, loss_total(pred, gt, ns.lambda1, ns.lambda2,
                                     ignore=ignore, use_sums=ns.loss_reg_sum)

    rows = _parallel_map(work, gt_ids)
    print(f"{'image':24s} {'l_reg':>12s} {'l_center':>12s} {'l_region':>12s} {'total':>12s}")
    for image_id, loss in rows:
        print(f"{image_id:24s} {loss.l_reg:12.6f} {loss.l_center:12.6f} "
              f"{loss.l_region:12.6f} {loss.total:12.6f}")
    if ns.out:
        payload = {image_id: {"l_reg": loss.l_reg, "l_center": loss.l_center,
                              "l_region": loss.l_region, "total": loss.total}
                   for image_id, loss in rows}
        _write_json(ns.out, payload)
    return EXIT_OK


def _sniff_records(path: str):
    """Classify a JSON-lines file as canonical groundtruth or detections."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if "words" in record:
                    return "groundtruth"
                if "polygon" in record:
                    return "detections"
                break
    except OSError as exc:
        raise _fail(EXIT_INPUT, f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise _fail(EXIT_CORRUPT, f"{path}: invalid JSON: {exc}")
    raise _fail(EXIT_CORRUPT, f"{path}: neither groundtruth nor detections")


def cmd_render(ns) -> int:
    from PIL import Image, ImageDraw

    out = _ensure_out_dir(ns.out)
    kind = _sniff_records(ns.gt)
    if kind == "groundtruth":
        corpus = _read_corpus(ns.gt)
        items = [(img.image_id, (img.width, img.height),
                  [(p.vertices, "orange" if p.ignore else "lime") for p in img.polygons])
                 for img in corpus.images]
    else:
        try:
            detections = read_detections(ns.gt)
        except ValueError as exc:
            raise _fail(EXIT_CORRUPT, str(exc))
        items = [(image_id, None, [(d.polygon, "red") for d in dets])
                 for image_id, dets in sorted(detections.items())]

    rendered = 0
    for image_id, size, rings in items:
        _check_image_id(image_id)
        base = None
        if ns.images:
            source = Path(ns.images) / f"{image_id}.png"
            if source.exists():
                base = Image.open(source).convert("RGB")
        if base is None:
            if size is None:
                extent = np.vstack([r for r, _ in rings]) if rings else np.zeros((1, 2))
                size = (int(extent[:, 0].max()) + 16, int(extent[:, 1].max()) + 16)
            base = Image.new("RGB", size, "white")
        if ns.heatmaps:
            heat_path = Path(ns.heatmaps) / f"{image_id}.uhth"
            if heat_path.exists():
                hm = _read_heatmap(heat_path)
                alpha = np.zeros((base.height, base.width), dtype=np.float64)
                hh = min(base.height, hm.height)
                ww = min(base.width, hm.width)
                alpha[:hh, :ww] = hm.values[:hh, :ww] * 0.6
                pixels = np.asarray(base, dtype=np.float64)
                color = np.array([255.0, 32.0, 32.0])
                pixels = pixels * (1.0 - alpha[..., None]) + color * alpha[..., None]
                base = Image.fromarray(pixels.round().astype(np.uint8))
        draw = ImageDraw.Draw(base)
        for ring, color in rings:
            points = [(float(x), float(y)) for x, y in ring]
            draw.line(points + points[:1], fill=color, width=2)
        try:
            base.save(out / f"{image_id}.png")
        except OSError as exc:
            raise _fail(EXIT_OUTPUT, f"cannot write overlay: {exc}")
        rendered += 1
    print(f"rendered {rendered} overlays to {ns.out}")
    return EXIT_OK


def cmd_synth(ns) -> int:
    kinds = tuple(k.strip() for k in str(ns.kinds).split(",") if k.strip())
    try:
        corpus = make_synthetic_corpus(ns.count, kinds, ns.seed,
                                       ns.width, ns.height)
    except ValueError as exc:
        raise _fail(EXIT_VALIDATION, str(exc))
    try:
        write_canonical(corpus, ns.out)
    except OSError as exc:
        raise _fail(EXIT_OUTPUT, f"cannot write corpus {ns.out}: {exc}")
    words = sum(len(img.polygons) for img in corpus.images)
    print(f"generated {len(corpus.images)} images / {words} words ({ns.out})")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textheat",
        description="Scene-text region codec: polygon annotations to Gaussian "
                    "heatmaps and back, plus losses and detection metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML-style key = value file mirroring the flags")
    common.add_argument("--seed", type=int, default=None, help="u64 seed for all randomness")

    p = sub.add_parser("encode", parents=[common],
                       help="render groundtruth heatmaps from canonical annotations")
    p.add_argument("--gt", required=True, help="canonical JSON-lines groundtruth")
    p.add_argument("--out", required=True, help="output directory for .uhth files")
    p.add_argument("--m", type=int, default=None, help="quadrilateral subdivision factor")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common],
                       help="decode heatmaps into text polygons")
    p.add_argument("--heatmaps", required=True, help="directory of .uhth files")
    p.add_argument("--out", required=True, help="output JSON-lines detections file")
    p.add_argument("--t-top", dest="t_top", type=float, default=None)
    p.add_argument("--t-end", dest="t_end", type=float, default=None)
    p.add_argument("--scales", default=None,
                   help="comma-separated frame sizes; heatmaps live in per-scale "
                        "subdirectories and merge into the first frame")
    p.add_argument("--raw-contours", action="store_true",
                   help="emit unsimplified one-vertex-per-pixel contours")
    p.set_defaults(func=cmd_decode, min_region_area=None)

    p = sub.add_parser("roundtrip", parents=[common],
                       help="encode, decode, and score a corpus against itself")
    p.add_argument("--gt", required=True)
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--t-top", dest="t_top", type=float, default=None)
    p.add_argument("--t-end", dest="t_end", type=float, default=None)
    p.add_argument("--iou", type=float, default=None)
    p.set_defaults(func=cmd_roundtrip, min_region_area=None)

    p = sub.add_parser("eval", parents=[common],
                       help="score a detections file against groundtruth")
    p.add_argument("--gt", required=True)
    p.add_argument("--det", required=True, help="JSON-lines detections file")
    p.add_argument("--out", default=None)
    p.add_argument("--iou", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss", parents=[common],
                       help="loss terms between predicted and groundtruth heatmaps")
    p.add_argument("--pred", required=True, help="directory of predicted .uhth files")
    p.add_argument("--heatmaps", required=True, help="directory of groundtruth .uhth files")
    p.add_argument("--out", default=None)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--loss-reg-sum", dest="loss_reg_sum", action="store_true",
                   help="use per-class sums instead of means in the regression loss")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("render", parents=[common],
                       help="draw polygon overlays (PNG) for groundtruth or detections")
    p.add_argument("--gt", required=True, help="canonical groundtruth or detections file")
    p.add_argument("--images", default=None, help="directory of <image_id>.png backgrounds")
    p.add_argument("--heatmaps", default=None, help="optional .uhth directory to alpha-blend")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=None, help="number of images")
    p.add_argument("--kinds", default=None,
                   help=f"comma-separated subset of {','.join(SYNTH_KINDS)}")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        _resolve(ns)
        return ns.func(ns)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (HeatmapFormatError, CanonicalFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
