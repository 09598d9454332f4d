"""Annotation ingestion: native benchmark formats, canonical files, synthesis.

Native Total-Text, SCUT-CTW1500 and MSRA-TD500 annotation files are parsed
into canonical word polygons (even vertex count, first half along one side in
reading order, second half back along the other).  The file grammars are
reverse-engineered from the public dataset releases.  COCO-Text is ingested
only through the canonical format below.

Canonical interchange is JSON lines, one image per line::

    {"image_id": str, "width": int, "height": int,
     "words": [{"vertices": [[x, y], ...], "text": str?, "ignore": bool}]}

A seeded synthetic corpus generator (straight, rotated, and sine-curved
swept-stroke words with known groundtruth) backs the encode/decode round-trip
tests.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .geometry import TextPolygon, pairing_is_valid, polygon_area


class CanonicalFormatError(ValueError):
    """A canonical JSON-lines file violates the schema."""


@dataclass(frozen=True, eq=False)
class AnnotatedImage:
    image_id: str
    width: int
    height: int
    polygons: list[TextPolygon] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class Corpus:
    name: str
    images: list[AnnotatedImage] = field(default_factory=list)

    def __post_init__(self):
        if not self.name:
            raise ValueError("corpus name must be non-empty")


@dataclass(frozen=True, eq=False)
class ParseResult:
    """Parsed image plus per-line diagnostics for everything rejected."""

    image: AnnotatedImage
    diagnostics: list[str]


def normalize_ring(vertices: np.ndarray) -> np.ndarray | None:
    """Bring a native vertex ring into the canonical traversal order.

    Tries the ring as given, reversed, and both rotated by half the vertex
    count, accepting the first variant whose cross-section pairing does not
    self-cross.  Returns None when no variant works.
    """
    v = np.asarray(vertices, dtype=np.float64)
    k = len(v)
    if k < 4 or k % 2 != 0:
        return None
    half = k // 2
    rolled = np.vstack([v[half:], v[:half]])
    for candidate in (v, v[::-1], rolled, rolled[::-1]):
        if pairing_is_valid(candidate):
            return np.ascontiguousarray(candidate)
    return None


def _clamp(vertices: np.ndarray, width: int, height: int) -> np.ndarray:
    out = vertices.copy()
    out[:, 0] = np.clip(out[:, 0], 0.0, float(width))
    out[:, 1] = np.clip(out[:, 1], 0.0, float(height))
    return out


def _infer_dims(rings) -> tuple[int, int]:
    if not rings:
        return 1, 1
    stacked = np.vstack(rings)
    return (max(1, int(math.ceil(stacked[:, 0].max()))),
            max(1, int(math.ceil(stacked[:, 1].max()))))


def _build_image(raw, image_id, width, height, diagnostics) -> AnnotatedImage:
    """Normalize, validate and clamp (ring, text, ignore) triples."""
    accepted = []
    for line_no, ring, text, ignore in raw:
        k = len(ring)
        if k < 4 or k % 2 != 0:
            diagnostics.append(f"line {line_no}: vertex count {k} is not even and >= 4")
            continue
        if polygon_area(ring) <= 0.0:
            diagnostics.append(f"line {line_no}: degenerate zero-area polygon")
            continue
        normalized = normalize_ring(ring)
        if normalized is None:
            diagnostics.append(f"line {line_no}: no ring orientation pairs cleanly")
            continue
        accepted.append((normalized, text, ignore))
    if width is None or height is None:
        iw, ih = _infer_dims([ring for ring, _, _ in accepted])
        width = width if width is not None else iw
        height = height if height is not None else ih
    polygons = [TextPolygon(_clamp(ring, width, height), text, ignore)
                for ring, text, ignore in accepted]
    return AnnotatedImage(image_id, int(width), int(height), polygons)


_TT_FIELD = re.compile(r"(\w+):\s*\[\[(.*?)\]\]")
_TT_TRANSCRIPTION = re.compile(r"transcriptions:\s*\[\s*u?['\"](.*?)['\"]\s*\]")


def _numbers(text: str) -> list[float]:
    return [float(tok) for tok in re.split(r"[,\s]+", text.strip()) if tok]


def parse_totaltext(annotation_text: str, image_id: str = "",
                    width: int | None = None, height: int | None = None) -> ParseResult:
    """Parse one Total-Text per-image annotation file.

    Lines look like ``x: [[..]], y: [[..]], ornt: [u'c'], transcriptions:
    [u'word']``; the x and y arrays hold the full vertex ring.  A ``#``
    transcription marks a don't-care region.  Malformed lines are reported
    with their line number and skipped.
    """
    raw, diagnostics = [], []
    for line_no, line in enumerate(annotation_text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = {m.group(1): m.group(2) for m in _TT_FIELD.finditer(line)}
        if "x" not in fields or "y" not in fields:
            diagnostics.append(f"line {line_no}: missing x/y arrays")
            continue
        try:
            xs, ys = _numbers(fields["x"]), _numbers(fields["y"])
        except ValueError:
            diagnostics.append(f"line {line_no}: non-numeric coordinates")
            continue
        if len(xs) != len(ys):
            diagnostics.append(f"line {line_no}: x has {len(xs)} values, y has {len(ys)}")
            continue
        tmatch = _TT_TRANSCRIPTION.search(line)
        text = tmatch.group(1) if tmatch else None
        ignore = text == "#"
        raw.append((line_no, np.column_stack([xs, ys]), text, ignore))
    return ParseResult(_build_image(raw, image_id, width, height, diagnostics),
                       diagnostics)


def parse_ctw1500(annotation_text: str, image_id: str = "",
                  width: int | None = None, height: int | None = None) -> ParseResult:
    """Parse one SCUT-CTW1500 per-image annotation file.

    Each line carries exactly 32 integers: the bounding box (xmin, ymin,
    xmax, ymax) followed by 14 (dx, dy) vertex offsets relative to the box's
    top-left corner.
    """
    raw, diagnostics = [], []
    for line_no, line in enumerate(annotation_text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = [tok for tok in re.split(r"[,\s]+", line.strip()) if tok]
        try:
            values = [int(tok) for tok in tokens]
        except ValueError:
            diagnostics.append(f"line {line_no}: non-integer token")
            continue
        if len(values) != 32:
            diagnostics.append(f"line {line_no}: expected 32 integers, got {len(values)}")
            continue
        xmin, ymin = values[0], values[1]
        offsets = np.array(values[4:], dtype=np.float64).reshape(14, 2)
        ring = offsets + (xmin, ymin)
        raw.append((line_no, ring, None, False))
    return ParseResult(_build_image(raw, image_id, width, height, diagnostics),
                       diagnostics)


def rotated_rect_corners(x: float, y: float, w: float, h: float,
                         angle: float) -> np.ndarray:
    """Corners (tl, tr, br, bl) of a w x h box at (x, y) rotated about its center."""
    cx, cy = x + w / 2.0, y + h / 2.0
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    rel = np.array([(-w / 2, -h / 2), (w / 2, -h / 2),
                    (w / 2, h / 2), (-w / 2, h / 2)])
    return np.column_stack([cx + rel[:, 0] * cos_a - rel[:, 1] * sin_a,
                            cy + rel[:, 0] * sin_a + rel[:, 1] * cos_a])


def parse_msra_td500(annotation_text: str, image_id: str = "",
                     width: int | None = None, height: int | None = None) -> ParseResult:
    """Parse one MSRA-TD500 per-image annotation file.

    Each line is ``index difficulty x y w h angle`` with the angle in
    radians; difficulty 1 marks a don't-care region.  Rotated rectangles
    become canonical 4-vertex rings.
    """
    raw, diagnostics = [], []
    for line_no, line in enumerate(annotation_text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 7:
            diagnostics.append(f"line {line_no}: expected 7 fields, got {len(tokens)}")
            continue
        try:
            difficulty = int(tokens[1])
            x, y, w, h, angle = (float(t) for t in tokens[2:])
        except ValueError:
            diagnostics.append(f"line {line_no}: malformed numeric field")
            continue
        if w <= 0 or h <= 0:
            diagnostics.append(f"line {line_no}: non-positive rectangle size")
            continue
        ring = rotated_rect_corners(x, y, w, h, angle)
        raw.append((line_no, ring, None, difficulty == 1))
    return ParseResult(_build_image(raw, image_id, width, height, diagnostics),
                       diagnostics)


def _word_to_dict(poly: TextPolygon) -> dict:
    record: dict = {"vertices": [[float(x), float(y)] for x, y in poly.vertices]}
    if poly.transcription is not None:
        record["text"] = poly.transcription
    record["ignore"] = bool(poly.ignore)
    return record


def write_canonical(corpus: Corpus, path) -> None:
    """Write a corpus as canonical JSON lines (UTF-8, one image per line)."""
    with open(path, "w", encoding="utf-8") as f:
        for img in corpus.images:
            record = {
                "image_id": img.image_id,
                "width": img.width,
                "height": img.height,
                "words": [_word_to_dict(p) for p in img.polygons],
            }
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            f.write("\n")


def read_canonical(path, name: str | None = None) -> Corpus:
    """Read a canonical JSON-lines corpus; schema errors name the record.

    The corpus name is not part of the record schema and defaults to the
    file's stem.
    """
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0] or "corpus"
    images = []
    with open(path, "r", encoding="utf-8") as f:
        for index, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CanonicalFormatError(f"record {index}: invalid JSON: {exc}") from exc
            for key in ("image_id", "width", "height", "words"):
                if key not in record:
                    raise CanonicalFormatError(f"record {index}: missing field '{key}'")
            width, height = int(record["width"]), int(record["height"])
            polygons = []
            for w_idx, word in enumerate(record["words"]):
                if "vertices" not in word:
                    raise CanonicalFormatError(
                        f"record {index}: word {w_idx}: missing field 'vertices'")
                try:
                    ring = np.asarray(word["vertices"], dtype=np.float64)
                    poly = TextPolygon(_clamp(ring.reshape(-1, 2), width, height),
                                       word.get("text"), bool(word.get("ignore", False)))
                except (TypeError, ValueError) as exc:
                    raise CanonicalFormatError(
                        f"record {index}: word {w_idx}: {exc}") from exc
                polygons.append(poly)
            images.append(AnnotatedImage(str(record["image_id"]), width, height, polygons))
    return Corpus(name, images)


# --------------------------------------------------------------------------
# Synthetic swept-stroke corpus
# --------------------------------------------------------------------------

SYNTH_KINDS = ("straight", "rotated", "curved", "close_pair")

#: Boundary gap between the two words of a close pair, in stroke radii.
CLOSE_PAIR_GAP = 1.5


def _straight_ring(length: float, radius: float, angle: float = 0.0,
                   n_side: int = 7) -> np.ndarray:
    t = np.linspace(-length / 2.0, length / 2.0, n_side)
    up = np.column_stack([t, np.full(n_side, -radius)])
    down = np.column_stack([t, np.full(n_side, radius)])
    ring = np.vstack([up, down[::-1]])
    if angle:
        cos_a, sin_a = math.cos(angle), math.sin(angle)
        ring = ring @ np.array([[cos_a, sin_a], [-sin_a, cos_a]])
    return ring


def _curved_ring(length: float, radius: float, amplitude: float, phase: float,
                 n_side: int = 9) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n_side)
    x = (s - 0.5) * length
    y = amplitude * np.sin(math.pi * s + phase)
    dy = amplitude * math.pi * np.cos(math.pi * s + phase)
    norm = np.hypot(length, dy)
    nx, ny = -dy / norm, length / norm
    spine = np.column_stack([x, y - y.mean()])
    offset = radius * np.column_stack([nx, ny])
    return np.vstack([spine + offset, (spine - offset)[::-1]])


def _try_place(ring: np.ndarray, rng, width: int, height: int, pad: float,
               occupied: list[tuple[float, float, float, float]],
               attempts: int = 50) -> np.ndarray | None:
    """Translate a centered ring to a free spot; None when nothing fits."""
    lo, hi = ring.min(axis=0), ring.max(axis=0)
    half_w, half_h = (hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0
    x_lo, x_hi = pad + half_w, width - pad - half_w
    y_lo, y_hi = pad + half_h, height - pad - half_h
    if x_lo >= x_hi or y_lo >= y_hi:
        return None
    for _ in range(attempts):
        cx = rng.uniform(x_lo, x_hi)
        cy = rng.uniform(y_lo, y_hi)
        box = (cx - half_w - pad, cy - half_h - pad, cx + half_w + pad, cy + half_h + pad)
        if all(box[2] <= o[0] or box[0] >= o[2] or box[3] <= o[1] or box[1] >= o[3]
               for o in occupied):
            occupied.append(box)
            center = (lo + hi) / 2.0
            return ring - center + (cx, cy)
    return None


def _gen_words(rng, kind: str, width: int, height: int,
               max_words: int) -> list[TextPolygon]:
    if kind == "close_pair":
        radius = rng.uniform(8.0, 12.0)
        length = min(rng.uniform(8.0, 12.0) * radius, width - 8.0 * radius)
        offset = radius + CLOSE_PAIR_GAP * radius / 2.0
        top = _straight_ring(length, radius) - (0.0, offset)
        bottom = _straight_ring(length, radius) + (0.0, offset)
        pair = np.vstack([top, bottom])
        lo, hi = pair.min(axis=0), pair.max(axis=0)
        pad = 2.0 * radius + 16.0
        cx = rng.uniform(pad + (hi[0] - lo[0]) / 2.0, width - pad - (hi[0] - lo[0]) / 2.0)
        cy = rng.uniform(pad + (hi[1] - lo[1]) / 2.0, height - pad - (hi[1] - lo[1]) / 2.0)
        shift = np.array([cx, cy]) - (lo + hi) / 2.0
        return [TextPolygon(top + shift), TextPolygon(bottom + shift)]

    count = int(rng.integers(1, max_words + 1))
    occupied: list[tuple[float, float, float, float]] = []
    words = []
    for _ in range(count):
        radius = rng.uniform(8.0, 12.0)
        length = rng.uniform(8.0, 13.0) * radius
        if kind == "straight":
            ring = _straight_ring(length, radius)
        elif kind == "rotated":
            ring = _straight_ring(length, radius,
                                  angle=rng.uniform(-math.pi / 3.0, math.pi / 3.0))
        elif kind == "curved":
            ring = _curved_ring(length, radius,
                                amplitude=rng.uniform(0.5, 1.0) * radius,
                                phase=rng.uniform(0.0, math.pi))
        else:
            raise ValueError(f"unknown synthetic kind {kind!r}")
        placed = _try_place(ring, rng, width, height, pad=radius + 8.0,
                            occupied=occupied)
        if placed is not None:
            words.append(TextPolygon(placed))
    return words


def make_synthetic_corpus(n_images: int, kinds=SYNTH_KINDS, seed: int = 0,
                          width: int = 320, height: int = 320,
                          max_words: int = 6, name: str = "synthetic") -> Corpus:
    """Seed-deterministic corpus of swept-stroke words with known groundtruth.

    Image kinds cycle round-robin through ``kinds``; the kind is embedded in
    the image id (``curved_0002``), so subsets are selectable downstream.
    Close-pair images hold exactly two parallel words with a boundary gap of
    1.5 stroke radii.  Identical (n_images, kinds, seed, size) arguments
    always produce the identical corpus.
    """
    if n_images < 0:
        raise ValueError("n_images must be >= 0")
    if not kinds:
        raise ValueError("need at least one synthetic kind")
    for kind in kinds:
        if kind not in SYNTH_KINDS:
            raise ValueError(f"unknown synthetic kind {kind!r}")
    rng = np.random.default_rng(seed)
    images = []
    for i in range(n_images):
        kind = kinds[i % len(kinds)]
        words = _gen_words(rng, kind, width, height, max_words)
        images.append(AnnotatedImage(f"{kind}_{i:04d}", width, height, words))
    return Corpus(name, images)
