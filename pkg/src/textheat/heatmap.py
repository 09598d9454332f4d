"""Text-region heatmaps: Gaussian label rendering, loss terms, and file formats.

A heatmap assigns every pixel the probability of belonging to a text region.
Labels are produced by stamping an isotropic 2D Gaussian with peak 1.0 at
every rasterized skeleton pixel; the Gaussian width is tied to the local
half-stroke radius R so that the value at distance R is exactly 0.05, making
the region threshold coincide with the annotated stroke boundary.  Stamps
from all skeleton points and all words combine by per-pixel MAX, which keeps
values in [0, 1] without renormalization and keeps adjacent words separable.

Binary format "UHTH": magic ``UHTH``, little-endian u32 width, u32 height,
then width*height little-endian float32 values, row-major, origin top-left.
The 16-bit PGM export (values scaled by 65535, round half up, big-endian
sample bytes) is for interop and visual inspection only; UHTH is the
bit-exact interchange format.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import PolygonError, SkeletonError
from .raster import rasterize_polygon

#: Radius-to-sigma divisor: sigma = R / sqrt(2 ln 20) puts value 0.05 at distance R.
GAUSS_DIVISOR = math.sqrt(2.0 * math.log(20.0))

#: Stamp windows are cut where the Gaussian falls below 1e-4.
_STAMP_CUTOFF = math.sqrt(2.0 * math.log(1e4))

#: Binarization threshold defining the text region (and loss positives).
REGION_THRESHOLD = 0.05

#: Binarization threshold defining the text center.
CENTER_THRESHOLD = 0.9

_MAGIC = b"UHTH"


class HeatmapFormatError(ValueError):
    """A heatmap file is corrupt or violates the format contract."""


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Immutable dense grid of text-region probabilities in [0, 1]."""

    values: np.ndarray  # (height, width) float32

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise ValueError(f"heatmap values must be 2D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("heatmap contains non-finite values")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("heatmap values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def at(self, x: int, y: int) -> float:
        return float(self.values[y, x])

    @classmethod
    def zeros(cls, width: int, height: int) -> "Heatmap":
        return cls(np.zeros((height, width), dtype=np.float32))


@dataclass(frozen=True)
class LossBreakdown:
    """The three loss terms and their weighted total."""

    l_reg: float
    l_center: float
    l_region: float
    total: float


@dataclass(frozen=True, eq=False)
class RenderResult:
    """Rendered label heatmap plus the don't-care mask and skip diagnostics."""

    heatmap: Heatmap
    dont_care: np.ndarray          # (height, width) bool
    skipped: list[str]


def _stamp(field: np.ndarray, x: int, y: int, radius: float) -> None:
    h, w = field.shape
    sigma = radius / GAUSS_DIVISOR
    half = int(math.ceil(sigma * _STAMP_CUTOFF))
    x0, x1 = max(x - half, 0), min(x + half, w - 1)
    y0, y1 = max(y - half, 0), min(y + half, h - 1)
    if x0 > x1 or y0 > y1:
        return
    dx = np.arange(x0, x1 + 1) - x
    dy = np.arange(y0, y1 + 1) - y
    d2 = dx[None, :] ** 2 + dy[:, None] ** 2
    window = field[y0:y1 + 1, x0:x1 + 1]
    np.maximum(window, np.exp(d2 / (-2.0 * sigma * sigma)), out=window)


def render_skeletons(skeletons, width: int, height: int) -> np.ndarray:
    """MAX-combined Gaussian field for a set of skeletons, float64 in [0, 1]."""
    field = np.zeros((height, width), dtype=np.float64)
    for sk in skeletons:
        raster = geometry.rasterize_skeleton(sk)
        for (x, y), r in zip(raster.points, raster.radii):
            _stamp(field, int(x), int(y), float(r))
    return field


def render_groundtruth(polygons, width: int, height: int,
                       m: int = geometry.DEFAULT_SUBDIVISIONS) -> RenderResult:
    """Render the label heatmap for one image.

    Ignore-flagged polygons go into the separate don't-care mask (their filled
    footprint), not into the heatmap.  Polygons that fail the geometry
    preconditions are skipped and reported in ``skipped``, never silently.
    """
    if width <= 0 or height <= 0:
        raise ValueError("canvas dimensions must be positive")
    field = np.zeros((height, width), dtype=np.float64)
    dont_care = np.zeros((height, width), dtype=bool)
    skipped: list[str] = []
    for idx, poly in enumerate(polygons):
        if poly.ignore:
            if len(poly.vertices) >= 3 and geometry.polygon_area(poly.vertices) > 0:
                dont_care |= rasterize_polygon(poly.vertices, width, height)
            else:
                skipped.append(f"polygon {idx}: degenerate ignore region")
            continue
        try:
            sk = geometry.build_skeleton(poly, m=m, source_polygon_index=idx)
        except (PolygonError, SkeletonError) as exc:
            skipped.append(f"polygon {idx}: {exc}")
            continue
        raster = geometry.rasterize_skeleton(sk)
        for (x, y), r in zip(raster.points, raster.radii):
            _stamp(field, int(x), int(y), float(r))
    return RenderResult(Heatmap(field.astype(np.float32)), dont_care, skipped)


def _flat_pair(pred: Heatmap, gt: Heatmap, ignore: np.ndarray | None):
    if pred.values.shape != gt.values.shape:
        raise ValueError(f"heatmap shapes differ: {pred.values.shape} vs {gt.values.shape}")
    p = pred.values.astype(np.float64).ravel()
    g = gt.values.astype(np.float64).ravel()
    if ignore is not None:
        if ignore.shape != gt.values.shape:
            raise ValueError("ignore mask shape differs from heatmaps")
        keep = ~ignore.ravel()
        p, g = p[keep], g[keep]
    return p, g


def loss_reg(pred: Heatmap, gt: Heatmap, positive_threshold: float = REGION_THRESHOLD,
             *, ignore: np.ndarray | None = None, use_sums: bool = False) -> float:
    """Class-weighted squared-error regression loss.

    Positives are groundtruth pixels above ``positive_threshold``.  Each
    class's error is weighted by the opposite class's pixel share, which
    rebalances the text/background imbalance.  By default the squared errors
    are averaged per class so the two terms stay commensurate; ``use_sums``
    switches to raw per-class sums.  When only one class is present the loss
    degrades to the plain (weight 1) error statistic over that class.
    """
    p, g = _flat_pair(pred, gt, ignore)
    if p.size == 0:
        return 0.0
    text = g > positive_threshold
    n_text = int(text.sum())
    n_bg = p.size - n_text
    err = (p - g) ** 2

    def stat(values: np.ndarray) -> float:
        if values.size == 0:
            return 0.0
        return float(values.sum()) if use_sums else float(values.mean())

    if n_text == 0 or n_bg == 0:
        return stat(err)
    n = n_text + n_bg
    return (n_text / n) * stat(err[~text]) + (n_bg / n) * stat(err[text])


def loss_dice(pred: Heatmap, gt: Heatmap, threshold: float,
              *, ignore: np.ndarray | None = None) -> float:
    """Dice loss between the maps binarized at ``threshold`` (strictly greater).

    Returns 1 - 2|P&G| / (|P|+|G|); defined as 0 when both sets are empty so a
    perfect blank prediction scores perfectly.
    """
    p, g = _flat_pair(pred, gt, ignore)
    pm = p > threshold
    gm = g > threshold
    total = int(pm.sum()) + int(gm.sum())
    if total == 0:
        return 0.0
    inter = int((pm & gm).sum())
    return 1.0 - 2.0 * inter / total


def loss_total(pred: Heatmap, gt: Heatmap, lambda1: float = 1.0, lambda2: float = 1.0,
               *, ignore: np.ndarray | None = None, use_sums: bool = False) -> LossBreakdown:
    """Combined loss: regression term plus weighted center and region dice terms."""
    l_reg = loss_reg(pred, gt, REGION_THRESHOLD, ignore=ignore, use_sums=use_sums)
    l_center = loss_dice(pred, gt, CENTER_THRESHOLD, ignore=ignore)
    l_region = loss_dice(pred, gt, REGION_THRESHOLD, ignore=ignore)
    total = l_reg + lambda1 * l_center + lambda2 * l_region
    return LossBreakdown(l_reg, l_center, l_region, total)


def write_uhth(heatmap: Heatmap, path) -> None:
    """Write the bit-exact binary heatmap format."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", heatmap.width, heatmap.height))
        f.write(np.ascontiguousarray(heatmap.values, dtype="<f4").tobytes())


def read_uhth(path) -> Heatmap:
    """Read the binary heatmap format; raises HeatmapFormatError naming the file."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise HeatmapFormatError(f"{path}: bad magic {magic!r}")
        header = f.read(8)
        if len(header) != 8:
            raise HeatmapFormatError(f"{path}: truncated header")
        width, height = struct.unpack("<II", header)
        payload = f.read()
    expected = 4 * width * height
    if len(payload) != expected:
        raise HeatmapFormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    try:
        return Heatmap(values)
    except ValueError as exc:
        raise HeatmapFormatError(f"{path}: {exc}") from exc


def write_pgm16(heatmap: Heatmap, path) -> None:
    """Export as 16-bit binary PGM, values scaled by 65535 with round half up."""
    scaled = np.floor(heatmap.values.astype(np.float64) * 65535.0 + 0.5)
    samples = scaled.astype(">u2")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n65535\n" % (heatmap.width, heatmap.height))
        f.write(samples.tobytes())


def read_pgm16(path) -> Heatmap:
    """Read a 16-bit binary PGM written by write_pgm16 (or compatible)."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise HeatmapFormatError(f"{path}: not a binary PGM file")
    # Header: P5, width, height, maxval as whitespace-separated tokens,
    # optional '#' comment lines, then a single whitespace before the samples.
    pos, tokens = 2, []
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise HeatmapFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace separating header from samples
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise HeatmapFormatError(f"{path}: malformed PGM header") from exc
    if maxval != 65535:
        raise HeatmapFormatError(f"{path}: expected maxval 65535, got {maxval}")
    expected = 2 * width * height
    payload = data[pos:pos + expected]
    if len(payload) != expected:
        raise HeatmapFormatError(f"{path}: truncated PGM payload")
    samples = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    return Heatmap((samples.astype(np.float64) / 65535.0).astype(np.float32))
