"""Word-polygon geometry: vertex pairing, subdivision, and skeleton extraction.

A word region is annotated as a ring of K vertices (K even, K >= 4): the
first K/2 vertices walk one long side of the word in reading order, the last
K/2 walk the opposite side backwards, so vertex i faces vertex K-1-i across
the stroke.  Pairing those vertices, refining the pairing, averaging each
pair, and trimming the ends yields the word's center-line skeleton together
with a local half-stroke radius at every center point.

Coordinates are continuous (x, y) pixels until ``rasterize_skeleton``, which
rounds to the integer grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

#: Quadrilateral subdivision factor used when none is given explicitly.
DEFAULT_SUBDIVISIONS = 5

#: Lower bound applied to skeleton radii; avoids zero-width stamp singularities.
MIN_RADIUS = 0.5


class PolygonError(ValueError):
    """The vertex ring violates the word-polygon invariants."""


class SkeletonError(ValueError):
    """A skeleton could not be built from the given center points."""


@dataclass(frozen=True, eq=False)
class TextPolygon:
    """One annotated word region.

    ``vertices`` is a (K, 2) float array in ring order.  ``ignore`` marks
    don't-care regions that are excluded from losses and matching.
    """

    vertices: np.ndarray
    transcription: str | None = None
    ignore: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise PolygonError(f"vertices must be (K, 2), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise PolygonError("vertices contain non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True, eq=False)
class VertexPairs:
    """Facing (up, down) vertex pairs spanning the stroke, in reading order."""

    up: np.ndarray
    down: np.ndarray

    def __post_init__(self):
        if self.up.shape != self.down.shape or self.up.ndim != 2:
            raise ValueError("up/down must be equally shaped (n, 2) arrays")

    def __len__(self) -> int:
        return len(self.up)


@dataclass(frozen=True, eq=False)
class TextSkeleton:
    """Trimmed center-line points with one radius per point."""

    centers: np.ndarray
    radii: np.ndarray
    source_polygon_index: int = 0

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        r = np.asarray(self.radii, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 2 or r.shape != (len(c),):
            raise SkeletonError("centers must be (n, 2) with matching radii (n,)")
        if len(c) < 1:
            raise SkeletonError("skeleton needs at least one center point")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
            raise SkeletonError("skeleton contains non-finite values")
        if np.any(r <= 0):
            raise SkeletonError("all radii must be positive")
        c.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    def __len__(self) -> int:
        return len(self.centers)


@dataclass(frozen=True, eq=False)
class SkeletonRaster:
    """Integer skeleton pixels with interpolated radii, 8-connected in order."""

    points: np.ndarray   # (n, 2) int64, (x, y)
    radii: np.ndarray    # (n,) float64

    def __len__(self) -> int:
        return len(self.points)


def polygon_area(vertices: np.ndarray) -> float:
    """Unsigned shoelace area of a vertex ring."""
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def pair_vertices(poly: TextPolygon) -> VertexPairs:
    """Pair vertex i with vertex K-1-i across the stroke.

    Raises PolygonError for odd K, K < 4, or zero-area rings.
    """
    v = poly.vertices
    k = len(v)
    if k < 4:
        raise PolygonError(f"polygon needs at least 4 vertices, got {k}")
    if k % 2 != 0:
        raise PolygonError(f"polygon needs an even vertex count, got {k}")
    if polygon_area(v) <= 0.0:
        raise PolygonError("polygon has zero area")
    half = k // 2
    return VertexPairs(up=v[:half].copy(), down=v[::-1][:half].copy())


def subdivide(pairs: VertexPairs, m: int) -> VertexPairs:
    """Split each quadrilateral between adjacent pairs into m equal parts.

    Inserts m-1 interpolated pairs per quadrilateral on both the up and the
    down chain; original pairs are preserved exactly and in order.  With n
    input pairs the output has n + (n-1)*(m-1) pairs.
    """
    if m < 1:
        raise ValueError(f"subdivision factor must be >= 1, got {m}")
    n = len(pairs)
    if m == 1 or n < 2:
        return VertexPairs(pairs.up.copy(), pairs.down.copy())
    up_out = [pairs.up[0]]
    down_out = [pairs.down[0]]
    fractions = np.arange(1, m) / m
    for q in range(n - 1):
        u0, u1 = pairs.up[q], pairs.up[q + 1]
        d0, d1 = pairs.down[q], pairs.down[q + 1]
        for t in fractions:
            up_out.append((1.0 - t) * u0 + t * u1)
            down_out.append((1.0 - t) * d0 + t * d1)
        up_out.append(u1)
        down_out.append(d1)
    return VertexPairs(np.array(up_out), np.array(down_out))


def center_points(pairs: VertexPairs) -> np.ndarray:
    """Midpoint of every pair: one center point per stroke cross-section."""
    if len(pairs) == 0:
        raise ValueError("no pairs given")
    return (pairs.up + pairs.down) / 2.0


def radii(pairs: VertexPairs) -> np.ndarray:
    """Half-stroke radius per pair: mean distance from the midpoint to its ends."""
    if len(pairs) == 0:
        raise ValueError("no pairs given")
    centers = (pairs.up + pairs.down) / 2.0
    d_up = np.linalg.norm(pairs.up - centers, axis=1)
    d_down = np.linalg.norm(pairs.down - centers, axis=1)
    return (d_up + d_down) / 2.0


def trim_skeleton(centers: np.ndarray, radius_values: np.ndarray,
                  source_polygon_index: int = 0) -> TextSkeleton:
    """Drop the two leading and two trailing center points.

    Requires at least 5 points so at least one survives; radii are floored at
    MIN_RADIUS before construction.
    """
    c = np.asarray(centers, dtype=np.float64)
    r = np.asarray(radius_values, dtype=np.float64)
    if len(c) != len(r):
        raise SkeletonError("centers and radii lengths differ")
    if len(c) < 5:
        raise SkeletonError(
            f"polygon {source_polygon_index}: only {len(c)} center points, "
            "need at least 5 to trim")
    return TextSkeleton(c[2:-2], np.maximum(r[2:-2], MIN_RADIUS),
                        source_polygon_index)


def build_skeleton(poly: TextPolygon, m: int = DEFAULT_SUBDIVISIONS,
                   source_polygon_index: int = 0) -> TextSkeleton:
    """Full polygon-to-skeleton path: pair, subdivide, average, trim.

    Rings too short to trim keep their middle pair(s) untrimmed instead of
    being dropped, so short words still contribute to recall.
    """
    pairs = subdivide(pair_vertices(poly), m)
    centers = center_points(pairs)
    radius_values = radii(pairs)
    n = len(centers)
    if n >= 5:
        return trim_skeleton(centers, radius_values, source_polygon_index)
    logger.warning("polygon %d: %d center points, keeping middle pair(s) untrimmed",
                   source_polygon_index, n)
    lo, hi = (n - 1) // 2, n // 2 + 1
    return TextSkeleton(centers[lo:hi], np.maximum(radius_values[lo:hi], MIN_RADIUS),
                        source_polygon_index)


def bresenham_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line pixels from (x0, y0) to (x1, y1), both endpoints included."""
    points = []
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            return points
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def rasterize_skeleton(skeleton: TextSkeleton) -> SkeletonRaster:
    """All integer skeleton pixels, radii interpolated along each segment.

    Centers are rounded half-up to the pixel grid; consecutive centers are
    joined with Bresenham segments, the shared junction pixel is emitted once,
    and each pixel's radius is the linear blend of its segment's endpoint
    radii by fractional position along the segment.
    """
    grid = np.floor(skeleton.centers + 0.5).astype(np.int64)
    out_pts: list[tuple[int, int]] = [(int(grid[0, 0]), int(grid[0, 1]))]
    out_radii: list[float] = [float(skeleton.radii[0])]
    for i in range(len(grid) - 1):
        seg = bresenham_line(int(grid[i, 0]), int(grid[i, 1]),
                             int(grid[i + 1, 0]), int(grid[i + 1, 1]))
        r0, r1 = float(skeleton.radii[i]), float(skeleton.radii[i + 1])
        n = len(seg)
        for j in range(1, n):
            t = j / (n - 1)
            out_pts.append(seg[j])
            out_radii.append(r0 + t * (r1 - r0))
    return SkeletonRaster(np.array(out_pts, dtype=np.int64),
                          np.array(out_radii, dtype=np.float64))


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_cross(p0, p1, q0, q1) -> bool:
    """True when the open segments properly intersect (shared endpoints do not count)."""
    d1 = _orient(q0, q1, p0)
    d2 = _orient(q0, q1, p1)
    d3 = _orient(p0, p1, q0)
    d4 = _orient(p0, p1, q1)
    if 0.0 in (d1, d2, d3, d4):
        return False
    return (d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0)


def pairing_is_valid(vertices: np.ndarray) -> bool:
    """Check that pairing vertex i with K-1-i gives non-crossing cross-sections.

    Rings annotated in a traversal order other than the expected one produce
    pair segments that cross each other; parsers use this to pick the right
    normalization of a native ring.
    """
    v = np.asarray(vertices, dtype=np.float64)
    k = len(v)
    if k < 4 or k % 2 != 0:
        return False
    half = k // 2
    segs = [(v[i], v[k - 1 - i]) for i in range(half)]
    for i in range(half):
        for j in range(i + 1, half):
            if _segments_cross(segs[i][0], segs[i][1], segs[j][0], segs[j][1]):
                return False
    return True
