"""Deterministic binary-grid primitives: components, centroids, contours, dilation.

Masks are (height, width) bool arrays throughout the package; coordinates are
(x, y) with x as the column index.  Every operation here is a pure function
with bit-identical output for identical input, so results are reproducible
across runs and thread counts.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_CONN4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_CONN8 = np.ones((3, 3), dtype=bool)

# Moore neighborhood in clockwise order (screen coordinates, y down),
# starting at west: W NW N NE E SE S SW.
_MOORE = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def connected_components(mask: np.ndarray, connectivity: int = 8) -> list[np.ndarray]:
    """Split set pixels into maximal connected components.

    Components are returned as full-size masks ordered by their first pixel
    in row-major scan order, which makes the partition deterministic.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = _CONN8 if connectivity == 8 else _CONN4
    labels, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return []
    flat = labels.ravel()
    nonzero = np.flatnonzero(flat)
    values, first = np.unique(flat[nonzero], return_index=True)
    ordered = values[np.argsort(first)]
    return [labels == value for value in ordered]


def centroid(mask: np.ndarray) -> tuple[int, int]:
    """Mean of set-pixel coordinates, snapped to the nearest set pixel.

    Snapping keeps the result inside concave components; ties are broken by
    row-major order.  Raises ValueError on an empty mask.
    """
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("centroid of an empty mask")
    mx, my = xs.mean(), ys.mean()
    d2 = (xs - mx) ** 2 + (ys - my) ** 2
    i = int(np.argmin(d2))  # argmin takes the first minimum -> row-major tie-break
    return int(xs[i]), int(ys[i])


def _moore_scan(mask: np.ndarray, cur: tuple, back: tuple):
    """First set pixel clockwise around ``cur`` starting after ``back``.

    Returns (next, new_back) where new_back is the unset cell scanned just
    before the hit, or None when cur has no set neighbor.
    """
    h, w = mask.shape
    base = _MOORE_INDEX[(back[0] - cur[0], back[1] - cur[1])]
    for j in range(1, 9):
        dx, dy = _MOORE[(base + j) % 8]
        cx, cy = cur[0] + dx, cur[1] + dy
        if 0 <= cx < w and 0 <= cy < h and mask[cy, cx]:
            pdx, pdy = _MOORE[(base + j - 1) % 8]
            return (cx, cy), (cur[0] + pdx, cur[1] + pdy)
    return None


def trace_contour(mask: np.ndarray) -> np.ndarray:
    """Outer boundary ring of a single 8-connected component, clockwise.

    Moore-neighbor tracing from the top-left-most set pixel.  The walk stops
    when, standing on the start pixel, it is about to repeat its first move;
    plain revisits of the start pixel (thin diagonal limbs) keep the walk
    going.  The ring is closed by 8-adjacency from its last point back to its
    first; a single pixel yields a one-point ring.  Raises ValueError when the
    mask is empty or has more than one component.
    """
    _, count = ndimage.label(mask, structure=_CONN8)
    if count == 0:
        raise ValueError("cannot trace an empty mask")
    if count != 1:
        raise ValueError(f"mask has {count} components, expected exactly 1")
    ys, xs = np.nonzero(mask)
    start = (int(xs[0]), int(ys[0]))
    west = (start[0] - 1, start[1])  # virtual entry; west of the start is unset
    first = _moore_scan(mask, start, west)
    if first is None:
        return np.array([start], dtype=np.int64)
    first_next, back = first
    ring = [start, first_next]
    cur = first_next
    max_steps = 8 * len(xs) + 16
    for _ in range(max_steps):
        nxt, new_back = _moore_scan(mask, cur, back)
        if cur == start and nxt == first_next:
            break  # the full boundary cycle is complete
        ring.append(nxt)
        cur, back = nxt, new_back
    else:
        raise RuntimeError("contour tracing did not terminate")
    if len(ring) > 1 and ring[-1] == start:
        ring.pop()
    return np.array(ring, dtype=np.int64)


def _dilate_axis(mask: np.ndarray, k: int, axis: int) -> np.ndarray:
    a = k // 2
    n = mask.shape[axis]
    out = np.zeros_like(mask)
    for d in range(-a, k - a):
        if d >= 0:
            src, dst = slice(0, n - d), slice(d, n)
        else:
            src, dst = slice(-d, n), slice(0, n + d)
        if axis == 0:
            out[dst, :] |= mask[src, :]
        else:
            out[:, dst] |= mask[:, src]
    return out


def dilate(mask: np.ndarray, k: int) -> np.ndarray:
    """Morphological dilation with a k x k square element, clipped at borders.

    The element is anchored at floor(k/2), so every set pixel p turns on the
    window p - floor(k/2) .. p + k - 1 - floor(k/2) along both axes.  The
    square is separable, so the dilation runs as two 1-D passes.
    """
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    if k == 1:
        return mask.copy()
    return _dilate_axis(_dilate_axis(mask, k, axis=0), k, axis=1)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background pockets not connected to the border."""
    return ndimage.binary_fill_holes(mask)


def rasterize_polygon(vertices: np.ndarray, width: int, height: int,
                      scale: float = 1.0) -> np.ndarray:
    """Even-odd scan fill of a polygon on a pixel grid.

    Pixel (x, y) covers the unit cell centered at integer (x, y); at scale 1
    the sample point is exactly that center, at higher scales each pixel cell
    is sampled scale x scale times.  Returns a (height*scale, width*scale)
    bool array.
    """
    v = np.asarray(vertices, dtype=np.float64)
    nx = max(1, int(round(width * scale)))
    ny = max(1, int(round(height * scale)))
    px = (np.arange(nx) + 0.5) / scale - 0.5
    py = (np.arange(ny) + 0.5) / scale - 0.5
    inside = np.zeros((ny, nx), dtype=bool)
    if len(v) < 3:
        return inside
    n = len(v)
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        if y1 == y2:
            continue
        straddle = (y1 > py) != (y2 > py)
        if not straddle.any():
            continue
        xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= straddle[:, None] & (px[None, :] < xc[:, None])
    return inside
