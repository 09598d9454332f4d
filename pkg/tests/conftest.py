"""Shared helpers for the test suite: small independent geometry oracles."""

import numpy as np


def point_in_polygon(point, ring) -> bool:
    """Even-odd point-in-polygon test in continuous coordinates."""
    x, y = float(point[0]), float(point[1])
    v = np.asarray(ring, dtype=np.float64)
    inside = False
    n = len(v)
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def segment_distance(point, a, b) -> float:
    """Distance from a point to the closed segment a-b."""
    p = np.asarray(point, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(a + t * ab - p))


def point_strictly_inside(point, ring, margin: float = 1e-9) -> bool:
    """Inside by the even-odd rule and farther than ``margin`` from every edge."""
    if not point_in_polygon(point, ring):
        return False
    v = np.asarray(ring, dtype=np.float64)
    n = len(v)
    return all(segment_distance(point, v[i], v[(i + 1) % n]) > margin
               for i in range(n))


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Set pixels with an unset 4-neighbor or on the grid border."""
    pad = np.pad(mask, 1, constant_values=False)
    exposed = (~pad[1:-1, :-2] | ~pad[1:-1, 2:]
               | ~pad[:-2, 1:-1] | ~pad[2:, 1:-1])
    return mask & exposed
