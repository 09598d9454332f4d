"""Raster primitive tests, each against an independent brute-force oracle."""

import numpy as np
import pytest
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from conftest import boundary_pixels
from textheat.raster import (centroid, connected_components, dilate, fill_holes,
                             rasterize_polygon, trace_contour)


def cc_oracle(mask: np.ndarray, connectivity: int) -> list[frozenset]:
    """Union-find partition of set pixels, independent of the implementation."""
    h, w = mask.shape
    parent = {}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    pixels = [(x, y) for y in range(h) for x in range(w) if mask[y, x]]
    for p in pixels:
        parent[p] = p
    if connectivity == 4:
        offsets = [(1, 0), (0, 1)]
    else:
        offsets = [(1, 0), (0, 1), (1, 1), (-1, 1)]
    for x, y in pixels:
        for dx, dy in offsets:
            q = (x + dx, y + dy)
            if 0 <= q[0] < w and 0 <= q[1] < h and mask[q[1], q[0]]:
                union((x, y), q)
    groups = {}
    for p in pixels:
        groups.setdefault(find(p), set()).add(p)
    return [frozenset(g) for g in groups.values()]


def dilate_oracle(mask: np.ndarray, k: int) -> np.ndarray:
    """Per-pixel window-max over the anchored k x k neighborhood."""
    a = k // 2
    padded = np.pad(mask, ((k - 1 - a, a), (k - 1 - a, a)), constant_values=False)
    return sliding_window_view(padded, (k, k)).any(axis=(2, 3))


def random_mask(rng, size: int, density: float = 0.35) -> np.ndarray:
    return rng.random((size, size)) < density


class TestConnectedComponents:
    def test_empty(self):
        assert connected_components(np.zeros((4, 4), bool)) == []

    def test_diagonal_adjacency(self):
        mask = np.zeros((4, 4), bool)
        mask[1, 1] = mask[2, 2] = True
        assert len(connected_components(mask, 4)) == 2
        assert len(connected_components(mask, 8)) == 1

    def test_rejects_bad_connectivity(self):
        with pytest.raises(ValueError):
            connected_components(np.zeros((2, 2), bool), 6)

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_union_find_oracle(self, connectivity):
        rng = np.random.default_rng(11)
        for _ in range(100):
            mask = random_mask(rng, 32)
            comps = connected_components(mask, connectivity)
            got = {frozenset((int(x), int(y)) for y, x in np.argwhere(c))
                   for c in comps}
            assert got == set(cc_oracle(mask, connectivity))

    def test_partition_properties(self):
        rng = np.random.default_rng(12)
        mask = random_mask(rng, 48)
        comps = connected_components(mask, 8)
        union = np.zeros_like(mask)
        for c in comps:
            assert not (union & c).any()  # pairwise disjoint
            union |= c
        assert np.array_equal(union, mask)

    def test_ordered_by_topleft_pixel(self):
        mask = np.zeros((6, 6), bool)
        mask[4, 1] = True   # scan-order later
        mask[0, 5] = True   # scan-order first
        comps = connected_components(mask, 8)
        assert comps[0][0, 5] and comps[1][4, 1]


class TestCentroid:
    def test_single_pixel(self):
        mask = np.zeros((10, 10), bool)
        mask[7, 3] = True
        assert centroid(mask) == (3, 7)

    def test_solid_block(self):
        mask = np.zeros((5, 5), bool)
        mask[0:3, 0:3] = True
        assert centroid(mask) == (1, 1)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            centroid(np.zeros((3, 3), bool))

    def test_concave_component_snaps_to_nearest_set_pixel(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            mask = random_mask(rng, 16, density=0.3)
            if not mask.any():
                continue
            cx, cy = centroid(mask)
            assert mask[cy, cx]
            ys, xs = np.nonzero(mask)
            mx, my = xs.mean(), ys.mean()
            d2 = (xs - mx) ** 2 + (ys - my) ** 2
            best = d2.min()
            assert (cx - mx) ** 2 + (cy - my) ** 2 == pytest.approx(best)


class TestTraceContour:
    def test_single_pixel_ring(self):
        mask = np.zeros((5, 5), bool)
        mask[2, 2] = True
        assert np.array_equal(trace_contour(mask), [[2, 2]])

    def test_solid_block_border(self):
        mask = np.zeros((5, 5), bool)
        mask[1:4, 1:4] = True
        ring = trace_contour(mask)
        assert len(ring) == 8
        expected = {(x, y) for x in (1, 2, 3) for y in (1, 2, 3)} - {(2, 2)}
        assert {tuple(p) for p in ring} == expected

    def test_empty_and_multicomponent_raise(self):
        with pytest.raises(ValueError):
            trace_contour(np.zeros((3, 3), bool))
        two = np.zeros((5, 5), bool)
        two[0, 0] = two[4, 4] = True
        with pytest.raises(ValueError):
            trace_contour(two)

    def test_ring_is_closed_and_8_connected(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            mask = fill_holes(dilate(random_mask(rng, 24, 0.06), 3))
            comps = connected_components(mask, 8)
            if not comps:
                continue
            ring = trace_contour(comps[0])
            rolled = np.roll(ring, -1, axis=0)
            assert np.abs(ring - rolled).max() <= 1

    def test_every_small_component_terminates(self):
        # exhaustive 3x3 sweep plus random 4x4/5x5: thin diagonal limbs used
        # to defeat the stopping rule, so every shape must terminate cleanly
        def check(mask):
            _, count = ndimage.label(mask, structure=np.ones((3, 3)))
            if count != 1:
                return
            ring = trace_contour(mask)
            assert all(mask[y, x] for x, y in ring)
            filled = fill_holes(mask)
            if np.array_equal(filled, mask):
                expected = {(int(x), int(y))
                            for y, x in np.argwhere(boundary_pixels(mask))}
                assert {tuple(p) for p in ring} == expected

        for bits in range(1, 512):
            mask = np.array([(bits >> i) & 1 for i in range(9)],
                            dtype=bool).reshape(3, 3)
            check(mask)
        rng = np.random.default_rng(19)
        for _ in range(2000):
            size = int(rng.integers(4, 6))
            check(rng.random((size, size)) < 0.5)

    def test_boundary_predicate_both_directions(self):
        rng = np.random.default_rng(15)
        for _ in range(60):
            mask = fill_holes(dilate(random_mask(rng, 32, 0.04), 3))
            comps = connected_components(mask, 8)
            if not comps:
                continue
            component = comps[0]
            ring = {tuple(p) for p in trace_contour(component)}
            expected = {(int(x), int(y))
                        for y, x in np.argwhere(boundary_pixels(component))}
            assert ring == expected


class TestDilate:
    def test_k1_identity(self):
        rng = np.random.default_rng(16)
        mask = random_mask(rng, 16)
        assert np.array_equal(dilate(mask, 1), mask)

    def test_single_pixel_k3(self):
        mask = np.zeros((7, 7), bool)
        mask[3, 3] = True
        out = dilate(mask, 3)
        expected = np.zeros((7, 7), bool)
        expected[2:5, 2:5] = True
        assert np.array_equal(out, expected)

    def test_clipped_at_borders(self):
        mask = np.zeros((4, 4), bool)
        mask[0, 0] = True
        out = dilate(mask, 3)
        expected = np.zeros((4, 4), bool)
        expected[0:2, 0:2] = True
        assert np.array_equal(out, expected)

    def test_rejects_bad_kernel(self):
        with pytest.raises(ValueError):
            dilate(np.zeros((2, 2), bool), 0)

    @pytest.mark.parametrize("k", list(range(2, 10)) + [35])
    def test_matches_window_oracle(self, k):
        rng = np.random.default_rng(17 + k)
        for _ in range(25):
            mask = random_mask(rng, 64, density=0.1)
            assert np.array_equal(dilate(mask, k), dilate_oracle(mask, k))

    def test_extensive_and_monotone(self):
        rng = np.random.default_rng(18)
        small = random_mask(rng, 32, 0.1)
        big = small | random_mask(rng, 32, 0.1)
        for k in (2, 3, 5):
            d_small = dilate(small, k)
            assert (d_small | small).sum() == d_small.sum()        # output >= input
            assert (dilate(big, k) | d_small).sum() == dilate(big, k).sum()
            larger = dilate(small, k + 2)
            assert (larger | d_small).sum() == larger.sum()        # monotone in k


class TestFillHoles:
    def test_hollow_square_filled(self):
        mask = np.zeros((8, 8), bool)
        mask[1:7, 1:7] = True
        mask[3:5, 3:5] = False
        expected = np.zeros((8, 8), bool)
        expected[1:7, 1:7] = True
        assert np.array_equal(fill_holes(mask), expected)

    def test_open_bay_not_filled(self):
        mask = np.zeros((6, 6), bool)
        mask[0:6, 0] = mask[0:6, 4] = mask[0, 0:5] = True  # U shape open at bottom
        assert np.array_equal(fill_holes(mask), mask)


class TestRasterizePolygon:
    def test_pixel_center_rule(self):
        ring = [(-0.5, -0.5), (9.5, -0.5), (9.5, 9.5), (-0.5, 9.5)]
        mask = rasterize_polygon(ring, 12, 12)
        assert mask.sum() == 100
        assert mask[0, 0] and mask[9, 9] and not mask[10, 10]

    def test_triangle_area_approximation(self):
        ring = [(0, 0), (40, 0), (0, 40)]
        mask = rasterize_polygon(ring, 48, 48)
        assert abs(mask.sum() - 800) / 800 < 0.05

    def test_scale_refines_sampling(self):
        ring = [(0.25, 0.25), (3.3, 0.25), (3.3, 2.75), (0.25, 2.75)]
        coarse = rasterize_polygon(ring, 5, 4, scale=1)
        fine = rasterize_polygon(ring, 5, 4, scale=8)
        exact = (3.3 - 0.25) * (2.75 - 0.25)
        assert abs(fine.sum() / 64.0 - exact) < abs(float(coarse.sum()) - exact) + 1e-9
