import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilenet.core import supertile
from tilenet.errors import DegeneratePolygon
from tilenet.geometry import (
    CellCounter,
    CubeUnion,
    GridIndex,
    Window,
    boundary_measure,
    clipped_area,
    inner_layer_estimate,
    inner_layer_measure,
    polygon_area,
    polygon_intersects_rect,
    tiles_inside,
    tiles_meeting,
)
from tilenet.net import extract_net


def test_polygon_areas():
    assert polygon_area([(0, 0), (1, 0), (1, 1), (0, 1)]) == 1.0
    assert polygon_area([(0, 0), (1, 0), (0, 1)]) == 0.5


def test_degenerate_polygon():
    with pytest.raises(DegeneratePolygon):
        polygon_area([(0, 0), (1, 1), (2, 2)])


@pytest.mark.parametrize("cells,perimeter", [([(0, 0)], 4), ([(0, 0), (1, 0)], 6), ([(0, 0), (1, 0), (0, 1), (1, 1)], 8)])
def test_boundary_measure(cells, perimeter):
    assert boundary_measure(CubeUnion(cells)) == perimeter


cell_sets = st.sets(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=40)


@given(cell_sets, st.integers(-100, 100), st.integers(-100, 100))
def test_boundary_measure_translation_invariant(cells, dx, dy):
    U = CubeUnion(cells)
    assert boundary_measure(U.translated(dx, dy)) == boundary_measure(U)


@given(cell_sets)
def test_cube_union_text_roundtrip(cells):
    U = CubeUnion(cells)
    assert set(CubeUnion.from_text(U.to_text())) == set(U)


@pytest.mark.parametrize(
    "cells,s,expected",
    [([(0, 0)], 0.5, 1.0), ([(0, 0)], 0.75, 1.0), ([(0, 0)], 0.25, 0.75), ([(0, 0), (1, 0), (0, 1), (1, 1)], 0.5, 3.0)],
)
def test_inner_layer_measure(cells, s, expected):
    est = inner_layer_estimate(CubeUnion(cells), s, seed=3)
    assert est.value == pytest.approx(expected, rel=0.02)
    assert est.stderr <= 0.01 * expected


def test_inner_layer_measure_seeded():
    U = CubeUnion([(0, 0), (1, 0), (1, 1)])
    assert inner_layer_measure(U, 0.3, seed=5) == inner_layer_measure(U, 0.3, seed=5)


def test_inner_layer_ratio_bounded():
    from tilenet.discrepancy import random_polyomino

    rng = np.random.default_rng(11)
    for n in (10, 100, 1000):
        U = random_polyomino(n, rng)
        for s in (0.25, 0.5, 1.0):
            ratio = inner_layer_measure(U, s, samples_per_cell=256, seed=n) / (s * boundary_measure(U))
            assert ratio <= 2.0


def test_grid_index_matches_linear_scan():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-20, 20, (1000, 2))
    idx = GridIndex(pts, 1.7)
    for _ in range(100):
        x0, y0 = rng.uniform(-25, 20, 2)
        w, h = rng.uniform(0, 15, 2)
        want = np.flatnonzero((pts[:, 0] >= x0) & (pts[:, 0] <= x0 + w) & (pts[:, 1] >= y0) & (pts[:, 1] <= y0 + h))
        assert sorted(idx.query_rect(x0, y0, x0 + w, y0 + h).tolist()) == want.tolist()
        assert idx.count_rect(x0, y0, x0 + w, y0 + h) == len(want)


def test_grid_index_each_point_in_one_bucket():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 10, (300, 2))
    idx = GridIndex(pts, 0.9)
    seen = np.concatenate([idx.bucket(k) for k in idx.buckets])
    assert sorted(seen.tolist()) == list(range(300))


def test_cell_counter_matches_direct_count():
    rng = np.random.default_rng(2)
    pts = rng.uniform(0, 30, (2000, 2))
    cc = CellCounter(pts)
    xs, ys = rng.integers(0, 20, 50), rng.integers(0, 20, 50)
    got = cc.count_squares(xs, ys, 8)
    for x, y, g in zip(xs, ys, got):
        inside = (pts[:, 0] >= x) & (pts[:, 0] < x + 8) & (pts[:, 1] >= y) & (pts[:, 1] < y + 8)
        assert g == inside.sum()


def test_window_contains_tolerance():
    w = Window(0.0, 0.0, 2.0)
    assert w.contains(np.array([[2.0 + 5e-10, 1.0]]))[0]
    assert not w.contains(np.array([[2.0 + 1e-6, 1.0]]))[0]
    with pytest.raises(ValueError):
        Window(0, 0, 0)


def test_clipping():
    tri = np.array([[0, 0], [2, 0], [0, 2]], float)
    assert clipped_area(tri, 0, 0, 1, 1) == pytest.approx(1.0)
    assert polygon_intersects_rect(tri, 0.9, 0.9, 3, 3)
    assert not polygon_intersects_rect(tri, 1.1, 1.1, 3, 3)


def test_tiles_inside_and_meeting_trivial(pen):
    p = supertile(pen, 1, 4)
    lo, hi = p.support.min(axis=0), p.support.max(axis=0)
    big = Window(lo[0] - 1, lo[1] - 1, float((hi - lo).max()) + 2)
    assert len(tiles_inside(p, big)) == len(p)
    far = Window(hi[0] + 10, hi[1] + 10, 3.0)
    assert len(tiles_inside(p, far)) == 0 and len(tiles_meeting(p, far)) == 0


def test_tiles_inside_subset_of_meeting(pen):
    p = supertile(pen, 1, 6)
    c = p.support.mean(axis=0)
    W = Window.centered(c[0], c[1], 10.0)
    inside = set(tiles_inside(p, W).address_strings())
    meeting = set(tiles_meeting(p, W).address_strings())
    assert inside <= meeting
    addr = p.address_strings()
    polys = p.polygons()
    for k, a in enumerate(addr):
        hits = polygon_intersects_rect(polys[k], W.x, W.y, W.x1, W.y1)
        assert (a in meeting) == hits
        if a in meeting and a not in inside:
            # straddles the boundary: some vertex outside the window
            assert not W.contains(polys[k]).all()
    # every net point inside W belongs to a meeting tile
    net = extract_net(p, compute_params=False)
    in_w = np.flatnonzero(W.contains(net.points))
    assert {addr[k] for k in in_w} <= meeting


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 5.0))
def test_square_area_scales_by_four(edge):
    w, w2 = Window(0, 0, edge), Window(0, 0, 2 * edge)
    assert polygon_area(w2.polygon()) == pytest.approx(4 * polygon_area(w.polygon()), rel=1e-12)
