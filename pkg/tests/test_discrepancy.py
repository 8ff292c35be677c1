import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilenet.core import Hierarchy, supertile
from tilenet.discrepancy import (
    E_alpha,
    admissible_corners,
    bk_statistics,
    e_alpha,
    e_alpha_value,
    laczkovich_ratio,
    laczkovich_scan,
    layer_decomposition,
    random_polyomino,
    tile_discrepancy,
)
from tilenet.errors import EmptySquare, OutsideSafeRegion
from tilenet.geometry import CubeUnion, Window, boundary_measure
from tilenet.net import extract_net, lattice_net


@pytest.fixture(scope="module")
def pen_net8(pen):
    return extract_net(supertile(pen, 1, 8), compute_params=False)


def test_e_alpha_lattice_is_one():
    net = lattice_net(0, 0, 40, 40)
    for x, y, e in [(0, 0, 1), (3, 5, 7), (10, 2, 16)]:
        assert e_alpha(Window(x, y, e), net, 1.0) == 1.0


def test_e_alpha_value_arithmetic():
    assert e_alpha_value(8, 4, 1.0) == 2.0
    assert e_alpha_value(2, 4, 1.0) == 2.0


@given(st.integers(1, 10**6), st.floats(0.01, 1e4), st.floats(0.01, 10))
def test_e_alpha_value_at_least_one(count, area, alpha):
    assert e_alpha_value(count, area, alpha) >= 1.0


def test_e_alpha_errors():
    net = lattice_net(0, 0, 10, 10)
    with pytest.raises(OutsideSafeRegion):
        e_alpha(Window(8, 8, 4), net, 1.0)
    sparse = lattice_net(0, 0, 10, 10)
    sparse.points[:] = 0.5  # everything piled in one cell
    sparse._cache.clear()
    with pytest.raises(EmptySquare):
        e_alpha(Window(4, 4, 2), sparse, 1.0)


def test_penrose_edge16_squares(pen_net8, pen_report):
    xs, ys = admissible_corners(pen_net8, 16)
    rng = np.random.default_rng(3)
    for k in rng.choice(len(xs), 25, replace=False):
        v = e_alpha(Window(float(xs[k]), float(ys[k]), 16.0), pen_net8, pen_report.alpha)
        assert 1.0 <= v <= 1.5


def test_E_alpha_lattice_and_seeding(pen_net8, pen_report):
    net = lattice_net(0, 0, 64, 64)
    for j in range(1, 6):
        assert E_alpha(j, net, 1.0).max_e == 1.0
    a = E_alpha(3, pen_net8, pen_report.alpha, max_squares=500, seed=9)
    b = E_alpha(3, pen_net8, pen_report.alpha, max_squares=500, seed=9)
    assert a == b and a.sampled == 500


def test_bk_partials_nondecreasing(pen_net8, pen_report):
    res = bk_statistics(pen_net8, pen_report.alpha, range(2, 5), max_squares=2000, seed=1)
    assert all(s.max_e >= 1 for s in res.scales)
    assert all(b >= a for a, b in zip(res.product_partials, res.product_partials[1:]))


def test_laczkovich_single_cell_inside_big_tile(pen, pen_report):
    # tiles much larger than a cell: find a cell with no net point
    k = 10.0
    net = extract_net(supertile(pen, 1, 4, scale=k), compute_params=False)
    alpha = pen_report.alpha / k**2
    mask, x0, y0 = net.safe_cells()
    counts = net.cell_counter()
    for ix, iy in np.argwhere(mask):
        U = CubeUnion([(x0 + ix, y0 + iy)])
        if counts.count_cells(U.cells)[0] == 0:
            assert laczkovich_ratio(U, net, alpha) == pytest.approx(alpha / 4)
            break
    else:
        pytest.fail("no empty cell found")


def test_laczkovich_lattice_zero():
    net = lattice_net(0, 0, 80, 80)
    rng = np.random.default_rng(0)
    for n in (1, 10, 200):
        U = random_polyomino(n, rng, net.safe_cells())
        assert laczkovich_ratio(U, net, 1.0) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 300), st.integers(0, 2**32))
def test_random_polyomino_connected(n, seed):
    U = random_polyomino(n, np.random.default_rng(seed))
    cells = set(map(tuple, U.cells.tolist()))
    assert len(cells) == n
    start = next(iter(cells))
    seen, stack = {start}, [start]
    while stack:
        x, y = stack.pop()
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    assert seen == cells
    assert boundary_measure(U) <= 2 * n + 2


def test_laczkovich_scan_seeded(pen, pen_report):
    net = extract_net(supertile(pen, 1, 7, scale=2.0), compute_params=False)
    a = laczkovich_scan(net, pen_report.alpha / 4, n_windows=20, max_cells=500, seed=4)
    b = laczkovich_scan(net, pen_report.alpha / 4, n_windows=20, max_cells=500, seed=4)
    assert a.to_dict() == b.to_dict()
    assert len(a.windows) == 20


def test_tile_discrepancy(pen, chr_, pen_report, chair_report):
    for t, s in zip(pen.tiles, pen.areas):
        assert tile_discrepancy(pen, t.id, 0, pen_report.alpha) == pytest.approx(abs(1 - pen_report.alpha * s))
    for m in range(0, 10):
        assert tile_discrepancy(chr_, 1, m, chair_report.alpha) == pytest.approx(0.0, abs=1e-9 * 4**m)


def test_tile_discrepancy_decay(pen, pen_report):
    from tilenet.spectral import fit_slope

    ms = list(range(1, 13))
    vals = [tile_discrepancy(pen, 1, m, pen_report.alpha) for m in ms]
    assert abs(fit_slope(ms, vals) - math.log(0.381966)) < 0.05
    K = max(v / pen_report.lambda2abs**m for m, v in zip(ms, vals))
    assert all(v <= K * pen_report.lambda2abs**m * (1 + 1e-9) for m, v in zip(ms, vals))


@pytest.fixture(scope="module")
def hier9(pen):
    return Hierarchy.build(pen, 1, 9)


def test_layers_single_supertile():
    # chair supertiles are unions of unit cells, so U can be exactly one level-2 tile
    from tilenet.rules import chair

    h = Hierarchy.build(chair(), 1, 4)
    support = h.levels[2].polygon(0)
    lo, hi = support.min(axis=0), support.max(axis=0)
    cells = [(x, y) for x in range(int(lo[0]), int(hi[0])) for y in range(int(lo[1]), int(hi[1]))
             if _cell_in(support, x, y)]
    U = CubeUnion(cells)
    d = layer_decomposition(U, h, 0, 1 / 3)
    assert d.top_level == 2
    top = [l for l in d.layers if l.level == 2][0]
    assert top.tiles.tolist() == [0]
    assert all(l.count == 0 for l in d.layers if l.level < 2)
    assert d.residual_area == 0.0


def _cell_in(poly, x, y):
    from tilenet.geometry import contains_points

    return contains_points(poly, np.array([[x + 0.5, y + 0.5]]))[0]


def test_layers_tiny_union_is_residual(hier9, pen_report):
    # one unit cell is smaller than every level-0 tile, so it holds no whole tile
    net = extract_net(hier9.levels[0], compute_params=False)
    mask, x0, y0 = net.safe_cells()
    ix, iy = np.argwhere(mask)[0]
    U = CubeUnion([(x0 + ix, y0 + iy)])
    d = layer_decomposition(U, hier9, 0, pen_report.alpha)
    assert all(l.count == 0 for l in d.layers)
    assert d.residual_area == pytest.approx(1.0, rel=1e-9)


def test_layers_partition_random(hier9, pen_report):
    net = extract_net(hier9.levels[0], compute_params=False)
    rng = np.random.default_rng(8)
    for _ in range(3):
        U = random_polyomino(800, rng, net.safe_cells())
        d = layer_decomposition(U, hier9, 0, pen_report.alpha)
        assert d.relative_gap < 1e-6
        # layer tiles have disjoint interiors: their point counts add up to the points inside
        assert sum(l.count for l in d.layers) <= net.cell_counter().count_cells(U.cells).sum() + d.residual_tiles
