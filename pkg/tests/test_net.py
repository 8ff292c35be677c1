import math

import numpy as np
import pytest

from tilenet.core import single_tile_patch, supertile
from tilenet.errors import EmptyPatch, TooFewPoints
from tilenet.geometry import points_in_polygon
from tilenet.net import (
    delone_params,
    extract_net,
    lattice_net,
    packing_radius,
    point_net,
    read_net_csv,
    write_net_csv,
)


def test_single_tile_net(pen):
    p = single_tile_patch(pen, 1)
    net = extract_net(p, compute_params=False)
    assert len(net) == 1
    np.testing.assert_allclose(net.points[0], pen.tiles[0].centroid)


@pytest.mark.parametrize("which,level,expected", [("pen", 5, 144), ("chr_", 4, 256)])
def test_net_sizes(request, which, level, expected):
    rule = request.getfixturevalue(which)
    assert len(extract_net(supertile(rule, 1, level), compute_params=False)) == expected


def test_points_inside_their_tiles(pen):
    p = supertile(pen, 2, 6)
    net = extract_net(p, compute_params=False)
    for k, poly in enumerate(p.polygons()):
        assert points_in_polygon(net.points[k : k + 1], poly)[0]


def test_lattice_delone():
    net = lattice_net(0, 0, 100, 100)
    d = delone_params(net)
    assert d.r == 0.5
    assert abs(d.R - math.sqrt(2) / 2) <= d.spacing


def test_two_points():
    assert packing_radius(np.array([[0.0, 0.0], [1.0, 0.0]])) == 0.5
    with pytest.raises(TooFewPoints):
        delone_params(point_net([[0.0, 0.0]], compute_params=False))


def test_empty_patch(pen):
    with pytest.raises(EmptyPatch):
        extract_net(supertile(pen, 1, 2).subset(np.zeros(8, bool)))


def test_penrose_delone_level6(pen):
    net = extract_net(supertile(pen, 1, 6))
    assert math.isfinite(net.R) and math.isfinite(net.r)
    assert net.R / net.r < 20
    # separation
    d = np.hypot(*(net.points[:, None] - net.points[None]).transpose(2, 0, 1))
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 2 * net.r - 1e-9


def test_covering_on_interior_grid(pen):
    net = extract_net(supertile(pen, 1, 7))
    from scipy.spatial import cKDTree

    from tilenet.geometry import boundary_distance

    rng = np.random.default_rng(4)
    lo, hi = net.support.min(axis=0), net.support.max(axis=0)
    probe = rng.uniform(lo, hi, (5000, 2))
    probe = probe[points_in_polygon(probe, net.support)]
    probe = probe[boundary_distance(probe, net.support) >= net.margin]
    dist, _ = cKDTree(net.points).query(probe)
    assert dist.max() <= net.R + net.spacing


def test_scale_equivariance(pen):
    a = extract_net(supertile(pen, 1, 6))
    b = extract_net(supertile(pen, 1, 6, scale=2.5))
    assert b.r == pytest.approx(2.5 * a.r, rel=1e-9)
    assert b.R == pytest.approx(2.5 * a.R, rel=1e-9)


def test_csv_roundtrip_reproduces_statistics(tmp_path, pen, pen_report):
    from tilenet.discrepancy import E_alpha

    net = extract_net(supertile(pen, 1, 9), compute_params=False)
    path = tmp_path / "net.csv"
    write_net_csv(net, path)
    back = read_net_csv(path, compute_params=False)
    np.testing.assert_array_equal(back.points, net.points)
    assert back.address_strings() == net.address_strings()
    assert back.tile_ids.tolist() == net.tile_ids.tolist()
    # imported points know nothing about the support, so compare on the same squares
    stat = E_alpha(3, net, pen_report.alpha, seed=1)
    again = net.__class__(back.points, net.window, back.index, back.tile_ids, back.addresses, {}, net.support, net.margin)
    assert E_alpha(3, again, pen_report.alpha, seed=1) == stat


def test_csv_requires_xy(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_net_csv(p)
