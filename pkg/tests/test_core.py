import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilenet.core import (
    BasicTile,
    Child,
    Hierarchy,
    Isometry,
    SubstitutionRule,
    count_types,
    inflate,
    single_tile_patch,
    supertile,
    validate_rule,
)
from tilenet.errors import CapacityExceeded, ChildOutsideParent, EmptyPatch, MalformedPolygon
from tilenet.geometry import polygon_area
from tilenet.spectral import substitution_matrix

PHI = (1 + math.sqrt(5)) / 2

isometries = st.builds(
    Isometry,
    st.integers(0, 9),
    st.booleans(),
    st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
    st.just(10),
)


@given(isometries, isometries, st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=5))
def test_isometry_composition_matches_sequential_application(f, g, pts):
    p = np.array(pts)
    np.testing.assert_allclose((f @ g).apply(p), f.apply(g.apply(p)), atol=1e-9)


@given(isometries, st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=2, max_size=6))
def test_isometry_preserves_distances(f, pts):
    p = np.array(pts)
    q = f.apply(p)
    d0 = np.hypot(*(p[:, None] - p[None]).transpose(2, 0, 1))
    d1 = np.hypot(*(q[:, None] - q[None]).transpose(2, 0, 1))
    np.testing.assert_allclose(d1, d0, rtol=1e-12, atol=1e-9)


@given(isometries)
def test_isometry_inverse(f):
    p = np.array([[0.3, -1.2], [4.0, 2.5]])
    np.testing.assert_allclose(f.inverse().apply(f.apply(p)), p, atol=1e-9)


def test_rotation_indices_add_mod_q():
    a, b = Isometry(7, False, (0, 0), 10), Isometry(6, False, (1, 2), 10)
    assert (a @ b).rotation == 3


def test_basic_tile_orientation_and_area(pen):
    kite, dart = pen.tiles
    # closed forms: legs phi with apex 36 deg; legs 1 with apex 108 deg
    assert kite.area == pytest.approx(0.5 * PHI**2 * math.sin(math.radians(36)), rel=1e-12)
    assert dart.area == pytest.approx(0.5 * math.sin(math.radians(108)), rel=1e-12)
    assert polygon_area(kite.vertices) > 0
    cw = BasicTile(9, ((0, 0), (0, 1), (1, 0)))
    assert polygon_area(cw.vertices) == pytest.approx(0.5)


def test_malformed_tiles():
    with pytest.raises(MalformedPolygon):
        BasicTile(1, ((0, 0), (1, 1), (1, 0), (0, 1)))
    with pytest.raises(MalformedPolygon):
        BasicTile(1, ((0, 0), (1, 0)))


@pytest.mark.parametrize("name", ["pen", "chr_"])
def test_builtin_rules_validate(name, request):
    rep = validate_rule(request.getfixturevalue(name))
    assert rep.ok
    assert rep.max_residual < 1e-8


def test_deleting_a_child_leaves_an_area_gap(pen):
    kids = list(pen.children)
    removed = kids[0][2]
    kids[0] = kids[0][:2]
    broken = SubstitutionRule("broken", pen.tiles, pen.xi, kids, pen.q)
    rep = validate_rule(broken)
    assert not rep.ok
    s_removed = pen.tiles[pen.index(removed.tile_id)].area
    assert rep.area_residuals[0] == pytest.approx(s_removed / pen.xi**2, rel=1e-9)


def test_child_outside_parent_detected(chr_):
    kids = list(chr_.children[0])
    kids[0] = Child(1, Isometry(0, False, (5.0, 5.0), 4))
    with pytest.raises(ChildOutsideParent):
        validate_rule(SubstitutionRule("bad", chr_.tiles, 2.0, (kids,), 4))


def test_overlapping_children_detected(chr_):
    kids = list(chr_.children[0])
    kids[1] = kids[0]
    rep = validate_rule(SubstitutionRule("dup", chr_.tiles, 2.0, (kids,), 4))
    assert not rep.ok and rep.overlaps


@pytest.mark.parametrize("i,m,expected", [(1, 0, (1, 0)), (1, 1, (2, 1)), (1, 2, (5, 3)), (2, 2, (3, 2)), (1, 5, (89, 55))])
def test_penrose_supertile_counts(pen, i, m, expected):
    assert tuple(count_types(supertile(pen, i, m)).tolist()) == expected


def test_count_homomorphism_all_levels(pen, chr_):
    for rule in (pen, chr_):
        A = substitution_matrix(rule)
        for i, t in enumerate(rule.tiles):
            for m in range(9):
                e = [0] * rule.n
                e[i] = 1
                assert count_types(supertile(rule, t.id, m)).tolist() == A.power_apply(e, m)


def test_single_type2_tile_counts(pen):
    assert count_types(single_tile_patch(pen, 2)).tolist() == [0, 1]


def test_supertile_area_and_addresses(pen):
    for m in (3, 6):
        p = supertile(pen, 1, m)
        assert p.support_area() == pytest.approx(pen.xi ** (2 * m) * pen.tiles[0].area, rel=1e-8)
        addrs = p.address_strings()
        assert len(set(addrs)) == len(addrs)
        assert p.addresses.shape[1] == m


def test_inflate_single_step_matches_supertile(pen):
    a = inflate(single_tile_patch(pen, 1, level=1), steps=1)
    b = supertile(pen, 1, 1)
    np.testing.assert_allclose(a.translations, b.translations)
    assert a.types.tolist() == b.types.tolist()


def test_inflate_count_vector(pen, chr_):
    p = supertile(pen, 1, 1)  # counts (2, 1); lift it to level 1 so it can be inflated once
    lifted = type(p)(pen, 1, 1, p.types, p.rotations, p.reflects, p.translations * pen.xi, p.addresses)
    assert count_types(inflate(lifted, steps=1)).tolist() == [5, 3]
    assert len(inflate(single_tile_patch(chr_, 1, level=3), steps=3)) == 64


def test_inflate_composition(pen):
    root = single_tile_patch(pen, 2, level=5)
    a = inflate(inflate(root, steps=2), steps=3)
    b = inflate(root, steps=5)
    ka = sorted(zip(a.tile_ids.tolist(), np.round(a.centroids(), 9).tolist()))
    kb = sorted(zip(b.tile_ids.tolist(), np.round(b.centroids(), 9).tolist()))
    assert ka == kb


def test_capacity_limit(pen):
    with pytest.raises(CapacityExceeded):
        supertile(pen, 1, 20, limit=10_000)


def test_empty_patch_errors(pen):
    p = supertile(pen, 1, 2).subset(np.zeros(8, bool))
    with pytest.raises(EmptyPatch):
        count_types(p)
    with pytest.raises(EmptyPatch):
        inflate(p)


def test_tile_polygons_disjoint_interiors(pen):
    p = supertile(pen, 1, 5)
    polys = p.polygons()
    cents = p.centroids()
    from tilenet.geometry import strictly_inside

    for k, poly in enumerate(polys):
        inside = strictly_inside(poly, cents)
        assert inside.sum() == 1 and inside[k]


def test_penrose_half_tiles_pair_across_axes(pen):
    # every interior mirror axis is shared by two halves of opposite handedness
    p = supertile(pen, 1, 7)
    axes = {}
    for k, poly in enumerate(p.polygons()):
        a, c = poly[0], poly[2]
        key = tuple(sorted([tuple(np.round(a, 6)), tuple(np.round(c, 6))]))
        axes.setdefault(key, []).append(k)
    support = p.support
    from tilenet.geometry import boundary_distance

    for key, members in axes.items():
        mid = np.mean(np.array(key), axis=0)
        if boundary_distance(mid[None], support)[0] < 1e-6:
            continue
        assert len(members) == 2
        assert p.types[members[0]] == p.types[members[1]]
        assert p.reflects[members[0]] != p.reflects[members[1]]


def test_hierarchy_levels_nest(pen):
    h = Hierarchy.build(pen, 1, 6)
    for lvl in range(1, 7):
        counts = h.tile_counts(lvl)
        assert counts.sum() == len(h.levels[0])
        total = sum(len(h.children(lvl, k)) for k in range(len(h.levels[lvl])))
        assert total == len(h.levels[lvl - 1])
    assert len(h.descendant_range(6, 0, 0)) == len(h.levels[0])


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.integers(0, 7))
def test_supertile_area_equals_sum_of_tiles(i, m):
    from tilenet.rules import penrose

    rule = penrose()
    p = supertile(rule, i, m)
    assert math.fsum(p.tile_areas()) == pytest.approx(polygon_area(p.support), rel=1e-8)
