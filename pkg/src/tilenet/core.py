"""Substitution rules over polygonal basic tiles and patch generation by inflation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import geometry
from .errors import CapacityExceeded, ChildOutsideParent, EmptyPatch, MalformedPolygon

DEFAULT_CAPACITY = 10**8
AREA_RTOL = 1e-8


@dataclass(frozen=True)
class Isometry:
    """x -> R(rotation * 2pi/q) F^reflect x + translation, with F the reflection y -> -y."""

    rotation: int = 0
    reflect: bool = False
    translation: tuple = (0.0, 0.0)
    q: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rotation", int(self.rotation) % self.q)
        object.__setattr__(self, "reflect", bool(self.reflect))
        object.__setattr__(self, "translation", (float(self.translation[0]), float(self.translation[1])))

    @property
    def angle(self) -> float:
        return 2 * math.pi * self.rotation / self.q

    def linear(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        m = np.array([[c, -s], [s, c]])
        if self.reflect:
            m = m @ np.diag([1.0, -1.0])
        return m

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.linear().T + np.asarray(self.translation)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        """Composition ``self @ other`` applies ``other`` first."""
        if self.q != other.q:
            raise ValueError("cannot compose isometries with different base angles")
        rot = self.rotation - other.rotation if self.reflect else self.rotation + other.rotation
        t = self.apply(np.asarray(other.translation))
        return Isometry(rot, self.reflect ^ other.reflect, tuple(t), self.q)

    def inverse(self) -> "Isometry":
        # (R F)^-1 = F R^-1 = R F when reflecting
        inv_rot = self.rotation if self.reflect else -self.rotation
        inv = Isometry(inv_rot, self.reflect, (0.0, 0.0), self.q)
        t = -inv.apply(np.asarray(self.translation))
        return Isometry(inv_rot, self.reflect, tuple(t), self.q)


@dataclass(frozen=True)
class BasicTile:
    id: int
    polygon: tuple
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.polygon, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise MalformedPolygon(f"tile {self.id}: need at least 3 two-dimensional vertices")
        if not geometry.is_simple(v):
            raise MalformedPolygon(f"tile {self.id}: polygon is self-intersecting")
        area = geometry.polygon_area(v)
        if area < 0:
            v = v[::-1]
        object.__setattr__(self, "polygon", tuple(map(tuple, v.tolist())))

    @property
    def vertices(self) -> np.ndarray:
        return np.asarray(self.polygon, dtype=float)

    @cached_property
    def area(self) -> float:
        return geometry.polygon_area(self.vertices)

    @cached_property
    def centroid(self) -> np.ndarray:
        return geometry.polygon_centroid(self.vertices)

    @cached_property
    def diameter(self) -> float:
        v = self.vertices
        return float(np.max(np.hypot(*(v[:, None, :] - v[None, :, :]).transpose(2, 0, 1))))

    @cached_property
    def inradius(self) -> float:
        """Radius of the largest disk inside the tile, by a grid search refined twice."""
        v = self.vertices
        lo, hi = v.min(axis=0), v.max(axis=0)
        best = (0.0, (lo + hi) / 2)
        span = hi - lo
        center = (lo + hi) / 2
        for _ in range(4):
            xs = np.linspace(center[0] - span[0] / 2, center[0] + span[0] / 2, 41)
            ys = np.linspace(center[1] - span[1] / 2, center[1] + span[1] / 2, 41)
            gx, gy = np.meshgrid(xs, ys)
            pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
            inside = geometry.points_in_polygon(pts, v)
            if not inside.any():
                break
            d = np.where(inside, geometry.boundary_distance(pts, v), -1.0)
            k = int(np.argmax(d))
            if d[k] > best[0]:
                best = (float(d[k]), pts[k])
            center = best[1]
            span = span / 8
        return best[0]


@dataclass(frozen=True)
class Child:
    tile_id: int
    placement: Isometry


@dataclass(frozen=True)
class SubstitutionRule:
    """Dissection of each basic tile into copies of basic tiles scaled by 1/xi.

    ``children[j]`` lists the pieces of ``tiles[j]``; each piece is the basic tile
    ``tile_id`` scaled by 1/xi and then moved by its placement isometry.
    """

    name: str
    tiles: tuple
    xi: float
    children: tuple
    q: int
    xi_expr: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tiles", tuple(self.tiles))
        object.__setattr__(self, "children", tuple(tuple(c) for c in self.children))
        if not self.xi > 1:
            raise ValueError("inflation constant must exceed 1")
        if len(self.children) != len(self.tiles):
            raise ValueError("need one child list per basic tile")
        ids = [t.id for t in self.tiles]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate tile ids")

    @property
    def n(self) -> int:
        return len(self.tiles)

    @cached_property
    def _id_to_index(self) -> dict:
        return {t.id: k for k, t in enumerate(self.tiles)}

    def index(self, tile_id: int) -> int:
        try:
            return self._id_to_index[tile_id]
        except KeyError:
            raise KeyError(f"rule {self.name!r} has no tile {tile_id}") from None

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([t.area for t in self.tiles])

    @cached_property
    def max_diameter(self) -> float:
        return max(t.diameter for t in self.tiles)

    @cached_property
    def min_inradius(self) -> float:
        return min(t.inradius for t in self.tiles)

    @cached_property
    def child_tables(self) -> list:
        """Per parent type: (types, rotations, reflects, translations) arrays."""
        tables = []
        for kids in self.children:
            types = np.array([self.index(c.tile_id) for c in kids], dtype=np.int16)
            rot = np.array([c.placement.rotation for c in kids], dtype=np.int64)
            ref = np.array([c.placement.reflect for c in kids], dtype=bool)
            trans = np.array([c.placement.translation for c in kids], dtype=float).reshape(-1, 2)
            tables.append((types, rot, ref, trans))
        return tables

    @cached_property
    def child_counts(self) -> np.ndarray:
        return np.array([len(k) for k in self.children], dtype=np.int64)

    @cached_property
    def count_matrix(self) -> list:
        """Integer substitution matrix as nested Python ints; entry [i][j] = type-i children of tile j."""
        m = [[0] * self.n for _ in range(self.n)]
        for j, kids in enumerate(self.children):
            for c in kids:
                m[self.index(c.tile_id)][j] += 1
        return m

    def child_polygon(self, parent_index: int, k: int) -> np.ndarray:
        c = self.children[parent_index][k]
        ref = self.tiles[self.index(c.tile_id)].vertices / self.xi
        return c.placement.apply(ref)

    def projected_counts(self, counts, steps: int) -> list:
        """Exact integer count vector after ``steps`` inflations."""
        v = [int(x) for x in counts]
        a = self.count_matrix
        for _ in range(steps):
            v = [sum(a[i][j] * v[j] for j in range(self.n)) for i in range(self.n)]
        return v


@dataclass(frozen=True)
class PlacedTile:
    tile_id: int
    placement: Isometry
    level: int
    address: tuple

    def polygon(self, rule: SubstitutionRule, scale: float = 1.0) -> np.ndarray:
        base = rule.tiles[rule.index(self.tile_id)].vertices * (scale * rule.xi**self.level)
        v = self.placement.apply(base)
        return v[::-1] if self.placement.reflect else v


@dataclass(frozen=True, eq=False)
class Patch:
    """Finite set of tiles at one hierarchy level, stored column-wise.

    ``types`` holds 0-based indices into ``rule.tiles``; the tile with index k at
    level ``level`` occupies R F (scale * xi**level * T_k) + translation.
    ``support`` is the outline of the region the patch covers, when known (it is
    kept through inflation and dropped by ``subset``).
    """

    rule: SubstitutionRule
    level: int
    root_level: int
    types: np.ndarray
    rotations: np.ndarray
    reflects: np.ndarray
    translations: np.ndarray
    addresses: np.ndarray
    scale: float = 1.0
    support: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.types)

    @property
    def rule_ref(self) -> str:
        return self.rule.name

    def tile(self, k: int) -> PlacedTile:
        iso = Isometry(
            int(self.rotations[k]), bool(self.reflects[k]), tuple(self.translations[k]), self.rule.q
        )
        return PlacedTile(self.rule.tiles[int(self.types[k])].id, iso, self.level, tuple(int(a) for a in self.addresses[k]))

    @property
    def tiles(self) -> list:
        return [self.tile(k) for k in range(len(self))]

    def __iter__(self):
        return (self.tile(k) for k in range(len(self)))

    @property
    def tile_ids(self) -> np.ndarray:
        ids = np.array([t.id for t in self.rule.tiles])
        return ids[self.types]

    @property
    def unit(self) -> float:
        """Linear size factor applied to the basic tiles at this level."""
        return self.scale * self.rule.xi**self.level

    def _transform(self, idx: np.ndarray, ref: np.ndarray) -> np.ndarray:
        """Apply the placements of tiles ``idx`` to reference points ``ref`` (V, 2)."""
        q = self.rule.q
        ang = 2 * np.pi * self.rotations[idx] / q
        c, s = np.cos(ang)[:, None], np.sin(ang)[:, None]
        x = np.broadcast_to(ref[None, :, 0], (len(idx), len(ref)))
        y = np.where(self.reflects[idx][:, None], -ref[None, :, 1], ref[None, :, 1])
        t = self.translations[idx]
        out = np.empty((len(idx), len(ref), 2))
        out[..., 0] = c * x - s * y + t[:, 0:1]
        out[..., 1] = s * x + c * y + t[:, 1:2]
        return out

    def polygons_of_type(self, type_index: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices and counterclockwise vertex stacks (N, V, 2) of the tiles of one type."""
        idx = np.flatnonzero(self.types == type_index)
        ref = self.rule.tiles[type_index].vertices * self.unit
        polys = self._transform(idx, ref)
        flip = self.reflects[idx]
        polys[flip] = polys[flip, ::-1]
        return idx, polys

    def polygons(self) -> list:
        out = [None] * len(self)
        for t in range(self.rule.n):
            idx, polys = self.polygons_of_type(t)
            for k, p in zip(idx.tolist(), polys):
                out[k] = p
        return out

    def polygon(self, k: int) -> np.ndarray:
        return self.tile(k).polygon(self.rule, self.scale)

    def centroids(self) -> np.ndarray:
        out = np.empty((len(self), 2))
        for t in range(self.rule.n):
            idx = np.flatnonzero(self.types == t)
            ref = self.rule.tiles[t].centroid[None, :] * self.unit
            out[idx] = self._transform(idx, ref)[:, 0, :]
        return out

    def bounding_boxes(self) -> np.ndarray:
        """(N, 4) array of x0, y0, x1, y1."""
        out = np.empty((len(self), 4))
        for t in range(self.rule.n):
            idx, polys = self.polygons_of_type(t)
            out[idx, 0:2] = polys.min(axis=1)
            out[idx, 2:4] = polys.max(axis=1)
        return out

    def tile_areas(self) -> np.ndarray:
        """Areas measured from the placed polygons (shoelace), not from the rule table."""
        out = np.empty(len(self))
        for t in range(self.rule.n):
            idx, polys = self.polygons_of_type(t)
            out[idx] = geometry.signed_areas(polys)
        return out

    def support_area(self) -> float:
        return float(math.fsum(self.tile_areas()))

    def subset(self, mask) -> "Patch":
        m = np.asarray(mask)
        return Patch(
            self.rule,
            self.level,
            self.root_level,
            self.types[m],
            self.rotations[m],
            self.reflects[m],
            self.translations[m],
            self.addresses[m],
            self.scale,
        )

    def scaled(self, factor: float) -> "Patch":
        return Patch(
            self.rule,
            self.level,
            self.root_level,
            self.types,
            self.rotations,
            self.reflects,
            self.translations * factor,
            self.addresses,
            self.scale * factor,
            None if self.support is None else self.support * factor,
        )

    def address_strings(self) -> list:
        return [".".join(str(a) for a in row) for row in self.addresses.tolist()]


def single_tile_patch(rule: SubstitutionRule, tile_id: int, level: int = 0, placement: Isometry | None = None, scale: float = 1.0) -> Patch:
    iso = placement or Isometry(q=rule.q)
    outline = iso.apply(rule.tiles[rule.index(tile_id)].vertices * (scale * rule.xi**level))
    if iso.reflect:
        outline = outline[::-1]
    return Patch(
        rule,
        level,
        level,
        np.array([rule.index(tile_id)], dtype=np.int16),
        np.array([iso.rotation], dtype=np.int64),
        np.array([iso.reflect], dtype=bool),
        np.array([iso.translation], dtype=float),
        np.zeros((1, 0), dtype=np.uint8),
        scale,
        outline,
    )


def count_types(patch: Patch) -> np.ndarray:
    """Exact number of tiles of each basic type (position k <-> rule.tiles[k])."""
    if len(patch) == 0:
        raise EmptyPatch("cannot count an empty patch")
    return np.bincount(patch.types.astype(np.int64), minlength=patch.rule.n)


def _inflate_once(patch: Patch) -> tuple[Patch, np.ndarray]:
    rule = patch.rule
    nkids = rule.child_counts[patch.types]
    offsets = np.concatenate([[0], np.cumsum(nkids)[:-1]]).astype(np.int64)
    total = int(nkids.sum())
    depth = patch.addresses.shape[1] + 1
    types = np.empty(total, dtype=np.int16)
    rot = np.empty(total, dtype=np.int64)
    ref = np.empty(total, dtype=bool)
    trans = np.empty((total, 2))
    addr = np.empty((total, depth), dtype=np.uint8)
    q = rule.q
    grow = patch.unit  # parent tile size; child offsets are given for unit-size parents
    for j, (ctypes, crot, cref, ctrans) in enumerate(rule.child_tables):
        parents = np.flatnonzero(patch.types == j)
        if len(parents) == 0:
            continue
        prot = patch.rotations[parents]
        pref = patch.reflects[parents]
        ptr = patch.translations[parents]
        ang = 2 * np.pi * prot / q
        c, s = np.cos(ang), np.sin(ang)
        paddr = patch.addresses[parents]
        for k in range(len(ctypes)):
            pos = offsets[parents] + k
            types[pos] = ctypes[k]
            rot[pos] = np.where(pref, prot - crot[k], prot + crot[k]) % q
            ref[pos] = pref ^ cref[k]
            tx, ty = ctrans[k] * grow
            ty_f = np.where(pref, -ty, ty)
            trans[pos, 0] = ptr[:, 0] + c * tx - s * ty_f
            trans[pos, 1] = ptr[:, 1] + s * tx + c * ty_f
            addr[pos, :-1] = paddr
            addr[pos, -1] = k
    child = Patch(rule, patch.level - 1, patch.root_level, types, rot, ref, trans, addr, patch.scale, patch.support)
    return child, offsets


def _check_capacity(patch: Patch, steps: int, limit: int) -> None:
    counts = np.bincount(patch.types.astype(np.int64), minlength=patch.rule.n)
    projected = sum(patch.rule.projected_counts(counts, steps))
    if projected > limit:
        raise CapacityExceeded(f"inflation would produce {projected} tiles (limit {limit})")


def inflate(patch: Patch, rule: SubstitutionRule | None = None, steps: int = 1, limit: int = DEFAULT_CAPACITY) -> Patch:
    """Replace every tile by its children ``steps`` times; levels drop by ``steps``."""
    if rule is not None and rule is not patch.rule:
        patch = Patch(rule, patch.level, patch.root_level, patch.types, patch.rotations, patch.reflects,
                      patch.translations, patch.addresses, patch.scale, patch.support)
    if len(patch) == 0:
        raise EmptyPatch("cannot inflate an empty patch")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    _check_capacity(patch, steps, limit)
    for _ in range(steps):
        patch, _ = _inflate_once(patch)
    return patch


def supertile(rule: SubstitutionRule, i: int, m: int, limit: int = DEFAULT_CAPACITY, scale: float = 1.0) -> Patch:
    """Level-0 patch obtained by inflating the basic tile ``i`` (1-based id) ``m`` times."""
    if m < 0:
        raise ValueError("m must be >= 0")
    root = single_tile_patch(rule, i, level=m, scale=scale)
    if m == 0:
        return root
    return inflate(root, steps=m, limit=limit)


@dataclass
class Hierarchy:
    """All levels of one master supertile: ``levels[l]`` is the patch of level-l tiles.

    ``child_start[l][k]`` is the position in ``levels[l-1]`` of the first child of
    tile k of level l; its children are contiguous.
    """

    rule: SubstitutionRule
    root_type: int
    root_level: int
    levels: list
    child_start: list = field(default_factory=list)

    @classmethod
    def build(cls, rule: SubstitutionRule, i: int, m: int, scale: float = 1.0, limit: int = DEFAULT_CAPACITY) -> "Hierarchy":
        root = single_tile_patch(rule, i, level=m, scale=scale)
        _check_capacity(root, m, limit)
        levels = [None] * (m + 1)
        starts = [None] * (m + 1)
        levels[m] = root
        cur = root
        for lvl in range(m, 0, -1):
            cur, offsets = _inflate_once(cur)
            levels[lvl - 1] = cur
            starts[lvl] = offsets
        return cls(rule, i, m, levels, starts)

    @property
    def scale(self) -> float:
        return self.levels[0].scale

    @property
    def support(self) -> np.ndarray:
        return self.levels[self.root_level].support

    def children(self, level: int, k: int) -> range:
        start = int(self.child_start[level][k])
        n = int(self.rule.child_counts[self.levels[level].types[k]])
        return range(start, start + n)

    def descendant_range(self, level: int, k: int, target: int = 0) -> range:
        """Contiguous block of level-``target`` descendants of tile k at ``level``."""
        lo, hi = k, k + 1
        for lvl in range(level, target, -1):
            starts = self.child_start[lvl]
            counts = self.rule.child_counts[self.levels[lvl].types]
            new_lo = int(starts[lo])
            new_hi = int(starts[hi - 1] + counts[hi - 1])
            lo, hi = new_lo, new_hi
        return range(lo, hi)

    def tile_counts(self, level: int) -> np.ndarray:
        """Number of level-0 tiles under each tile of ``level`` (exact, from the matrix)."""
        per_type = [sum(self.rule.projected_counts([1 if t == j else 0 for t in range(self.rule.n)], level)) for j in range(self.rule.n)]
        return np.asarray(per_type, dtype=np.int64)[self.levels[level].types]


@dataclass
class ValidationReport:
    rule: str
    area_residuals: list
    relative_residuals: list
    overlaps: list
    ok: bool

    @property
    def max_residual(self) -> float:
        return max(self.relative_residuals) if self.relative_residuals else 0.0


def _interior_samples(poly: np.ndarray) -> np.ndarray:
    c = geometry.polygon_centroid(poly)
    return np.vstack([c[None, :], (poly + c[None, :]) / 2.0])


def validate_rule(rule: SubstitutionRule, tol: float = geometry.COORD_TOL) -> ValidationReport:
    """Check area conservation, containment and interior-disjointness of every dissection."""
    if rule.n < 1:
        raise MalformedPolygon("rule has no tiles")
    for t in rule.tiles:
        if len(t.polygon) < 3 or not geometry.is_simple(t.vertices):
            raise MalformedPolygon(f"tile {t.id} is not a simple polygon")
        if t.area < geometry.AREA_EPS:
            raise MalformedPolygon(f"tile {t.id} is degenerate")
    abs_res, rel_res, overlaps = [], [], []
    for j, tile in enumerate(rule.tiles):
        parent = tile.vertices
        polys = [rule.child_polygon(j, k) for k in range(len(rule.children[j]))]
        for k, p in enumerate(polys):
            outside = ~geometry.contains_points(parent, p, tol)
            if outside.any():
                raise ChildOutsideParent(
                    f"tile {tile.id}: child {k} (type {rule.children[j][k].tile_id}) has a vertex outside the parent"
                )
        child_area = math.fsum(abs(geometry.signed_areas(p[None])[0]) for p in polys)
        res = abs(child_area - tile.area)
        abs_res.append(res)
        rel_res.append(res / tile.area)
        for a, pa in enumerate(polys):
            samples = _interior_samples(pa)
            for b, pb in enumerate(polys):
                if a != b and geometry.strictly_inside(pb, samples, tol).any():
                    overlaps.append((tile.id, a, b))
    ok = all(r < AREA_RTOL for r in rel_res) and not overlaps
    return ValidationReport(rule.name, abs_res, rel_res, overlaps, ok)
