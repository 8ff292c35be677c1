"""Counting discrepancy of nets against area: squares, cell unions, tiles and layers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySquare, OutsideSafeRegion, WindowTooSmall
from .geometry import CubeUnion, Window, boundary_measure, clipped_area
from .spectral import fit_slope

log = logging.getLogger(__name__)

MAX_SQUARES = 100_000
AREA_TOL = 1e-9


def e_alpha_value(count: float, area: float, alpha: float) -> float:
    """max(alpha area / count, count / (alpha area))."""
    if count <= 0:
        raise EmptySquare("square contains no net point")
    expected = alpha * area
    return max(expected / count, count / expected)


def count_in_window(net, window: Window) -> int:
    """Points in the half-open square [x, x+e) x [y, y+e)."""
    idx = net.index.query_rect(window.x, window.y, window.x1, window.y1)
    p = net.points[idx]
    return int(np.count_nonzero((p[:, 0] < window.x1) & (p[:, 1] < window.y1)))


def e_alpha(B: Window, net, alpha: float, check_safe: bool = True) -> float:
    if check_safe and not net.is_safe_rect(B.x, B.y, B.x1, B.y1):
        raise OutsideSafeRegion(f"square at ({B.x}, {B.y}) edge {B.edge} leaves the safe region")
    return e_alpha_value(count_in_window(net, B), B.edge**2, alpha)


def admissible_corners(net, edge: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer lower-left corners of all edge x edge squares made of safe cells."""
    mask, x0, y0 = net.safe_cells()
    nx, ny = mask.shape
    if edge > nx or edge > ny:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    pre = np.zeros((nx + 1, ny + 1), dtype=np.int64)
    pre[1:, 1:] = mask.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    full = pre[edge:, edge:] - pre[:-edge, edge:] - pre[edge:, :-edge] + pre[:-edge, :-edge]
    ix, iy = np.nonzero(full == edge * edge)
    return ix.astype(np.int64) + x0, iy.astype(np.int64) + y0


@dataclass(frozen=True)
class ScaleStat:
    j: int
    sampled: int
    empty: int
    max_e: float


def E_alpha(j: int, net, alpha: float, max_squares: int = MAX_SQUARES, seed: int = 0) -> ScaleStat:
    """Max of e_alpha over integer squares of edge 2^j (all of them, or a seeded sample).

    This is a lower bound for the supremum over all such squares.
    """
    edge = 2**j
    xs, ys = admissible_corners(net, edge)
    if len(xs) == 0:
        raise WindowTooSmall(f"no safe square of edge {edge}")
    if len(xs) > max_squares:
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, j])
        pick = np.sort(rng.choice(len(xs), size=max_squares, replace=False))
        xs, ys = xs[pick], ys[pick]
    counts = net.cell_counter().count_squares(xs, ys, edge).astype(float)
    empty = int(np.count_nonzero(counts == 0))
    if empty:
        log.warning("edge %d: %d empty squares excluded", edge, empty)
    counts = counts[counts > 0]
    if len(counts) == 0:
        return ScaleStat(j, len(xs), empty, math.inf)
    expected = alpha * edge * edge
    e = np.maximum(expected / counts, counts / expected)
    return ScaleStat(j, len(xs), empty, float(e.max()))


@dataclass
class BKResult:
    alpha: float
    scales: list
    product_partials: list
    omega: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "seed": self.seed,
            "per_scale": [
                {"j": s.j, "sampled": s.sampled, "empty": s.empty, "max_e": s.max_e} for s in self.scales
            ],
            "product_partials": self.product_partials,
            "omega_fit": self.omega,
        }


def bk_statistics(net, alpha: float, js, max_squares: int = MAX_SQUARES, seed: int = 0) -> BKResult:
    """E_alpha over dyadic edges, partial products, and the fitted decay rate of E_alpha - 1.

    Scales whose squares are all empty are skipped (logged); the product starts at
    the first admissible scale.
    """
    scales = []
    for j in js:
        st = E_alpha(j, net, alpha, max_squares, seed)
        if math.isinf(st.max_e):
            log.warning("edge %d skipped: every sampled square is empty", 2**j)
            continue
        scales.append(st)
    partials, prod = [], 1.0
    for st in scales:
        prod *= st.max_e
        partials.append(prod)
    slope = fit_slope([s.j for s in scales], [s.max_e - 1 for s in scales])
    return BKResult(alpha, scales, partials, math.exp(slope) if not math.isnan(slope) else math.nan, seed)


# ---------------------------------------------------------------------------
# unions of unit cells


def laczkovich_ratio(U: CubeUnion, net, alpha: float, check_safe: bool = True) -> float:
    """|#(Y in U) - alpha mu(U)| / perimeter(U), with cells taken half-open for counting."""
    if check_safe and not net.cells_safe(U.cells).all():
        raise OutsideSafeRegion("cell union leaves the safe region")
    count = int(net.cell_counter().count_cells(U.cells).sum())
    return abs(count - alpha * U.area) / boundary_measure(U)


def random_polyomino(n_cells: int, rng: np.random.Generator, allowed=None, start=None) -> CubeUnion:
    """Grow a connected cell set by repeatedly adding a uniformly chosen frontier cell.

    ``allowed`` is an optional (mask, x0, y0) triple restricting growth; growth
    stops early if the allowed component is exhausted.
    """
    if allowed is not None:
        mask, x0, y0 = allowed

        def ok(c):
            ix, iy = c[0] - x0, c[1] - y0
            return 0 <= ix < mask.shape[0] and 0 <= iy < mask.shape[1] and bool(mask[ix, iy])
    else:

        def ok(c):
            return True

    if start is None:
        if allowed is None:
            start = (0, 0)
        else:
            cand = np.argwhere(mask)
            if len(cand) == 0:
                raise WindowTooSmall("no allowed cell to start from")
            k = cand[rng.integers(len(cand))]
            start = (int(k[0]) + x0, int(k[1]) + y0)
    cells = {tuple(start)}
    frontier: list = []
    in_frontier: set = set()

    def push(c):
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = (c[0] + d[0], c[1] + d[1])
            if nb not in cells and nb not in in_frontier and ok(nb):
                in_frontier.add(nb)
                frontier.append(nb)

    push(tuple(start))
    while len(cells) < n_cells and frontier:
        k = int(rng.integers(len(frontier)))
        frontier[k], frontier[-1] = frontier[-1], frontier[k]
        c = frontier.pop()
        in_frontier.discard(c)
        cells.add(c)
        push(c)
    return CubeUnion(sorted(cells))


@dataclass(frozen=True)
class WindowRatio:
    window_id: int
    cells: int
    perimeter: float
    discrepancy: float
    ratio: float


@dataclass
class LaczkovichScan:
    alpha: float
    windows: list
    max_ratio: float
    slope: float
    bins: list
    seed: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "seed": self.seed,
            "max_ratio": self.max_ratio,
            "slope": self.slope,
            "bins": self.bins,
            "windows": [
                {"id": w.window_id, "cells": w.cells, "perimeter": w.perimeter, "ratio": w.ratio}
                for w in self.windows
            ],
        }


def binned_max_slope(sizes, values, bins_per_decade: int = 2) -> tuple[float, list]:
    """Log-log slope of the per-bin maximum of ``values`` against the bin's mean size."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    key = np.floor(np.log10(sizes) * bins_per_decade).astype(int)
    rows = []
    for k in np.unique(key):
        sel = key == k
        rows.append((float(np.exp(np.log(sizes[sel]).mean())), float(values[sel].max()), int(sel.sum())))
    slope = fit_slope([math.log(r[0]) for r in rows], [r[1] for r in rows]) if len(rows) >= 2 else math.nan
    return slope, rows


def laczkovich_scan(net, alpha: float, n_windows: int = 200, min_cells: int = 10, max_cells: int = 10_000,
                    seed: int = 0) -> LaczkovichScan:
    """Ratios over seeded random polyominoes with log-uniform sizes inside the safe region."""
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    allowed = net.safe_cells()
    sizes = np.exp(rng.uniform(math.log(min_cells), math.log(max_cells), n_windows)).round().astype(int)
    rows = []
    for wid, n in enumerate(sizes.tolist()):
        U = random_polyomino(n, rng, allowed)
        count = int(net.cell_counter().count_cells(U.cells).sum())
        per = boundary_measure(U)
        disc = abs(count - alpha * U.area)
        rows.append(WindowRatio(wid, len(U), per, disc, disc / per))
    ratios = [r.ratio for r in rows]
    slope, bins = binned_max_slope([r.cells for r in rows], ratios)
    return LaczkovichScan(alpha, rows, max(ratios), slope, bins, seed)


# ---------------------------------------------------------------------------
# supertiles and layers


def tile_discrepancy(rule, i: int, m: int, alpha: float) -> float:
    """|#(T cap Y) - alpha mu(T)| for a level-m tile of type i (1-based id), from exact counts."""
    k = rule.index(i)
    e = [1 if t == k else 0 for t in range(rule.n)]
    count = sum(rule.projected_counts(e, m))
    area = rule.xi ** (2 * m) * rule.areas[k]
    return abs(count - alpha * area)


@dataclass
class Layer:
    level: int
    tiles: np.ndarray
    count: int
    area: float
    discrepancy: float


@dataclass
class LayerDecomposition:
    union_area: float
    top_level: int
    bottom_level: int
    layers: list
    residual_area: float
    residual_tiles: int
    alpha: float
    notes: list = field(default_factory=list)

    @property
    def total_area(self) -> float:
        return math.fsum([l.area for l in self.layers] + [self.residual_area])

    @property
    def relative_gap(self) -> float:
        return abs(self.total_area - self.union_area) / self.union_area

    def decay_rate(self) -> float:
        """exp of the fitted slope of log(layer discrepancy) against level."""
        rows = [(l.level, l.discrepancy) for l in self.layers if l.count > 0]
        s = fit_slope([r[0] for r in rows], [r[1] for r in rows])
        return math.exp(s) if not math.isnan(s) else math.nan

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "union_area": self.union_area,
            "top_level": self.top_level,
            "bottom_level": self.bottom_level,
            "layers": [
                {"level": l.level, "tiles": int(len(l.tiles)), "points": l.count, "area": l.area,
                 "discrepancy": l.discrepancy}
                for l in self.layers
            ],
            "residual_area": self.residual_area,
            "residual_tiles": self.residual_tiles,
            "relative_gap": self.relative_gap,
            "decay_rate": self.decay_rate(),
        }


def _level_polygons(patch, idx: np.ndarray) -> list:
    out = [None] * len(idx)
    types = patch.types[idx]
    for t in range(patch.rule.n):
        sel = np.flatnonzero(types == t)
        if len(sel) == 0:
            continue
        ref = patch.rule.tiles[t].vertices * patch.unit
        polys = patch._transform(idx[sel], ref)
        for k, p in zip(sel.tolist(), polys):
            out[k] = p
    return out


class _UnionGrid:
    def __init__(self, U: CubeUnion):
        self.U = U
        self.mask, self.x0, self.y0 = U.mask()
        nx, ny = self.mask.shape
        self.pre = np.zeros((nx + 1, ny + 1), dtype=np.int64)
        self.pre[1:, 1:] = self.mask.astype(np.int64).cumsum(axis=0).cumsum(axis=1)

    def box_counts(self, bb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell ranges covering each box and the number of member cells in them."""
        cx0 = np.floor(bb[:, 0] + AREA_TOL).astype(np.int64)
        cy0 = np.floor(bb[:, 1] + AREA_TOL).astype(np.int64)
        cx1 = np.ceil(bb[:, 2] - AREA_TOL).astype(np.int64)
        cy1 = np.ceil(bb[:, 3] - AREA_TOL).astype(np.int64)
        nx, ny = self.mask.shape

        def p(x, y):
            return self.pre[np.clip(x - self.x0, 0, nx), np.clip(y - self.y0, 0, ny)]

        inside = p(cx1, cy1) - p(cx0, cy1) - p(cx1, cy0) + p(cx0, cy0)
        total = (cx1 - cx0) * (cy1 - cy0)
        return np.stack([cx0, cy0, cx1, cy1], axis=1), inside, total


def _inside_union(poly: np.ndarray, rng, area: float, members: int, U: CubeUnion) -> bool:
    if area > members + AREA_TOL:
        return False
    x0, y0, x1, y1 = (int(v) for v in rng)
    for cx in range(x0, x1):
        for cy in range(y0, y1):
            if (cx, cy) not in U and clipped_area(poly, cx, cy, cx + 1, cy + 1) > AREA_TOL:
                return False
    return True


def _overlap_area(poly: np.ndarray, rng, U: CubeUnion) -> float:
    x0, y0, x1, y1 = (int(v) for v in rng)
    return math.fsum(
        clipped_area(poly, cx, cy, cx + 1, cy + 1)
        for cx in range(x0, x1)
        for cy in range(y0, y1)
        if (cx, cy) in U
    )


def layer_decomposition(U: CubeUnion, hierarchy, N: int = 0, alpha: float | None = None) -> LayerDecomposition:
    """Greedy top-down split of U into whole hierarchy tiles, level by level, down to level N.

    A tile enters layer l when it lies inside U and no ancestor was taken; the
    leftover level-N tiles that still meet U make up the residual part. Point
    counts per tile come from the substitution matrix, so they are exact.
    """
    if alpha is None:
        from .spectral import spectral_report

        alpha = spectral_report(hierarchy.rule).alpha
    grid = _UnionGrid(U)
    top = hierarchy.root_level
    if not 0 <= N <= top:
        raise ValueError("N must lie between 0 and the root level")
    cand = np.array([0], dtype=np.int64)
    layers, residual_area, residual_tiles = [], 0.0, 0
    for lvl in range(top, N - 1, -1):
        patch = hierarchy.levels[lvl]
        if len(cand) == 0:
            layers.append(Layer(lvl, cand, 0, 0.0, 0.0))
            continue
        bb = patch.bounding_boxes()[cand]
        ranges, members, total = grid.box_counts(bb)
        polys = _level_polygons(patch, cand)
        areas = np.abs(np.array([0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1]) for p in polys]))
        take = np.zeros(len(cand), dtype=bool)
        keep = members > 0
        for k in np.flatnonzero(keep).tolist():
            if members[k] == total[k]:
                take[k] = True
            else:
                take[k] = _inside_union(polys[k], ranges[k], areas[k], int(members[k]), U)
        chosen = cand[take]
        counts = hierarchy.tile_counts(lvl)[chosen] if len(chosen) else np.zeros(0, dtype=np.int64)
        area = math.fsum(areas[take].tolist())
        count = int(counts.sum())
        disc = abs(count - alpha * area)
        layers.append(Layer(lvl, chosen, count, area, disc))
        rest = cand[keep & ~take]
        if lvl == N:
            sel = np.flatnonzero(keep & ~take)
            residual_tiles = len(sel)
            residual_area = math.fsum(_overlap_area(polys[k], ranges[k], U) for k in sel.tolist())
            break
        cand = np.concatenate([np.arange(r.start, r.stop) for r in (hierarchy.children(lvl, int(k)) for k in rest)]) \
            if len(rest) else np.empty(0, dtype=np.int64)
    nonempty = [l.level for l in layers if len(l.tiles)]
    m = max(nonempty) if nonempty else N
    layers = [l for l in layers if l.level <= m]
    return LayerDecomposition(U.area, m, N, layers, residual_area, residual_tiles, alpha)


@dataclass
class DiscrepancyReport:
    """Bundle of discrepancy statistics for the CLI."""

    alpha: float
    bk: BKResult | None = None
    laczkovich: LaczkovichScan | None = None
    layers: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"alpha": self.alpha, "config": self.config}
        if self.bk is not None:
            out["bk"] = self.bk.to_dict()
        if self.laczkovich is not None:
            out["laczkovich"] = self.laczkovich.to_dict()
        if self.layers:
            out["layers"] = [d.to_dict() for d in self.layers]
        return out
