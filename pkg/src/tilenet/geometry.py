"""Planar geometry helpers: polygons, windows, unions of unit cells, spatial indexing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegeneratePolygon, MalformedPolygon

AREA_EPS = 1e-12
COORD_TOL = 1e-9


# ---------------------------------------------------------------------------
# polygons


def polygon_area(vertices) -> float:
    """Shoelace area; positive for counterclockwise vertex order."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3:
        raise MalformedPolygon("polygon needs at least 3 vertices")
    x, y = v[:, 0], v[:, 1]
    area = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    if abs(area) < AREA_EPS:
        raise DegeneratePolygon(f"polygon area {area:.3g} below {AREA_EPS}")
    return area


def signed_areas(polys: np.ndarray) -> np.ndarray:
    """Shoelace areas of a stack of polygons with shape (N, V, 2)."""
    x, y = polys[..., 0], polys[..., 1]
    return 0.5 * (np.sum(x * np.roll(y, -1, axis=-1), axis=-1) - np.sum(np.roll(x, -1, axis=-1) * y, axis=-1))


def polygon_centroid(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    return np.array([((x + xn) * cross).sum() / (6 * a), ((y + yn) * cross).sum() / (6 * a)])


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def is_simple(vertices) -> bool:
    """True when no two non-adjacent edges properly cross."""
    v = [tuple(p) for p in np.asarray(vertices, dtype=float)]
    n = len(v)
    for i in range(n):
        a1, a2 = v[i], v[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a1, a2, v[j], v[(j + 1) % n]):
                return False
    return True


def segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points (P, 2) to segments a->b (S, 2); result shape (P, S)."""
    p = points[:, None, :]
    ab = (b - a)[None, :, :]
    ap = p - a[None, :, :]
    denom = np.sum(ab * ab, axis=-1)
    denom = np.where(denom == 0, 1.0, denom)
    t = np.clip(np.sum(ap * ab, axis=-1) / denom, 0.0, 1.0)
    d = ap - t[..., None] * ab
    return np.hypot(d[..., 0], d[..., 1])


def points_in_polygon(points, vertices) -> np.ndarray:
    """Even-odd containment test; points on the boundary are unspecified."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(v)
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > y) != (y2 > y)
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


def boundary_distance(points, vertices) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    return segment_distances(pts, v, np.roll(v, -1, axis=0)).min(axis=1)


def contains_points(vertices, points, tol: float = COORD_TOL) -> np.ndarray:
    """Closed containment with slack: inside, or within ``tol`` of the boundary."""
    return points_in_polygon(points, vertices) | (boundary_distance(points, vertices) <= tol)


def strictly_inside(vertices, points, tol: float = COORD_TOL) -> np.ndarray:
    return points_in_polygon(points, vertices) & (boundary_distance(points, vertices) > tol)


def clip_polygon_rect(vertices, x0: float, y0: float, x1: float, y1: float) -> list:
    """Sutherland-Hodgman clip of a polygon against the rectangle [x0,x1]x[y0,y1]."""
    poly = [(float(p[0]), float(p[1])) for p in vertices]
    for axis, bound, keep_ge in ((0, x0, True), (0, x1, False), (1, y0, True), (1, y1, False)):
        if not poly:
            break
        out = []
        prev = poly[-1]
        for cur in poly:
            cin = cur[axis] >= bound if keep_ge else cur[axis] <= bound
            pin = prev[axis] >= bound if keep_ge else prev[axis] <= bound
            if cin != pin:
                t = (bound - prev[axis]) / (cur[axis] - prev[axis])
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            if cin:
                out.append(cur)
            prev = cur
        poly = out
    return poly


def clipped_area(vertices, x0, y0, x1, y1) -> float:
    poly = clip_polygon_rect(vertices, x0, y0, x1, y1)
    if len(poly) < 3:
        return 0.0
    s = 0.0
    for (ax, ay), (bx, by) in zip(poly, poly[1:] + poly[:1]):
        s += ax * by - bx * ay
    return abs(s) / 2.0


def polygon_intersects_rect(vertices, x0, y0, x1, y1, tol: float = COORD_TOL) -> bool:
    """Closed-set intersection test between a simple polygon and a rectangle."""
    v = np.asarray(vertices, dtype=float)
    if np.any((v[:, 0] >= x0 - tol) & (v[:, 0] <= x1 + tol) & (v[:, 1] >= y0 - tol) & (v[:, 1] <= y1 + tol)):
        return True
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    if np.any(contains_points(v, corners, tol)):
        return True
    rect_a, rect_b = corners, np.roll(corners, -1, axis=0)
    poly_a, poly_b = v, np.roll(v, -1, axis=0)
    for pa, pb in zip(poly_a, poly_b):
        for ra, rb in zip(rect_a, rect_b):
            if _segments_cross(pa, pb, ra, rb):
                return True
    return False


def rect_segment_distance(rx0, ry0, rx1, ry1, a, b) -> np.ndarray:
    """Distance between axis-aligned rectangles (arrays) and one segment a->b."""
    rx0, ry0, rx1, ry1 = (np.asarray(t, dtype=float) for t in (rx0, ry0, rx1, ry1))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = rx0.shape
    rx0, ry0, rx1, ry1 = rx0.ravel(), ry0.ravel(), rx1.ravel(), ry1.ravel()
    # distance from segment endpoints to rectangles
    best = np.full(rx0.shape, np.inf)
    for p in (a, b):
        dx = np.maximum(np.maximum(rx0 - p[0], 0), p[0] - rx1)
        dy = np.maximum(np.maximum(ry0 - p[1], 0), p[1] - ry1)
        best = np.minimum(best, np.hypot(dx, dy))
    # distance from rectangle corners to the segment
    for cx, cy in ((rx0, ry0), (rx1, ry0), (rx1, ry1), (rx0, ry1)):
        pts = np.stack([cx, cy], axis=1)
        best = np.minimum(best, segment_distances(pts, a[None], b[None])[:, 0])
    # segment crossing the rectangle interior gives zero distance
    d = b - a
    tmin, tmax = np.zeros_like(rx0), np.ones_like(rx0)
    for axis, lo, hi in ((0, rx0, rx1), (1, ry0, ry1)):
        if d[axis] == 0:
            outside = (a[axis] < lo) | (a[axis] > hi)
            tmax = np.where(outside, -1.0, tmax)
        else:
            t1 = (lo - a[axis]) / d[axis]
            t2 = (hi - a[axis]) / d[axis]
            tmin = np.maximum(tmin, np.minimum(t1, t2))
            tmax = np.minimum(tmax, np.maximum(t1, t2))
    best = np.where(tmin <= tmax, 0.0, best)
    return best.reshape(shape)


# ---------------------------------------------------------------------------
# windows and unions of unit cells


@dataclass(frozen=True)
class Window:
    """Axis-aligned square with lower-left corner (x, y) and the given edge."""

    x: float
    y: float
    edge: float

    def __post_init__(self):
        if not self.edge > 0:
            raise ValueError("window edge must be positive")

    @property
    def x1(self) -> float:
        return self.x + self.edge

    @property
    def y1(self) -> float:
        return self.y + self.edge

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.edge / 2, self.y + self.edge / 2)

    def contains(self, points, tol: float = COORD_TOL) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (p[:, 0] >= self.x - tol)
            & (p[:, 0] <= self.x1 + tol)
            & (p[:, 1] >= self.y - tol)
            & (p[:, 1] <= self.y1 + tol)
        )

    def eroded(self, margin: float) -> "Window":
        return Window(self.x + margin, self.y + margin, self.edge - 2 * margin)

    def polygon(self) -> np.ndarray:
        return np.array([[self.x, self.y], [self.x1, self.y], [self.x1, self.y1], [self.x, self.y1]])

    @classmethod
    def centered(cls, cx: float, cy: float, edge: float) -> "Window":
        return cls(cx - edge / 2, cy - edge / 2, edge)


class CubeUnion:
    """Finite union of closed unit squares [x, x+1] x [y, y+1] with integer corners."""

    def __init__(self, cells: Iterable):
        arr = np.asarray(list(cells) if not isinstance(cells, np.ndarray) else cells, dtype=np.int64)
        arr = arr.reshape(-1, 2)
        arr = np.unique(arr, axis=0)
        self.cells = arr
        self._set = frozenset(map(tuple, arr.tolist()))

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self._set

    def __iter__(self):
        return iter(map(tuple, self.cells.tolist()))

    @property
    def area(self) -> float:
        return float(len(self.cells))

    def translated(self, dx: int, dy: int) -> "CubeUnion":
        return CubeUnion(self.cells + np.array([dx, dy], dtype=np.int64))

    def bounds(self) -> tuple[int, int, int, int]:
        lo = self.cells.min(axis=0)
        hi = self.cells.max(axis=0) + 1
        return int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])

    def mask(self) -> tuple[np.ndarray, int, int]:
        """Boolean occupancy array over the bounding box, plus its origin."""
        x0, y0, x1, y1 = self.bounds()
        m = np.zeros((x1 - x0, y1 - y0), dtype=bool)
        m[self.cells[:, 0] - x0, self.cells[:, 1] - y0] = True
        return m, x0, y0

    def boundary_edges(self) -> np.ndarray:
        """Unit edges separating a member cell from a non-member, shape (E, 2, 2)."""
        edges = []
        for dx, dy, a, b in (
            (-1, 0, (0, 0), (0, 1)),
            (1, 0, (1, 0), (1, 1)),
            (0, -1, (0, 0), (1, 0)),
            (0, 1, (0, 1), (1, 1)),
        ):
            for cx, cy in self.cells.tolist():
                if (cx + dx, cy + dy) not in self._set:
                    edges.append(((cx + a[0], cy + a[1]), (cx + b[0], cy + b[1])))
        return np.asarray(edges, dtype=float).reshape(-1, 2, 2)

    def to_text(self) -> str:
        return "\n".join(f"{x} {y}" for x, y in self.cells.tolist()) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CubeUnion":
        cells = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                x, y = line.replace(",", " ").split()
                cells.append((int(x), int(y)))
        return cls(cells)


def boundary_measure(union: CubeUnion) -> float:
    """Perimeter of a cell union: the number of cell edges with exactly one member cell."""
    m, _, _ = union.mask()
    padded = np.pad(m, 1).astype(np.int8)
    horizontal = np.abs(np.diff(padded, axis=0)).sum()
    vertical = np.abs(np.diff(padded, axis=1)).sum()
    return float(horizontal + vertical)


@dataclass(frozen=True)
class LayerEstimate:
    value: float
    stderr: float
    samples_per_cell: int


def inner_layer_estimate(union: CubeUnion, s: float, samples_per_cell: int = 1024, seed: int = 0) -> LayerEstimate:
    """Stratified Monte-Carlo estimate of the area of {x in U : d(x, boundary U) <= s}.

    Each cell is sampled on a jittered sqrt(k) x sqrt(k) grid with its own seed
    derived from ``seed`` and the cell coordinates, so results do not depend on
    cell order.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    side = max(1, int(round(math.sqrt(samples_per_cell))))
    k = side * side
    edges = union.boundary_edges()
    if len(edges) == 0:
        return LayerEstimate(0.0, 0.0, k)
    reach = int(math.ceil(s)) + 1
    # bucket boundary edges by the cell containing their midpoint
    mids = np.floor(edges.mean(axis=1)).astype(np.int64)
    buckets: dict = {}
    for idx, (ox, oy) in enumerate(mids.tolist()):
        buckets.setdefault((ox, oy), []).append(idx)
    grid = np.arange(side) / side
    diag = math.sqrt(2.0) / side
    gx, gy = np.meshgrid(grid, grid, indexing="ij")
    base = np.stack([gx.ravel(), gy.ravel()], axis=1)
    total = 0.0
    var = 0.0
    for cx, cy in union.cells.tolist():
        near = []
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                near.extend(buckets.get((cx + dx, cy + dy), ()))
        if not near:
            continue
        e = edges[np.unique(near)]
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, cx & 0xFFFFFFFF, cy & 0xFFFFFFFF])
        pts = base + rng.random((k, 2)) / side + np.array([cx, cy], dtype=float)
        d = segment_distances(pts, e[:, 0, :], e[:, 1, :]).min(axis=1)
        hit = d <= s
        total += hit.mean()
        # distance is 1-Lipschitz, so only sub-squares whose sample lies within one
        # sub-square diagonal of the level set can be split; each adds at most 1/4
        mixed = np.count_nonzero(np.abs(d - s) <= diag)
        var += 0.25 * mixed / k**2
    return LayerEstimate(total, math.sqrt(var), k)


def inner_layer_measure(union: CubeUnion, s: float, samples_per_cell: int = 1024, seed: int = 0) -> float:
    return inner_layer_estimate(union, s, samples_per_cell, seed).value


# ---------------------------------------------------------------------------
# spatial indexing


class GridIndex:
    """Uniform bucket grid over a fixed point set; every point lives in exactly one bucket."""

    def __init__(self, points, bucket_size: float):
        if not bucket_size > 0:
            raise ValueError("bucket size must be positive")
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        self.points = pts
        self.bucket_size = float(bucket_size)
        keys = np.floor(pts / self.bucket_size).astype(np.int64)
        order = np.lexsort((keys[:, 1], keys[:, 0]))
        self._order = order
        sk = keys[order]
        self.buckets: dict = {}
        if len(sk):
            change = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
            starts = np.concatenate([[0], change])
            ends = np.concatenate([change, [len(sk)]])
            for s, e in zip(starts.tolist(), ends.tolist()):
                self.buckets[(int(sk[s, 0]), int(sk[s, 1]))] = (s, e)

    def __len__(self) -> int:
        return len(self.points)

    def bucket(self, key) -> np.ndarray:
        span = self.buckets.get(tuple(key))
        if span is None:
            return np.empty(0, dtype=np.int64)
        return self._order[span[0]:span[1]]

    def _candidates(self, x0, y0, x1, y1) -> np.ndarray:
        b = self.bucket_size
        bx0, by0 = math.floor(x0 / b), math.floor(y0 / b)
        bx1, by1 = math.floor(x1 / b), math.floor(y1 / b)
        nb = (bx1 - bx0 + 1) * (by1 - by0 + 1)
        if nb > len(self.buckets):
            spans = [
                self._order[s:e]
                for (kx, ky), (s, e) in self.buckets.items()
                if bx0 <= kx <= bx1 and by0 <= ky <= by1
            ]
        else:
            spans = []
            for kx in range(bx0, bx1 + 1):
                for ky in range(by0, by1 + 1):
                    span = self.buckets.get((kx, ky))
                    if span is not None:
                        spans.append(self._order[span[0]:span[1]])
        if not spans:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(spans)

    def query_rect(self, x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
        """Indices of points with x0 <= x <= x1 and y0 <= y <= y1, sorted."""
        cand = self._candidates(x0, y0, x1, y1)
        p = self.points[cand]
        keep = (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)
        return np.sort(cand[keep])

    def count_rect(self, x0, y0, x1, y1) -> int:
        return int(len(self.query_rect(x0, y0, x1, y1)))

    def query_radius(self, center, radius: float) -> np.ndarray:
        cx, cy = float(center[0]), float(center[1])
        cand = self._candidates(cx - radius, cy - radius, cx + radius, cy + radius)
        p = self.points[cand]
        keep = np.hypot(p[:, 0] - cx, p[:, 1] - cy) <= radius
        return np.sort(cand[keep])


class CellCounter:
    """Point counts per half-open integer cell [x, x+1) x [y, y+1) with 2-D prefix sums."""

    def __init__(self, points, scale: float = 1.0):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        cells = np.floor(pts).astype(np.int64)
        if len(cells):
            self.x0, self.y0 = (int(v) for v in cells.min(axis=0))
            x1, y1 = (int(v) + 1 for v in cells.max(axis=0))
        else:
            self.x0 = self.y0 = 0
            x1 = y1 = 1
        self.shape = (x1 - self.x0, y1 - self.y0)
        counts = np.zeros(self.shape, dtype=np.int64)
        np.add.at(counts, (cells[:, 0] - self.x0, cells[:, 1] - self.y0), 1)
        self.counts = counts
        self.prefix = np.zeros((self.shape[0] + 1, self.shape[1] + 1), dtype=np.int64)
        self.prefix[1:, 1:] = counts.cumsum(axis=0).cumsum(axis=1)

    def _p(self, x, y) -> np.ndarray:
        ix = np.clip(np.asarray(x, dtype=np.int64) - self.x0, 0, self.shape[0])
        iy = np.clip(np.asarray(y, dtype=np.int64) - self.y0, 0, self.shape[1])
        return self.prefix[ix, iy]

    def count_squares(self, xs, ys, edge: int) -> np.ndarray:
        """Counts in [x, x+edge) x [y, y+edge) for integer corners (vectorized)."""
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        return self._p(xs + edge, ys + edge) - self._p(xs, ys + edge) - self._p(xs + edge, ys) + self._p(xs, ys)

    def count_cells(self, cells) -> np.ndarray:
        c = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        ix = c[:, 0] - self.x0
        iy = c[:, 1] - self.y0
        ok = (ix >= 0) & (ix < self.shape[0]) & (iy >= 0) & (iy < self.shape[1])
        out = np.zeros(len(c), dtype=np.int64)
        out[ok] = self.counts[ix[ok], iy[ok]]
        return out


def safe_cell_mask(support, margin: float, bounds=None) -> tuple[np.ndarray, int, int]:
    """Cells [x,x+1]x[y,y+1] lying inside ``support`` at distance >= margin from its boundary.

    Returns the boolean mask and the integer origin of its first cell.
    """
    v = np.asarray(support, dtype=float)
    if bounds is None:
        x0, y0 = np.floor(v.min(axis=0)).astype(int)
        x1, y1 = np.ceil(v.max(axis=0)).astype(int)
    else:
        x0, y0, x1, y1 = bounds
    xs = np.arange(x0, x1)
    ys = np.arange(y0, y1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    centers = np.stack([gx.ravel() + 0.5, gy.ravel() + 0.5], axis=1)
    ok = points_in_polygon(centers, v)
    dist = np.full(len(centers), np.inf)
    fx, fy = gx.ravel().astype(float), gy.ravel().astype(float)
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        dist = np.minimum(dist, rect_segment_distance(fx, fy, fx + 1, fy + 1, a, b))
    ok &= dist >= margin
    return ok.reshape(gx.shape), int(x0), int(y0)


# ---------------------------------------------------------------------------
# patches against windows


def tiles_inside(patch, window: Window, tol: float = COORD_TOL):
    """Tiles with every vertex inside ``window`` (closed, with slack ``tol``)."""
    bb = patch.bounding_boxes()
    keep = (
        (bb[:, 0] >= window.x - tol)
        & (bb[:, 1] >= window.y - tol)
        & (bb[:, 2] <= window.x1 + tol)
        & (bb[:, 3] <= window.y1 + tol)
    )
    return patch.subset(keep)


def tiles_meeting(patch, window: Window, tol: float = COORD_TOL):
    """Tiles whose closed support intersects ``window``."""
    bb = patch.bounding_boxes()
    hit = (
        (bb[:, 2] >= window.x - tol)
        & (bb[:, 0] <= window.x1 + tol)
        & (bb[:, 3] >= window.y - tol)
        & (bb[:, 1] <= window.y1 + tol)
    )
    inside = (
        (bb[:, 0] >= window.x - tol)
        & (bb[:, 1] >= window.y - tol)
        & (bb[:, 2] <= window.x1 + tol)
        & (bb[:, 3] <= window.y1 + tol)
    )
    # bounding box overlaps but the tile itself may miss a corner region
    for k in np.flatnonzero(hit & ~inside).tolist():
        hit[k] = polygon_intersects_rect(patch.polygon(k), window.x, window.y, window.x1, window.y1, tol)
    return patch.subset(hit)
