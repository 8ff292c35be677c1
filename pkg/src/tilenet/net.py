"""Separated nets: one point per tile, Delone parameters, CSV exchange."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyPatch, TooFewPoints
from .geometry import (
    COORD_TOL,
    CellCounter,
    GridIndex,
    Window,
    boundary_distance,
    points_in_polygon,
    rect_segment_distance,
    safe_cell_mask,
)

MAX_COVER_SAMPLES = 2_000_000


@dataclass(frozen=True)
class DeloneParams:
    R: float
    r: float
    spacing: float
    samples: int


def bounding_window(points) -> Window:
    """Smallest axis-aligned square anchored at the lower-left extreme of the points."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    lo, hi = p.min(axis=0), p.max(axis=0)
    edge = float((hi - lo).max())
    return Window(float(lo[0]), float(lo[1]), edge if edge > 0 else 1.0)


@dataclass
class NetWindow:
    """A finite separated net with its window, spatial index and optional support outline.

    Counts taken closer than ``margin`` to the support boundary may be truncated
    by the finite patch; extracted nets use one level-0 tile diameter.
    """

    points: np.ndarray
    window: Window
    index: GridIndex
    tile_ids: np.ndarray
    addresses: object
    provenance: dict
    support: np.ndarray | None = None
    margin: float = 0.0
    R: float = math.nan
    r: float = math.nan
    spacing: float = math.nan
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.points)

    def address_strings(self) -> list:
        """Dotted child-index paths (addresses may be stored as an integer array)."""
        a = self.addresses
        if isinstance(a, np.ndarray):
            return [".".join(map(str, row)) for row in a.tolist()]
        return list(a)

    @property
    def region(self) -> np.ndarray:
        return self.support if self.support is not None else self.window.polygon()

    def cell_counter(self) -> CellCounter:
        if "counter" not in self._cache:
            self._cache["counter"] = CellCounter(self.points)
        return self._cache["counter"]

    def safe_cells(self) -> tuple[np.ndarray, int, int]:
        """Mask of integer cells whose counts are not truncated, with its origin."""
        if "safe" not in self._cache:
            self._cache["safe"] = safe_cell_mask(self.region, self.margin)
        return self._cache["safe"]

    def cells_safe(self, cells) -> np.ndarray:
        mask, x0, y0 = self.safe_cells()
        c = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        ix, iy = c[:, 0] - x0, c[:, 1] - y0
        ok = (ix >= 0) & (ix < mask.shape[0]) & (iy >= 0) & (iy < mask.shape[1])
        out = np.zeros(len(c), dtype=bool)
        out[ok] = mask[ix[ok], iy[ok]]
        return out

    def is_safe_rect(self, x0: float, y0: float, x1: float, y1: float) -> bool:
        """True when the closed rectangle lies in the support at distance >= margin from its edge."""
        region = self.region
        corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        outside = ~points_in_polygon(corners, region) & (boundary_distance(corners, region) > COORD_TOL)
        if outside.any():
            return False
        t = COORD_TOL
        for a, b in zip(region, np.roll(region, -1, axis=0)):
            if rect_segment_distance(x0, y0, x1, y1, a, b) < self.margin - t:
                return False
            # an edge reaching into the interior means the rectangle pokes outside
            if x1 - x0 > 2 * t and y1 - y0 > 2 * t and rect_segment_distance(x0 + t, y0 + t, x1 - t, y1 - t, a, b) <= 0:
                return False
        return True

    def scaled(self, factor: float) -> "NetWindow":
        pts = self.points * factor
        return NetWindow(
            pts,
            Window(self.window.x * factor, self.window.y * factor, self.window.edge * factor),
            GridIndex(pts, self.index.bucket_size * factor),
            self.tile_ids,
            self.addresses,
            dict(self.provenance, scale=self.provenance.get("scale", 1.0) * factor),
            None if self.support is None else self.support * factor,
            self.margin * factor,
            self.R * factor,
            self.r * factor,
            self.spacing * factor,
        )


def _tree(points) -> cKDTree:
    if isinstance(points, cKDTree):
        return points
    return cKDTree(np.asarray(points, dtype=float), balanced_tree=False, compact_nodes=False)


def packing_radius(points) -> float:
    """Half the minimum pairwise distance."""
    tree = _tree(points)
    if tree.n < 2:
        raise TooFewPoints("need at least two points")
    d, _ = tree.query(tree.data, k=2, workers=-1)
    return float(d[:, 1].min()) / 2.0


def covering_radius(points, region, spacing: float, margin: float = 0.0,
                    max_samples: int = MAX_COVER_SAMPLES) -> tuple[float, float, int]:
    """Largest nearest-point distance over grid samples in ``region`` at least ``margin`` from its edge.

    The grid starts at the lower-left corner of the region's bounding box; the
    spacing is widened when the grid would exceed ``max_samples``. Returns
    (estimate, spacing used, number of samples).
    """
    poly = np.asarray(region, dtype=float)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    area = float(np.prod(hi - lo))
    if area / spacing**2 > max_samples:
        spacing = math.sqrt(area / max_samples)
    xs = lo[0] + spacing * np.arange(int(math.floor((hi[0] - lo[0]) / spacing)) + 1)
    ys = lo[1] + spacing * np.arange(int(math.floor((hi[1] - lo[1]) / spacing)) + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    samples = np.stack([gx.ravel(), gy.ravel()], axis=1)
    samples = samples[points_in_polygon(samples, poly)]
    if margin > 0 and len(samples):
        samples = samples[boundary_distance(samples, poly) >= margin]
    if len(samples) == 0:
        return math.nan, spacing, 0
    d, _ = _tree(points).query(samples, workers=-1)
    return float(d.max()), spacing, len(samples)


def delone_params(net: NetWindow, spacing: float | None = None, max_samples: int = MAX_COVER_SAMPLES) -> DeloneParams:
    """Packing radius (exact) and covering radius (grid-sampled, spacing r/2 by default).

    Extracted nets are sampled on their support away from the margin; bare point
    sets on their window, eroded by the running estimate until it settles.
    """
    if len(net) < 2:
        raise TooFewPoints("need at least two points")
    tree = _tree(net.points)
    r = packing_radius(tree)
    step = spacing if spacing is not None else r / 2.0
    if net.support is not None:
        R, used, n = covering_radius(tree, net.support, step, net.margin, max_samples)
        return DeloneParams(R, r, used, n)
    w = net.window
    R, used, n = covering_radius(tree, w.polygon(), step, 0.0, max_samples)
    for _ in range(5):
        if not w.edge > 2 * R:
            break
        R2, used, n = covering_radius(tree, w.polygon(), step, R, max_samples)
        settled = abs(R2 - R) <= used
        R = R2
        if settled:
            break
    return DeloneParams(R, r, used, n)


def _finish(net: NetWindow, compute_params: bool, max_samples: int) -> NetWindow:
    if compute_params and len(net) >= 2:
        p = delone_params(net, max_samples=max_samples)
        net.R, net.r, net.spacing = p.R, p.r, p.spacing
    return net


def extract_net(patch, compute_params: bool = True, max_samples: int = MAX_COVER_SAMPLES) -> NetWindow:
    """One point per tile at its centroid, with a spatial index and Delone parameters."""
    if len(patch) == 0:
        raise EmptyPatch("cannot extract a net from an empty patch")
    pts = patch.centroids()
    rule = patch.rule
    diam = rule.max_diameter * patch.unit
    window = bounding_window(patch.support if patch.support is not None else pts)
    net = NetWindow(
        points=pts,
        window=window,
        index=GridIndex(pts, diam),
        tile_ids=patch.tile_ids,
        addresses=patch.addresses,
        provenance={
            "rule": rule.name,
            "root_level": int(patch.root_level),
            "level": int(patch.level),
            "scale": float(patch.scale),
        },
        support=None if patch.support is None else np.asarray(patch.support, dtype=float),
        margin=diam,
    )
    return _finish(net, compute_params, max_samples)


def point_net(points, window: Window | None = None, tile_ids=None, addresses=None,
              provenance: dict | None = None, compute_params: bool = True, bucket_size: float | None = None) -> NetWindow:
    """Wrap an arbitrary point set (imported or synthetic) as a net."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyPatch("empty point set")
    w = window or bounding_window(pts)
    if bucket_size is None:
        bucket_size = max(w.edge / max(math.sqrt(len(pts)), 1.0), 1e-6)
    net = NetWindow(
        points=pts,
        window=w,
        index=GridIndex(pts, bucket_size),
        tile_ids=np.zeros(len(pts), dtype=np.int64) if tile_ids is None else np.asarray(tile_ids),
        addresses=[""] * len(pts) if addresses is None else list(addresses),
        provenance=provenance or {"rule": "points"},
    )
    return _finish(net, compute_params, MAX_COVER_SAMPLES)


def lattice_net(x0: int, y0: int, nx: int, ny: int, compute_params: bool = False) -> NetWindow:
    """Unit integer lattice with one point at the centre of every cell of a rectangle."""
    gx, gy = np.meshgrid(np.arange(x0, x0 + nx) + 0.5, np.arange(y0, y0 + ny) + 0.5, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    w = Window(float(x0), float(y0), float(max(nx, ny)))
    support = np.array([[x0, y0], [x0 + nx, y0], [x0 + nx, y0 + ny], [x0, y0 + ny]], dtype=float)
    net = NetWindow(
        points=pts,
        window=w,
        index=GridIndex(pts, 1.0),
        tile_ids=np.zeros(len(pts), dtype=np.int64),
        addresses=[""] * len(pts),
        provenance={"rule": "unit-lattice"},
        support=support,
        margin=0.0,
    )
    return _finish(net, compute_params, MAX_COVER_SAMPLES)


# ---------------------------------------------------------------------------
# CSV exchange

NET_COLUMNS = ("x", "y", "tileId", "address")


def write_net_csv(net: NetWindow, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(NET_COLUMNS)
        for (x, y), tid, addr in zip(net.points.tolist(), net.tile_ids.tolist(), net.address_strings()):
            w.writerow([repr(float(x)), repr(float(y)), int(tid), addr])


def read_net_csv(path, compute_params: bool = True) -> NetWindow:
    """Read a point set; only the x and y columns are required."""
    xs, ids, addrs = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: CSV needs x and y columns")
        for row in reader:
            xs.append((float(row["x"]), float(row["y"])))
            ids.append(int(row["tileId"]) if row.get("tileId") not in (None, "") else 0)
            addrs.append(row.get("address") or "")
    return point_net(np.array(xs), tile_ids=ids, addresses=addrs,
                     provenance={"rule": "csv", "source": str(path)}, compute_params=compute_params)
