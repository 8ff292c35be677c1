"""Bounded-displacement matchings between a net and a scaled square lattice."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial import cKDTree

from .errors import NoPerfectMatchingUnderCap
from .geometry import COORD_TOL, Window
from .spectral import fit_slope

UNMATCHED = -1


def lattice_points(beta: float, W: Window, origin=(0.0, 0.0), tol: float = COORD_TOL) -> np.ndarray:
    """All points of origin + beta Z^2 in the closed window W."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    ox, oy = float(origin[0]), float(origin[1])
    i0 = math.ceil((W.x - ox - tol) / beta)
    i1 = math.floor((W.x1 - ox + tol) / beta)
    j0 = math.ceil((W.y - oy - tol) / beta)
    j1 = math.floor((W.y1 - oy + tol) / beta)
    if i1 < i0 or j1 < j0:
        return np.empty((0, 2))
    gx, gy = np.meshgrid(ox + beta * np.arange(i0, i1 + 1), oy + beta * np.arange(j0, j1 + 1), indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


# ---------------------------------------------------------------------------
# bipartite matching


def _max_matching(n_left: int, n_right: int, ei: np.ndarray, ej: np.ndarray, left: np.ndarray) -> tuple[np.ndarray, int]:
    """Maximum matching (Hopcroft-Karp) restricted to the left vertices in ``left``."""
    sel = left[ei]
    g = csr_matrix((np.ones(int(sel.sum()), dtype=np.int8), (ei[sel], ej[sel])), shape=(n_left, n_right))
    m = maximum_bipartite_matching(g, perm_type="column")
    return m, int(np.count_nonzero(m >= 0))


def _cover_matching(n_a: int, n_b: int, ei: np.ndarray, ej: np.ndarray, req_a: np.ndarray, req_b: np.ndarray):
    """A matching covering every required vertex on both sides, or None if none exists.

    One matching saturating the required A vertices and one saturating the
    required B vertices are merged along the paths and cycles of their union
    (Mendelsohn-Dulmage).
    """
    m1_a, s1 = _max_matching(n_a, n_b, ei, ej, req_a)
    if s1 < int(req_a.sum()):
        return None
    m2_b, s2 = _max_matching(n_b, n_a, ej, ei, req_b)
    if s2 < int(req_b.sum()):
        return None
    m1_b = np.full(n_b, UNMATCHED, dtype=np.int64)
    hit = np.flatnonzero(m1_a >= 0)
    m1_b[m1_a[hit]] = hit
    m2_a = np.full(n_a, UNMATCHED, dtype=np.int64)
    hit = np.flatnonzero(m2_b >= 0)
    m2_a[m2_b[hit]] = hit
    # components of M1 + M2 via union-find over edges of both matchings
    parent = np.arange(n_a + n_b)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b in list(zip(np.flatnonzero(m1_a >= 0).tolist(), m1_a[m1_a >= 0].tolist())) + list(
        zip(np.flatnonzero(m2_a >= 0).tolist(), m2_a[m2_a >= 0].tolist())
    ):
        ra, rb = find(a), find(n_a + b)
        if ra != rb:
            parent[ra] = rb
    # a B vertex covered only by M2 forces M2 on its component
    only_m2 = np.flatnonzero((m1_b == UNMATCHED) & (m2_b >= 0))
    force = {find(n_a + b) for b in only_m2.tolist()}
    final_a = np.full(n_a, UNMATCHED, dtype=np.int64)
    for a in range(n_a):
        if m1_a[a] == UNMATCHED and m2_a[a] == UNMATCHED:
            continue
        final_a[a] = m2_a[a] if find(a) in force else m1_a[a]
    return final_a


@dataclass
class MatchResult:
    net_points: np.ndarray
    lattice_points: np.ndarray
    pairs: np.ndarray
    bottleneck: float
    unmatched_net: int
    unmatched_lattice: int
    window_edge: float
    beta: float
    cap: float
    extra: dict = field(default_factory=dict)

    @property
    def displacements(self) -> np.ndarray:
        if len(self.pairs) == 0:
            return np.empty(0)
        d = self.net_points[self.pairs[:, 0]] - self.lattice_points[self.pairs[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])

    def summary(self) -> dict:
        return {
            "pairs": int(len(self.pairs)),
            "bottleneck": self.bottleneck,
            "unmatched_net": self.unmatched_net,
            "unmatched_lattice": self.unmatched_lattice,
            "window_edge": self.window_edge,
            "beta": self.beta,
            "cap": self.cap,
            **self.extra,
        }


def bottleneck_match(net_points, lattice_points, cap: float | None = None, required_net=None,
                     required_lattice=None, window_edge: float = math.nan, beta: float = math.nan) -> MatchResult:
    """Matching covering the required points of both sets with the least possible maximum displacement.

    By default the smaller set is required in full (both when sizes agree). The
    optimum is one of the pairwise distances up to ``cap``; it is found by binary
    search with a matching feasibility test on the pairs no longer than the candidate.
    ``cap`` defaults to the diameter of the joint bounding box, which admits every pair.
    """
    A = np.asarray(net_points, dtype=float).reshape(-1, 2)
    B = np.asarray(lattice_points, dtype=float).reshape(-1, 2)
    na, nb = len(A), len(B)
    if required_net is None and required_lattice is None:
        req_a = np.full(na, na <= nb)
        req_b = np.full(nb, nb <= na)
    else:
        req_a = np.zeros(na, bool) if required_net is None else np.asarray(required_net, bool)
        req_b = np.zeros(nb, bool) if required_lattice is None else np.asarray(required_lattice, bool)
    if na == 0 or nb == 0:
        if req_a.any() or req_b.any():
            raise NoPerfectMatchingUnderCap("required points have no partners")
        return MatchResult(A, B, np.empty((0, 2), int), 0.0, na, nb, window_edge, beta, 0.0)
    if cap is None:
        both = np.vstack([A, B])
        cap = float(np.hypot(*(both.max(axis=0) - both.min(axis=0)))) + COORD_TOL
    ta, tb = cKDTree(A), cKDTree(B)
    sdm = ta.sparse_distance_matrix(tb, cap, output_type="ndarray")
    ei, ej, ed = sdm["i"].astype(np.int64), sdm["j"].astype(np.int64), sdm["v"].astype(float)
    # coincident points are dropped by the sparse matrix; add them back at distance 0
    zero = tb.query(A, distance_upper_bound=0.0)
    z_i = np.flatnonzero(np.isfinite(zero[0]))
    if len(z_i):
        hits = ta.query_ball_tree(tb, 0.0)
        zi, zj = [], []
        for a in z_i.tolist():
            for b in hits[a]:
                zi.append(a)
                zj.append(b)
        ei = np.concatenate([ei, np.array(zi, np.int64)])
        ej = np.concatenate([ej, np.array(zj, np.int64)])
        ed = np.concatenate([ed, np.zeros(len(zi))])
    useful = req_a[ei] | req_b[ej]
    ei, ej, ed = ei[useful], ej[useful], ed[useful]
    order = np.argsort(ed, kind="stable")
    ei, ej, ed = ei[order], ej[order], ed[order]
    cands = np.unique(ed)
    if len(cands) == 0:
        if req_a.any() or req_b.any():
            raise NoPerfectMatchingUnderCap(f"no pair within cap {cap:g}")
        return MatchResult(A, B, np.empty((0, 2), int), 0.0, na, nb, window_edge, beta, cap)

    def attempt(k: int):
        cut = np.searchsorted(ed, cands[k], side="right")
        return _cover_matching(na, nb, ei[:cut], ej[:cut], req_a, req_b)

    best = attempt(len(cands) - 1)
    if best is None:
        raise NoPerfectMatchingUnderCap(f"required points cannot all be matched within cap {cap:g}")
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        res = attempt(mid)
        if res is None:
            lo = mid + 1
        else:
            hi, best = mid, res
    hit = np.flatnonzero(best >= 0)
    pairs = np.stack([hit, best[hit]], axis=1).astype(np.int64)
    d = A[pairs[:, 0]] - B[pairs[:, 1]]
    bottleneck = float(np.hypot(d[:, 0], d[:, 1]).max()) if len(pairs) else 0.0
    return MatchResult(A, B, pairs, bottleneck, na - len(pairs), nb - len(pairs), window_edge, beta, cap)


def brute_force_bottleneck(A, B) -> float:
    """Exhaustive optimum over all injections of the smaller set into the larger one."""
    from itertools import permutations

    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if len(A) > len(B):
        A, B = B, A
    D = np.hypot(*(A[:, None, :] - B[None, :, :]).transpose(2, 0, 1))
    best = math.inf
    rows = range(len(A))
    for perm in permutations(range(len(B)), len(A)):
        best = min(best, max(D[r, c] for r, c in zip(rows, perm)))
    return best


# ---------------------------------------------------------------------------
# displacement profiles


def window_match(net, window: Window, beta: float, cap: float, phase=(0.0, 0.0), mode: str = "cover") -> MatchResult:
    """Match the net to beta Z^2 on ``window``.

    ``mode="cover"``: every point of either set inside the window is matched,
    with points up to ``cap`` outside it available as partners. ``mode="smaller"``:
    only points inside the window take part and the smaller side is matched in
    full; leftover points must sit within ``2 beta + 2 R`` of the window edge.
    The lattice is anchored at the window's lower-left corner shifted by ``phase``
    (in units of beta).
    """
    origin = (window.x + phase[0] * beta, window.y + phase[1] * beta)
    if mode == "smaller":
        L = lattice_points(beta, window, origin)
        Y = net.points[net.index.query_rect(window.x, window.y, window.x1, window.y1)]
        Y = Y[window.contains(Y, tol=0.0)]
        L = L[window.contains(L, tol=0.0)]
        res = bottleneck_match(Y, L, cap=cap, window_edge=window.edge, beta=beta)
        R = net.R if math.isfinite(net.R) else net.margin
        band = 2 * beta + 2 * R
        left = np.setdiff1d(np.arange(len(Y)), res.pairs[:, 0]) if len(Y) else np.empty(0, int)
        left_pts = np.vstack([Y[left], L[np.setdiff1d(np.arange(len(L)), res.pairs[:, 1])]])
        depth = np.minimum.reduce([left_pts[:, 0] - window.x, window.x1 - left_pts[:, 0],
                                   left_pts[:, 1] - window.y, window.y1 - left_pts[:, 1]]) if len(left_pts) else np.empty(0)
        res.extra.update({"required_net": int(len(Y)), "required_lattice": int(len(L)),
                          "unmatched_depth": float(depth.max()) if len(depth) else 0.0,
                          "unmatched_confined": bool((depth <= band).all())})
        return res
    if mode != "cover":
        raise ValueError(f"unknown matching mode {mode!r}")
    outer = Window(window.x - cap, window.y - cap, window.edge + 2 * cap)
    if not net.is_safe_rect(outer.x, outer.y, outer.x1, outer.y1):
        raise ValueError("window plus matching band leaves the safe region of the net")
    L = lattice_points(beta, outer, origin)
    idx = net.index.query_rect(outer.x, outer.y, outer.x1, outer.y1)
    Y = net.points[idx]
    in_y, in_l = window.contains(Y, tol=0.0), window.contains(L, tol=0.0)
    res = bottleneck_match(Y, L, cap=cap, required_net=in_y, required_lattice=in_l,
                           window_edge=window.edge, beta=beta)
    res.extra.update({"required_net": int(in_y.sum()), "required_lattice": int(in_l.sum())})
    return res


MATCH_COLUMNS = ("yx", "yy", "lx", "ly", "displacement")


def write_match_csv(result: MatchResult, path) -> None:
    """One row per matched pair, in net-point order."""
    d = result.displacements
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MATCH_COLUMNS)
        for (i, j), dist in zip(result.pairs.tolist(), d.tolist()):
            yx, yy = result.net_points[i]
            lx, ly = result.lattice_points[j]
            w.writerow([repr(float(yx)), repr(float(yy)), repr(float(lx)), repr(float(ly)), repr(float(dist))])


@dataclass
class Profile:
    rows: list
    exponent: float
    beta: float
    matches: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"beta": self.beta, "exponent": self.exponent, "rows": self.rows}


def growth_exponent(edges, bottlenecks) -> float:
    """Slope of log(bottleneck) against log(window edge)."""
    return fit_slope([math.log(e) for e in edges], bottlenecks)


def central_square(polygon, center=None, tol: float = 1e-6) -> Window:
    """Largest axis-aligned square centred at ``center`` (default: centroid) inside a polygon."""
    from .geometry import points_in_polygon, polygon_centroid, rect_segment_distance

    poly = np.asarray(polygon, dtype=float)
    c = polygon_centroid(poly) if center is None else np.asarray(center, dtype=float)
    if not points_in_polygon(c[None, :], poly)[0]:
        raise ValueError("centre lies outside the polygon")
    edges = list(zip(poly, np.roll(poly, -1, axis=0)))

    def fits(h):
        return all(rect_segment_distance(c[0] - h, c[1] - h, c[0] + h, c[1] + h, a, b) > 0 for a, b in edges)

    lo, hi = 0.0, float(np.ptp(poly, axis=0).max())
    while hi - lo > tol * max(hi, 1.0):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if fits(mid) else (lo, mid)
    return Window.centered(float(c[0]), float(c[1]), 2 * lo)


def containing_tile(hierarchy, level: int, point) -> int:
    """Index of the level-``level`` tile whose support contains ``point``."""
    from .geometry import contains_points

    p = np.asarray(point, dtype=float)[None, :]
    k = 0
    for lvl in range(hierarchy.root_level, level, -1):
        kids = hierarchy.children(lvl, k)
        below = hierarchy.levels[lvl - 1]
        for c in kids:
            if contains_points(below.polygon(c), p)[0]:
                k = c
                break
        else:
            raise ValueError("point is not covered by the hierarchy")
    return k


def displacement_profile(rule, root_type: int, levels, beta: float, root_level: int | None = None,
                         cap: float | None = None, phase=(0.0, 0.0), scale: float = 1.0,
                         mode: str = "cover") -> Profile:
    """Bottleneck displacement between the net and beta Z^2 on the central window of level-l supertiles.

    All windows come from one master supertile. For each level the window is the
    largest square centred in the level-l tile containing the master's centroid;
    every net and lattice point in it must be matched, using partners up to
    ``cap`` outside it. The cap starts at ``2 beta`` (or the given value) and is
    doubled until the matching exists; the result is exact for any sufficient cap.
    ``mode="smaller"`` matches only the points inside each window (see ``window_match``).
    """
    from .core import Hierarchy
    from .geometry import polygon_centroid
    from .net import extract_net

    levels = sorted(int(l) for l in levels)
    if root_level is None:
        root_level = levels[-1] + 4
    hier = Hierarchy.build(rule, root_type, root_level, scale=scale)
    net = extract_net(hier.levels[0], compute_params=(mode == "smaller"))
    center = polygon_centroid(hier.support)
    rows, matches = [], []
    for lvl in levels:
        k = containing_tile(hier, lvl, center)
        W = central_square(hier.levels[lvl].polygon(k))
        c = cap if cap is not None else 2 * beta
        while True:
            try:
                res = window_match(net, W, beta, c if mode == "cover" else None, phase, mode)
                break
            except NoPerfectMatchingUnderCap:
                if c > W.edge:
                    raise
                c *= 2
        rows.append({"level": lvl, "window_edge": W.edge, "bottleneck": res.bottleneck, "cap": res.cap, **res.extra})
        matches.append(res)
    exponent = growth_exponent([r["window_edge"] for r in rows], [r["bottleneck"] for r in rows])
    return Profile(rows, exponent, beta, matches)
