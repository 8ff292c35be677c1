"""Built-in substitution rules."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .core import BasicTile, Child, Isometry, SubstitutionRule

PHI = (1 + math.sqrt(5)) / 2
RULE_DIR = Path(__file__).parent / "rules"


def fit_isometry(reference, target, q: int, tol: float = 1e-9) -> Isometry:
    """The isometry with rotation a multiple of 2pi/q mapping ``reference`` onto ``target``.

    Points correspond by position. Raises ValueError if no such isometry exists.
    """
    ref = np.asarray(reference, dtype=float)
    tgt = np.asarray(target, dtype=float)

    def orient(p):
        return (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])

    reflect = orient(ref) * orient(tgt) < 0
    r = ref * np.array([1.0, -1.0]) if reflect else ref
    dr, dt = r[1] - r[0], tgt[1] - tgt[0]
    theta = math.atan2(dt[1], dt[0]) - math.atan2(dr[1], dr[0])
    k = round(theta / (2 * math.pi / q))
    if abs(theta - k * 2 * math.pi / q) > 1e-7:
        raise ValueError(f"rotation {math.degrees(theta):.6f} deg is not a multiple of 360/{q}")
    lin = Isometry(k, reflect, (0.0, 0.0), q)
    t = tgt[0] - lin.apply(ref[0])
    iso = Isometry(k, reflect, tuple(t), q)
    err = np.abs(iso.apply(ref) - tgt).max()
    if err > tol:
        raise ValueError(f"no isometry fits (residual {err:.3g})")
    return iso


def penrose() -> SubstitutionRule:
    """Kite/dart Penrose tiling on Robinson half-tiles.

    Tile 1 is the half-kite (angles 36-72-72, legs phi, base 1), tile 2 the
    half-dart (angles 36-36-108, legs 1, base phi). The edge from the first to
    the third vertex of each reference triangle is the mirror axis of the full
    kite or dart; children are oriented so halves pair up across their axes.
    """
    q = 10
    h = math.sqrt(PHI**2 - 0.25)
    g = math.sqrt(1 - PHI**2 / 4)
    T, S, P = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.5, h])
    X, Y, Z = np.array([0.0, 0.0]), np.array([PHI, 0.0]), np.array([PHI / 2, g])
    kite = BasicTile(1, (tuple(T), tuple(S), tuple(P)), "half-kite")
    dart = BasicTile(2, (tuple(X), tuple(Y), tuple(Z)), "half-dart")
    kref = kite.vertices / PHI
    dref = dart.vertices / PHI

    # half-kite (tail T, side S, nose P): D on the axis T-P, E on the long edge S-P
    D = T + (P - T) / PHI**2
    E = S + (P - S) / PHI
    kite_children = [
        Child(1, fit_isometry(kref, [D, T, S], q)),
        Child(1, fit_isometry(kref, [D, E, S], q)),
        Child(2, fit_isometry(dref, [P, D, E], q)),
    ]
    # half-dart: F splits X-Y
    F = X + (Y - X) / PHI
    dart_children = [
        Child(1, fit_isometry(kref, [Z, F, X], q)),
        Child(2, fit_isometry(dref, [Y, Z, F], q)),
    ]
    return SubstitutionRule("penrose", (kite, dart), PHI, (kite_children, dart_children), q, "(1+sqrt(5))/2")


def chair() -> SubstitutionRule:
    """L-tromino of three unit squares cut into four half-size copies."""
    q = 4
    tile = BasicTile(1, ((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)), "chair")
    kids = [
        Child(1, Isometry(0, False, (0.0, 0.0), q)),
        Child(1, Isometry(0, False, (0.5, 0.5), q)),
        Child(1, Isometry(1, False, (2.0, 0.0), q)),
        Child(1, Isometry(3, False, (0.0, 2.0), q)),
    ]
    return SubstitutionRule("chair", (tile,), 2.0, (kids,), q, "2")


BUILTIN = {"penrose": penrose, "chair": chair}


def load_rule(source: str) -> SubstitutionRule:
    """Built-in rule by name, or a rule file path."""
    if source in BUILTIN:
        return BUILTIN[source]()
    from .io import parse_rule_file

    return parse_rule_file(source)
