"""Substitution matrices, Perron-Frobenius data and decay probes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import NotPrimitive, PowerIterationStalled, ZeroVector

MAX_POWER_ITERATIONS = 100_000
PROBE_DPS = 50
ROUNDING = 1e-10  # relative size below which patch deviations count as float noise


@dataclass(frozen=True)
class SubstMatrix:
    """Nonnegative integer matrix; entry (i, j) counts type-i children of tile j."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in r) for r in self.entries)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("substitution matrix must be square and nonempty")
        if any(x < 0 for r in rows for x in r):
            raise ValueError("substitution matrix entries must be nonnegative")
        object.__setattr__(self, "entries", rows)

    @property
    def n(self) -> int:
        return len(self.entries)

    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    def column_sums(self) -> list:
        return [sum(r[j] for r in self.entries) for j in range(self.n)]

    def power_apply(self, u, m: int) -> list:
        """A^m u in exact integer arithmetic."""
        v = [int(x) for x in u]
        for _ in range(m):
            v = [sum(a * x for a, x in zip(row, v)) for row in self.entries]
        return v

    def to_text(self) -> str:
        return "\n".join(" ".join(str(x) for x in r) for r in self.entries)

    def __str__(self) -> str:
        return self.to_text()


def substitution_matrix(rule) -> SubstMatrix:
    return SubstMatrix(rule.count_matrix)


def _as_matrix(A) -> SubstMatrix:
    return A if isinstance(A, SubstMatrix) else SubstMatrix(np.asarray(A).astype(np.int64).tolist())


def is_primitive(A) -> tuple[bool, int | None]:
    """(True, least m with A^m > 0) if one exists below the Wielandt bound, else (False, None)."""
    A = _as_matrix(A)
    n = A.n
    pattern = np.array(A.entries) > 0
    power = pattern.copy()
    bound = n * n - 2 * n + 2
    for m in range(1, bound + 1):
        if power.all():
            return True, m
        power = (power.astype(np.int64) @ pattern.astype(np.int64)) > 0
    return False, None


def power_iteration(M: np.ndarray, tol: float = 1e-14, max_iter: int = MAX_POWER_ITERATIONS) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a primitive nonnegative matrix; vector has unit 1-norm."""
    n = M.shape[0]
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam_new = w.sum()
        w /= lam_new
        if np.abs(w - v).max() <= tol and abs(lam_new - lam) <= tol * lam_new:
            return float(lam_new), w
        v, lam = w, lam_new
    raise PowerIterationStalled(f"no convergence after {max_iter} iterations")


def characteristic_polynomial(M: np.ndarray) -> np.ndarray:
    """Coefficients of det(x I - M), leading coefficient first (Faddeev-LeVerrier)."""
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M, dtype=float)
    I = np.eye(n)
    c = 1.0
    for k in range(1, n + 1):
        Mk = M @ Mk + c * I
        c = -np.trace(M @ Mk) / k
        coeffs.append(c)
    return np.array(coeffs)


def _second_modulus_deflated(M: np.ndarray, lam1: float, v1: np.ndarray, w1: np.ndarray, max_iter: int) -> float:
    B = M - lam1 * np.outer(v1, w1)
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    logs = []
    for _ in range(max_iter):
        y = B @ x
        nrm = np.linalg.norm(y)
        if nrm < 1e-300:
            return 0.0
        logs.append(math.log(nrm))
        x = y / nrm
        # complex pairs make single-step ratios oscillate; average over a window
        if len(logs) >= 200:
            window = logs[-100:]
            prev = logs[-200:-100]
            if abs(sum(window) - sum(prev)) / 100 < 1e-12:
                break
    tail = logs[-100:] if len(logs) >= 100 else logs
    return math.exp(sum(tail) / len(tail))


@dataclass
class SpectralReport:
    matrix: SubstMatrix
    lambda1: float
    lambda2abs: float
    v1: np.ndarray
    w1: np.ndarray
    areas: np.ndarray
    a1: float
    a2: float
    alpha: float
    epsilon: float
    delta: float
    pisot: bool
    primitive: bool
    primitivity_witness: int | None
    lambda1_charpoly: float | None = None
    notes: list = field(default_factory=list)

    @property
    def beta(self) -> float:
        """Lattice spacing alpha^(-1/2) matching the net density."""
        return self.alpha ** -0.5

    def beta1(self, u) -> float:
        """Coefficient of the unit Perron vector in the decomposition of ``u``."""
        u = np.asarray(u, dtype=float)
        return float(self.w1 @ u) * float(np.linalg.norm(self.v1))

    def to_dict(self) -> dict:
        return {
            "matrix": [list(r) for r in self.matrix.entries],
            "lambda1": self.lambda1,
            "lambda1_charpoly": self.lambda1_charpoly,
            "lambda2abs": self.lambda2abs,
            "v1": [float(x) for x in self.v1],
            "areas": [float(x) for x in self.areas],
            "a1": self.a1,
            "a2": self.a2,
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "pisot": self.pisot,
            "primitive": self.primitive,
            "primitivity_witness": self.primitivity_witness,
            "notes": list(self.notes),
        }


def perron_data(A, areas, epsilon: float | None = None, max_iter: int = MAX_POWER_ITERATIONS) -> SpectralReport:
    """Perron root and vector, second eigenvalue modulus and the density constants.

    ``v1`` is normalized so its first coordinate is 1; ``w1`` is the left Perron
    vector scaled so that w1 . v1 = 1.
    """
    A = _as_matrix(A)
    s = np.asarray(areas, dtype=float)
    if s.shape != (A.n,) or np.any(s <= 0):
        raise ValueError("areas must be a positive vector of length n")
    primitive, witness = is_primitive(A)
    if not primitive:
        raise NotPrimitive("substitution matrix is not primitive")
    M = A.array()
    lam1, v = power_iteration(M, max_iter=max_iter)
    _, w = power_iteration(M.T, max_iter=max_iter)
    v1 = v / v[0]
    w1 = w / (w @ v1)
    notes = []
    lam1_poly = None
    if A.n == 1:
        lam2 = 0.0
        lam1_poly = float(M[0, 0])
        notes.append("n = 1: |lambda2| taken as 0")
    elif A.n <= 4:
        roots = np.roots(characteristic_polynomial(M))
        k = int(np.argmin(np.abs(roots - lam1)))
        lam1_poly = float(roots[k].real)
        rest = np.delete(roots, k)
        lam2 = float(np.abs(rest).max())
    else:
        lam2 = _second_modulus_deflated(M, lam1, v1, w1, max_iter)
    if epsilon is None:
        epsilon = (lam1 - lam2) / 10.0
    if not 0 < epsilon < lam1 - lam2:
        raise ValueError("epsilon must lie strictly between 0 and lambda1 - |lambda2|")
    a1 = float(v1.sum())
    a2 = float(v1 @ s)
    return SpectralReport(
        matrix=A,
        lambda1=lam1,
        lambda2abs=lam2,
        v1=v1,
        w1=w1,
        areas=s,
        a1=a1,
        a2=a2,
        alpha=a1 / a2,
        epsilon=float(epsilon),
        delta=(lam2 + epsilon) / lam1,
        pisot=lam2 < 1,
        primitive=True,
        primitivity_witness=witness,
        lambda1_charpoly=lam1_poly,
        notes=notes,
    )


def spectral_report(rule, epsilon: float | None = None) -> SpectralReport:
    return perron_data(substitution_matrix(rule), rule.areas, epsilon)


def check_xi_consistency(rule, report: SpectralReport) -> tuple[float, float]:
    """Relative mismatch of xi^2 against lambda1, and of the left-eigen relation on the areas."""
    xi2 = rule.xi**2
    root_res = abs(xi2 - report.lambda1) / report.lambda1
    s = np.asarray(rule.areas, dtype=float)
    A = report.matrix.array()
    left_res = float(np.abs(xi2 * s - A.T @ s).max() / np.abs(s).max())
    return root_res, left_res


# ---------------------------------------------------------------------------
# decay probes


def fit_slope(ms, values) -> float:
    """Least-squares slope of log(values) against m, ignoring zero entries; nan if < 2 points."""
    pts = [(m, math.log(float(v))) for m, v in zip(ms, values) if v > 0]
    if len(pts) < 2:
        return math.nan
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class DecayProbe:
    ms: list
    eigen_residuals: list
    ratio_residuals: list
    eigen_slope: float
    ratio_slope: float

    def slopes(self, start: int = 1) -> tuple[float, float]:
        """Refit both slopes using only m >= start."""
        sel = [k for k, m in enumerate(self.ms) if m >= start]
        ms = [self.ms[k] for k in sel]
        return (
            fit_slope(ms, [self.eigen_residuals[k] for k in sel]),
            fit_slope(ms, [self.ratio_residuals[k] for k in sel]),
        )


def _mp_perron(A: SubstMatrix):
    """High-precision right (c_1 = 1) and left (w . v = 1) Perron vectors and root."""
    M = mpmath.matrix(A.entries)
    if A.n == 1:
        return M[0, 0], mpmath.matrix([1]), mpmath.matrix([1])
    E, EL, ER = mpmath.eig(M, left=True, right=True)
    k = max(range(A.n), key=lambda i: mpmath.re(E[i]))
    lam = mpmath.re(E[k])
    v = mpmath.matrix([mpmath.re(ER[i, k]) for i in range(A.n)])
    w = mpmath.matrix([mpmath.re(EL[k, i]) for i in range(A.n)])
    v = v / v[0]
    w = w / sum(w[i] * v[i] for i in range(A.n))
    return lam, v, w


def decay_probe(A, u, mmax: int, report: SpectralReport | None = None) -> DecayProbe:
    """Residual series of the normalized powers A^m u and of the type ratios t_i / t_1.

    Computed in extended precision with exact integer powers, since the Pisot
    residuals fall below double precision after a dozen steps.
    """
    A = _as_matrix(A)
    u = [x for x in np.asarray(u).tolist()]
    if any(x < 0 for x in u):
        raise ValueError("u must be nonnegative")
    if not any(x != 0 for x in u):
        raise ZeroVector("u must be nonzero")
    exact = all(float(x).is_integer() for x in u)
    with mpmath.workdps(PROBE_DPS):
        lam, v, w = _mp_perron(A)
        n = A.n
        vnorm = mpmath.sqrt(sum(v[i] ** 2 for i in range(n)))
        vunit = [v[i] / vnorm for i in range(n)]
        uu = [mpmath.mpf(int(x)) if exact else mpmath.mpf(x) for x in u]
        b1 = sum(w[i] * uu[i] for i in range(n)) * vnorm
        t = [int(x) for x in u] if exact else uu
        ms, eig_res, ratio_res = [], [], []
        for m in range(1, mmax + 1):
            t = [sum(a * x for a, x in zip(row, t)) for row in A.entries]
            scale = b1 * lam**m
            e = max(abs(mpmath.mpf(t[i]) / scale - vunit[i]) for i in range(n))
            if t[0] == 0:
                r = mpmath.inf
            else:
                r = max(abs(mpmath.mpf(t[i]) / t[0] - v[i]) for i in range(n))
            ms.append(m)
            eig_res.append(float(e))
            ratio_res.append(float(r))
    return DecayProbe(ms, eig_res, ratio_res, fit_slope(ms, eig_res), fit_slope(ms, ratio_res))


# ---------------------------------------------------------------------------
# patch statistics


@dataclass(frozen=True)
class PatchObservation:
    m: int
    t1: int
    count: int
    area: float


def patch_residual(obs: PatchObservation, report: SpectralReport) -> float:
    """Smallest C with count and area inside t1 (a +- C delta^m)."""
    if obs.t1 == 0:
        return 0.0
    dm = report.delta**obs.m
    rc = abs(obs.count / obs.t1 - report.a1)
    ra = abs(obs.area / obs.t1 - report.a2)
    # deviations at rounding level are not signal; dividing by delta^m would inflate them
    rc = 0.0 if rc <= ROUNDING * report.a1 else rc
    ra = 0.0 if ra <= ROUNDING * report.a2 else ra
    return max(rc, ra) / dm


def fit_c2(observations, report: SpectralReport) -> float:
    """Empirical C2: the largest per-observation constant over the calibration data."""
    vals = [patch_residual(o, report) for o in observations]
    return max(vals) if vals else 0.0


@dataclass(frozen=True)
class PatchPrediction:
    count: tuple
    area: tuple
    c2: float

    def contains(self, count: float, area: float) -> bool:
        def within(x, lo, hi):
            slack = ROUNDING * max(abs(lo), abs(hi))
            return lo - slack <= x <= hi + slack

        return within(count, *self.count) and within(area, *self.area)


def predict_patch_stats(t1: int, m: int, report: SpectralReport, c2: float) -> PatchPrediction:
    """Count and area intervals t1 (a1 +- C2 delta^m), t1 (a2 +- C2 delta^m)."""
    if t1 < 0:
        raise ValueError("t1 must be nonnegative")
    slack = c2 * report.delta**m
    return PatchPrediction(
        (t1 * (report.a1 - slack), t1 * (report.a1 + slack)),
        (t1 * (report.a2 - slack), t1 * (report.a2 + slack)),
        c2,
    )
