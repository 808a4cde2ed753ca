"""Mutual information and disentanglement metrics.

KSG (Kraskov et al., estimator 1) with Chebyshev neighbourhoods on a k-d tree,
plug-in histogram MI, and the MIG / DCI / SAP family, plus a per-dimension
Pearson ratio that scores how well a declared factor partition lines up
with the factors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from . import seeding
from .data import Dataset, FactorPartition
from .errors import DataError, NumericError
from .probes import cv_predictions, ProbeConfig, ridge_fit_standardized

NEGATIVE_MI_TOL = -0.01


@dataclass
class MIReport:
    per_factor_mi: dict[str, float]
    overall_mi: float
    k: int
    mode: str = "max_dim"
    best_dim: dict[str, str] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


@dataclass
class DisentanglementReport:
    mig: float | None = None
    dci_disent: float | None = None
    dci_complete: float | None = None
    dci_inform: float | None = None
    sap: float | None = None
    flags: list[str] = field(default_factory=list)


@dataclass
class AlignmentReport:
    score: float
    per_dim_ratio: np.ndarray
    chance_level: float
    flags: list[str] = field(default_factory=list)


# -- KSG ---------------------------------------------------------------------

def _jitter(cols: list[np.ndarray], seed: int) -> list[np.ndarray]:
    """Add 1e-10 * std noise to each column, using one shared noise draw per column slot.

    The same noise vector is reused across slots so the estimator is exactly
    symmetric in its arguments.
    """
    n = cols[0].shape[0]
    noise = seeding.rng(seed, seeding.JITTER).standard_normal(n)
    out = []
    for c in cols:
        c = np.asarray(c, dtype=np.float64)
        if c.ndim == 1:
            c = c[:, None]
        sd = c.std(axis=0)
        if np.any(sd == 0):
            raise NumericError("zero-variance input to KSG estimator")
        out.append(c + 1e-10 * sd * noise[:, None])
    return out


def _strict_counts(points: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Number of other points strictly inside each Chebyshev radius."""
    tree = cKDTree(points)
    r = np.nextafter(radii, 0)
    return tree.query_ball_point(points, r, p=np.inf, return_length=True) - 1


def ksg_mi(x, y, k: int = 5, seed: int = 0) -> float:
    """KSG estimator 1 of I(X; Y) in nats. ``x`` may be 1-D or an (N, d) array."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if y.shape[0] != n:
        raise DataError(f"length mismatch: {n} vs {y.shape[0]}")
    if k < 1 or n <= k:
        raise DataError(f"KSG needs N > k >= 1, got N={n}, k={k}")
    xj, yj = _jitter([x, y], seed)
    if xj.shape[1] + yj.shape[1] > _TREE_MAX_DIMS:
        nx, ny = _brute_counts(xj, yj, k)
    else:
        joint = np.hstack([xj, yj])
        dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
        eps = dist[:, -1]
        nx = _strict_counts(xj, eps)
        ny = _strict_counts(yj, eps)
    return float(digamma(k) + digamma(n) - np.mean(digamma(nx + 1) + digamma(ny + 1)))


# k-d trees lose to brute force in high dimension
_TREE_MAX_DIMS = 6
_CHUNK = 128


def _cheb(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.abs(a[:, None, 0] - b[None, :, 0])
    for j in range(1, a.shape[1]):
        np.maximum(out, np.abs(a[:, None, j] - b[None, :, j]), out=out)
    return out


def _brute_counts(x: np.ndarray, y: np.ndarray, k: int):
    n = x.shape[0]
    nx = np.empty(n, dtype=np.int64)
    ny = np.empty(n, dtype=np.int64)
    for s in range(0, n, _CHUNK):
        rows = slice(s, min(s + _CHUNK, n))
        dx = _cheb(x[rows], x)
        dy = _cheb(y[rows], y)
        dz = np.maximum(dx, dy)
        idx = np.arange(rows.start, rows.stop) - rows.start
        dz[idx, np.arange(rows.start, rows.stop)] = np.inf
        eps = np.partition(dz, k - 1, axis=1)[:, k - 1][:, None]
        # self-distance is 0 < eps and cancels the -1 below
        nx[rows] = (dx < eps).sum(axis=1) - 1
        ny[rows] = (dy < eps).sum(axis=1) - 1
    return nx, ny


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def mi_per_factor(dataset: Dataset, k: int = 5, mode: str = "max_dim",
                  seed: int = 0, threads: int = 1) -> MIReport:
    """Per-factor MI; overall is the sum across factors.

    ``max_dim`` takes the largest scalar KSG estimate over representation
    dims; ``joint`` runs KSG with the whole representation as X.
    """
    Z, Y = dataset.Z, dataset.Y
    names = dataset.factors.names
    per, best = {}, {}
    if mode == "max_dim":
        pairs = [(d, f) for f in range(Y.shape[1]) for d in range(Z.shape[1])]
        vals = _map(lambda p: ksg_mi(Z[:, p[0]], Y[:, p[1]], k, seed), pairs, threads)
        grid = np.array(vals).reshape(Y.shape[1], Z.shape[1])
        for f, name in enumerate(names):
            d = int(np.argmax(grid[f]))
            per[name] = float(grid[f, d])
            best[name] = dataset.repr.names[d]
    elif mode == "joint":
        vals = _map(lambda f: ksg_mi(Z, Y[:, f], k, seed), range(Y.shape[1]), threads)
        per = dict(zip(names, (float(v) for v in vals)))
    else:
        raise ValueError(f"mode must be 'max_dim' or 'joint', got {mode!r}")
    flags = [f"negative MI estimate for {name}: {v:.6g} nats" for name, v in per.items() if v < 0]
    return MIReport(per, float(sum(per.values())), k, mode, best, flags)


# -- histogram MI and MIG ----------------------------------------------------

def discretize(x, bins: int) -> np.ndarray:
    """Uniform-width bin index in [0, bins) over [min, max]."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi == lo:
        raise DataError("cannot discretize a variable with zero range")
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _entropy_counts(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def hist_entropy(x, bins: int = 20) -> float:
    return _entropy_counts(np.bincount(discretize(x, bins), minlength=bins))


def _hist_mi_codes(a: np.ndarray, b: np.ndarray, bins: int) -> float:
    joint = np.bincount(a * bins + b, minlength=bins * bins).reshape(bins, bins)
    h_a = _entropy_counts(joint.sum(axis=1))
    h_b = _entropy_counts(joint.sum(axis=0))
    return max(0.0, h_a + h_b - _entropy_counts(joint.ravel()))


def hist_mi(x, y, bins: int = 20) -> float:
    """Plug-in MI of the uniform-width joint histogram, in nats."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"mismatched shapes {x.shape} and {y.shape}")
    if bins < 2 or len(x) < bins:
        raise DataError(f"need N >= bins >= 2, got N={len(x)}, bins={bins}")
    return _hist_mi_codes(discretize(x, bins), discretize(y, bins), bins)


def mig(dataset: Dataset, bins: int = 20, flags: list[str] | None = None) -> float:
    """Mutual information gap: mean over factors of (top - runner-up MI) / H(factor)."""
    Z, Y = dataset.Z, dataset.Y
    if Z.shape[1] < 2:
        raise DataError("MIG needs at least two representation dims")
    codes = []
    for d in range(Z.shape[1]):
        if np.ptp(Z[:, d]) == 0:
            codes.append(None)
        else:
            codes.append(discretize(Z[:, d], bins))
    gaps = []
    for f, name in enumerate(dataset.factors.names):
        if np.ptp(Y[:, f]) == 0:
            if flags is not None:
                flags.append(f"MIG: factor {name} has zero range, skipped")
            continue
        fc = discretize(Y[:, f], bins)
        h = _entropy_counts(np.bincount(fc, minlength=bins))
        if h == 0:
            if flags is not None:
                flags.append(f"MIG: factor {name} has zero histogram entropy, skipped")
            continue
        mis = np.array([0.0 if c is None else _hist_mi_codes(c, fc, bins) for c in codes])
        top2 = np.sort(mis)[::-1][:2]
        gaps.append((top2[0] - top2[1]) / h)
    if not gaps:
        raise DataError("MIG: every factor is degenerate")
    return float(np.clip(np.mean(gaps), 0.0, 1.0))


# -- DCI ---------------------------------------------------------------------

def importance_matrix(dataset: Dataset, alpha: float = 1.0) -> np.ndarray:
    """|standardized ridge coefficient| per (dim, factor), each nonzero column summing to 1."""
    Z, Y = dataset.Z, dataset.Y
    R = np.zeros((Z.shape[1], Y.shape[1]))
    for f in range(Y.shape[1]):
        if Y[:, f].std() == 0:
            raise NumericError(f"factor {dataset.factors.names[f]} has zero variance")
        w_std, _, _ = ridge_fit_standardized(Z, Y[:, f], alpha)
        R[:, f] = np.abs(w_std)
    sums = R.sum(axis=0)
    np.divide(R, sums, out=R, where=sums > 0)
    return R


def _normalized_entropy(p: np.ndarray, base: int) -> float:
    """Entropy of a (possibly unnormalized) nonneg vector divided by ln(base)."""
    s = p.sum()
    if s == 0 or base < 2:
        return 1.0 if base >= 2 else 0.0
    q = p[p > 0] / s
    return float(-np.sum(q * np.log(q)) / np.log(base))


def dci(dataset: Dataset, folds: int = 5, alpha: float = 1.0, seed: int = 0):
    """Disentanglement, completeness and informativeness (lower informativeness is better).

    Returns ``(DisentanglementReport, importance)``.
    """
    R = importance_matrix(dataset, alpha)
    D, F = R.shape
    row_mass = R.sum(axis=1)
    total = row_mass.sum()
    if total == 0:
        disent = 0.0
    else:
        rho = row_mass / total
        disent = float(sum(rho[d] * (1.0 - _normalized_entropy(R[d], F)) for d in range(D)))
    complete = float(np.mean([1.0 - _normalized_entropy(R[:, f], D) for f in range(F)]))

    cfg = ProbeConfig(kind="linear", folds=folds, ridge_alpha=alpha, seed=seed)
    errs = []
    for f in range(F):
        y = dataset.Y[:, f]
        pred, _ = cv_predictions(dataset.Z, y, cfg, task_key=f)
        errs.append(np.mean((pred - y) ** 2) / y.var())
    report = DisentanglementReport(
        dci_disent=float(np.clip(disent, 0.0, 1.0)),
        dci_complete=float(np.clip(complete, 0.0, 1.0)),
        dci_inform=float(np.mean(errs)),
    )
    return report, R


# -- SAP ---------------------------------------------------------------------

def sap_matrix(dataset: Dataset) -> np.ndarray:
    """Single-dim OLS R^2 (= squared Pearson correlation) for every (dim, factor)."""
    Z = dataset.Z - dataset.Z.mean(axis=0)
    Y = dataset.Y - dataset.Y.mean(axis=0)
    zs = np.sqrt((Z * Z).sum(axis=0))
    ys = np.sqrt((Y * Y).sum(axis=0))
    if np.any(ys == 0):
        bad = dataset.factors.names[int(np.argmin(ys))]
        raise NumericError(f"SAP: factor {bad} has zero variance")
    C = Z.T @ Y
    denom = np.outer(zs, ys)
    r = np.divide(C, denom, out=np.zeros_like(C), where=denom > 0)
    return np.clip(r * r, 0.0, 1.0)


def sap(dataset: Dataset) -> float:
    S = sap_matrix(dataset)
    if S.shape[0] < 2:
        raise DataError("SAP needs at least two representation dims")
    top2 = -np.sort(-S, axis=0)[:2]
    return float(np.clip(np.mean(top2[0] - top2[1]), 0.0, 1.0))


# -- partition alignment -----------------------------------------------------

def _pearson_abs(Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    Zc = Z - Z.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    denom = np.outer(np.sqrt((Zc * Zc).sum(axis=0)), np.sqrt((Yc * Yc).sum(axis=0)))
    C = Zc.T @ Yc
    return np.abs(np.divide(C, denom, out=np.zeros_like(C), where=denom > 0))


def factor_alignment(dataset: Dataset, partition: FactorPartition) -> AlignmentReport:
    """Share of each assigned dim's total |Pearson r| that falls on its own factor.

    Partition entries are matched to factor columns by name; when no names
    match and the counts agree they are matched by position (flagged).
    """
    F = dataset.factors.n_cols
    if F < 2:
        raise DataError("factor alignment needs at least two factors")
    partition.check_within(dataset.repr.n_cols)
    flags: list[str] = []
    fnames = list(dataset.factors.names)
    if all(n in fnames for n in partition.names):
        owner = {n: fnames.index(n) for n in partition.names}
    elif not any(n in fnames for n in partition.names) and len(partition.names) == F:
        owner = {n: i for i, n in enumerate(partition.names)}
        flags.append("alignment: partition names do not match factor names; matched by position")
    else:
        missing = [n for n in partition.names if n not in fnames]
        raise DataError(f"partition factors {missing} not present in factor columns {fnames}")

    A = _pearson_abs(dataset.Z, dataset.Y)
    ratio = np.zeros(dataset.repr.n_cols)
    assigned = []
    zero = 0
    for name, start, end in partition.entries:
        f = owner[name]
        for d in range(start, end):
            total = A[d].sum()
            if total > 0:
                ratio[d] = A[d, f] / total
            else:
                zero += 1
            assigned.append(d)
    if zero:
        flags.append(f"alignment: {zero} dim(s) uncorrelated with every factor, ratio set to 0")
    return AlignmentReport(float(np.mean(ratio[assigned])), ratio, 1.0 / F, flags)
