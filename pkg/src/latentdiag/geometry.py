"""SVD geometry of representation samples and gradient-series diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RepresentationSet
from .errors import DataError, NumericError


@dataclass
class GeometryReport:
    effective_rank: float
    participation_ratio: float
    condition_number: float
    singular_values: np.ndarray
    n_retained: int


def spectrum_metrics(sv, rel_tol: float = 1e-10) -> tuple[float, float, float, int]:
    """Effective rank, participation ratio and condition number of a singular-value vector.

    Values at or below ``rel_tol * max`` are dropped before any metric is computed.
    """
    sv = np.sort(np.asarray(sv, dtype=np.float64))[::-1]
    if sv.size == 0 or sv[0] <= 0:
        raise NumericError("all singular values are zero")
    kept = sv[sv > rel_tol * sv[0]]
    p = kept / kept.sum()
    erank = float(np.exp(-np.sum(p * np.log(p))))
    lam = kept * kept
    pr = float(lam.sum() ** 2 / np.sum(lam * lam))
    cond = float(kept[0] / kept[-1])
    return erank, pr, cond, kept.size


def svd_geometry(repr: RepresentationSet | np.ndarray, center: bool = True,
                 rel_tol: float = 1e-10) -> GeometryReport:
    X = repr.values if isinstance(repr, RepresentationSet) else np.asarray(repr, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError(f"need at least 2 samples, got shape {X.shape}")
    if center:
        X = X - X.mean(axis=0)
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[0] == 0:
        raise NumericError("sample matrix is all zero")
    erank, pr, cond, kept = spectrum_metrics(sv, rel_tol)
    # numerical cleanup: clamp into the documented ranges
    erank = min(max(erank, 1.0), float(X.shape[1]))
    pr = min(max(pr, 1.0), float(X.shape[1]))
    return GeometryReport(erank, pr, max(cond, 1.0), sv, kept)


# -- gradients ---------------------------------------------------------------

@dataclass(frozen=True)
class GradientSeries:
    steps: tuple[int, ...]
    grads: np.ndarray

    def __post_init__(self):
        grads = np.array(self.grads, dtype=np.float64)
        if grads.ndim != 2:
            raise DataError(f"gradient matrix must be 2-D, got shape {grads.shape}")
        steps = tuple(int(s) for s in self.steps)
        if len(steps) != grads.shape[0]:
            raise DataError(f"{len(steps)} steps for {grads.shape[0]} gradient rows")
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise DataError("steps must be strictly ascending")
        if not np.all(np.isfinite(grads)):
            r, c = np.argwhere(~np.isfinite(grads))[0]
            raise DataError(f"non-finite gradient at ({r}, {c})")
        grads.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "grads", grads)


def _check_pair(a: GradientSeries, b: GradientSeries) -> None:
    if a.steps != b.steps:
        raise DataError("gradient series have different step lists")
    if a.grads.shape[1] != b.grads.shape[1]:
        raise DataError(
            f"gradient dimension mismatch: {a.grads.shape[1]} vs {b.grads.shape[1]}"
        )


def _row_norms(s: GradientSeries, what: str) -> np.ndarray:
    norms = np.linalg.norm(s.grads, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise NumericError(f"zero-norm {what} gradient at step {s.steps[zero[0]]}")
    return norms


def cosine_series(g_a: GradientSeries, g_b: GradientSeries):
    """Per-step cosine similarity plus its mean and population std."""
    _check_pair(g_a, g_b)
    na = _row_norms(g_a, "first")
    nb = _row_norms(g_b, "second")
    cos = np.einsum("ij,ij->i", g_a.grads, g_b.grads) / (na * nb)
    cos = np.clip(cos, -1.0, 1.0)
    return cos, float(cos.mean()), float(cos.std())


def norm_fraction(g_part: GradientSeries, g_total: GradientSeries) -> np.ndarray:
    """Per-step ||part|| / ||total||."""
    _check_pair(g_part, g_total)
    total = _row_norms(g_total, "total")
    return np.linalg.norm(g_part.grads, axis=1) / total
