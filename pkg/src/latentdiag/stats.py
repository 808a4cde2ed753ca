"""Descriptive statistics, Student-t inference, Holm step-down and 2x2 factorial effects.

The Student-t CDF and quantile are computed here from the regularized
incomplete beta function (Lentz continued fraction), not from scipy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, NumericError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz's method."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fastest on the side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    if t == 0:
        return 1.0
    return betainc(0.5 * df, 0.5, df / (df + t * t))


def t_cdf(t: float, df: float) -> float:
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * t_sf2(t, df)
    return 1.0 - tail if t > 0 else tail


def t_ppf(q: float, df: float) -> float:
    """Student-t quantile by bisection on :func:`t_cdf` (to float resolution)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_ppf(1.0 - q, df)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < q:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- descriptive -------------------------------------------------------------

def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1 denominator)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise DataError(f"need at least 2 values, got {v.size}")
    return float(v.mean()), float(v.std(ddof=1))


def ci95(values) -> tuple[float, float]:
    """Two-sided 95% t interval for the mean."""
    m, s = mean_std(values)
    half = t_ppf(0.975, len(values) - 1) * s / math.sqrt(len(values))
    return m - half, m + half


# -- tests -------------------------------------------------------------------

@dataclass
class TestResult:
    mean_diff: float
    t_stat: float
    df: int
    p_two_sided: float
    ci95: tuple[float, float]
    n: int = 0
    flags: list[str] = field(default_factory=list)

    __test__ = False  # not a pytest class


def one_sample_t(values, label: str = "differences") -> TestResult:
    """Two-sided one-sample t test of mean(values) == 0."""
    d = np.asarray(values, dtype=np.float64)
    n = d.size
    if n < 2:
        raise DataError(f"need at least 2 values, got {n}")
    m, s = float(d.mean()), float(d.std(ddof=1))
    df = n - 1
    flags = []
    if s == 0:
        if m == 0:
            t, p = 0.0, 1.0
        else:
            t, p = math.copysign(math.inf, m), 0.0
            flags.append(f"{label}: zero variance with nonzero mean, t is infinite")
        return TestResult(m, t, df, p, (m, m), n, flags)
    se = s / math.sqrt(n)
    t = m / se
    half = t_ppf(0.975, df) * se
    return TestResult(m, t, df, t_sf2(t, df), (m - half, m + half), n, flags)


@dataclass(frozen=True)
class PairedSample:
    labels: tuple[str, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if not len(self.labels) == len(self.a) == len(self.b):
            raise DataError(
                f"length mismatch: {len(self.labels)} labels, {len(self.a)} a, {len(self.b)} b"
            )
        if len(self.a) < 2:
            raise DataError("paired sample needs at least 2 pairs")
        if len(set(self.labels)) != len(self.labels):
            raise DataError("paired sample labels must be unique")


def paired_t(sample: PairedSample) -> TestResult:
    """Paired t test on d = a - b."""
    d = np.asarray(sample.a, dtype=np.float64) - np.asarray(sample.b, dtype=np.float64)
    return one_sample_t(d)


def holm_bonferroni(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, returned in input order."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size == 0:
        return []
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise DataError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = np.minimum((m - np.arange(m)) * p[order], 1.0)
    adj_sorted = np.maximum.accumulate(scaled)
    out = np.empty(m)
    out[order] = adj_sorted
    return out.tolist()


# -- 2x2 factorial -----------------------------------------------------------

@dataclass(frozen=True)
class FactorialTable:
    """Per-seed outcomes for the four cells of a 2x2 design: rows of (seed, a, b, value)."""

    rows: tuple[tuple[str, int, int, float], ...]

    def cells(self) -> tuple[list[str], np.ndarray]:
        """Seeds in first-seen order and an (n_seeds, 2, 2) array indexed [seed, a, b]."""
        seeds: list[str] = []
        table: dict[str, dict[tuple[int, int], float]] = {}
        for seed, la, lb, value in self.rows:
            la, lb = int(la), int(lb)
            if la not in (0, 1) or lb not in (0, 1):
                raise DataError(f"seed {seed!r}: levels must be 0 or 1, got ({la}, {lb})")
            if not np.isfinite(value):
                raise DataError(f"seed {seed!r}: non-finite value in cell ({la}, {lb})")
            if seed not in table:
                seeds.append(seed)
                table[seed] = {}
            if (la, lb) in table[seed]:
                raise DataError(f"seed {seed!r}: duplicate cell ({la}, {lb})")
            table[seed][(la, lb)] = float(value)
        out = np.empty((len(seeds), 2, 2))
        for i, s in enumerate(seeds):
            for cell in ((0, 0), (0, 1), (1, 0), (1, 1)):
                if cell not in table[s]:
                    raise DataError(f"seed {s!r}: missing cell (level_a={cell[0]}, level_b={cell[1]})")
                out[i][cell] = table[s][cell]
        return seeds, out


def factorial_effects(table: FactorialTable) -> dict[str, TestResult]:
    """Per-seed main effects and the double-difference interaction, each t-tested against 0.

    interaction_s = v11 - v10 - v01 + v00 (not halved).
    """
    _, v = table.cells()
    if v.shape[0] < 2:
        raise DataError("factorial analysis needs at least 2 seeds")
    effect_a = v[:, 1, :].mean(axis=1) - v[:, 0, :].mean(axis=1)
    effect_b = v[:, :, 1].mean(axis=1) - v[:, :, 0].mean(axis=1)
    inter = v[:, 1, 1] - v[:, 1, 0] - v[:, 0, 1] + v[:, 0, 0]
    return {
        "effect_a": one_sample_t(effect_a, "effect_a"),
        "effect_b": one_sample_t(effect_b, "effect_b"),
        "interaction": one_sample_t(inter, "interaction"),
    }


# -- file formats ------------------------------------------------------------

def _dict_rows(path, required):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        missing = [c for c in required if c not in fields]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        rows = [{k.strip(): (v or "").strip() for k, v in r.items() if k is not None} for r in reader]
    if not rows:
        raise DataError(f"{path}: empty body")
    return rows


def _num(row, col, path, lineno, cast=float):
    try:
        v = float(row[col])
    except ValueError:
        raise DataError(f"{path}: non-numeric {col} {row[col]!r} at row {lineno}") from None
    if cast is int:
        if v != int(v):
            raise DataError(f"{path}: non-integer {col} {row[col]!r} at row {lineno}")
        return int(v)
    return v


def load_factorial_csv(path) -> FactorialTable:
    """Columns ``seed,level_a,level_b,value``."""
    rows = _dict_rows(path, ["seed", "level_a", "level_b", "value"])
    return FactorialTable(tuple(
        (r["seed"], _num(r, "level_a", path, i, int), _num(r, "level_b", path, i, int),
         _num(r, "value", path, i))
        for i, r in enumerate(rows, start=2)
    ))


def load_paired_csv(path) -> PairedSample:
    """Columns ``label,a,b``."""
    rows = _dict_rows(path, ["label", "a", "b"])
    return PairedSample(
        tuple(r["label"] for r in rows),
        tuple(_num(r, "a", path, i) for i, r in enumerate(rows, start=2)),
        tuple(_num(r, "b", path, i) for i, r in enumerate(rows, start=2)),
    )


def load_pvalues_csv(path) -> tuple[list[str], list[float]]:
    """Column ``p`` with an optional ``name`` column."""
    rows = _dict_rows(path, ["p"])
    names = [r.get("name") or str(i) for i, r in enumerate(rows)]
    return names, [_num(r, "p", path, i) for i, r in enumerate(rows, start=2)]
