"""Robustness-protocol metrics over sweep curves, push traces and clamping records."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SweepCurve:
    """Mean reward at each severity level of one sweep, for one model (and seed)."""

    model: str
    levels: tuple[tuple[int, float], ...]
    seed: str | None = None

    def __post_init__(self):
        levels = tuple((int(i), float(r)) for i, r in self.levels)
        if len(levels) < 2:
            raise DataError(f"sweep curve for {self.model!r} needs at least 2 levels")
        idx = [i for i, _ in levels]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DataError(f"severity indices must be strictly ascending, got {idx}")
        if not all(np.isfinite(r) for _, r in levels):
            raise DataError(f"non-finite reward in sweep curve for {self.model!r}")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_rewards(cls, model: str, rewards: Sequence[float], seed=None,
                     indices: Sequence[int] | None = None) -> "SweepCurve":
        indices = range(len(rewards)) if indices is None else indices
        return cls(model, tuple(zip(indices, rewards)), seed)

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.levels]

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r for _, r in self.levels])


def sensitivity(curve: SweepCurve) -> float:
    """max - min of the level means; 0 for a flat curve."""
    r = curve.rewards
    return float(r.max() - r.min())


def severe_mean(curve: SweepCurve) -> float:
    """Mean reward over the two highest severity levels."""
    return float(np.mean(curve.rewards[-2:]))


def worst_case(curve: SweepCurve) -> float:
    return float(curve.rewards.min())


@dataclass(frozen=True)
class Degradation:
    abs: float
    pct: float
    improved: bool


def degradation(id_reward: float, severe: float) -> Degradation:
    """|severe - ID| in absolute terms and as a percentage of |ID|.

    ``improved`` is set when the severe reward is higher than the ID reward.
    """
    if id_reward == 0:
        raise DataError("degradation percentage undefined for an ID reward of 0")
    diff = abs(severe - id_reward)
    return Degradation(diff, 100.0 * diff / abs(id_reward), severe > id_reward)


def crossover(a: SweepCurve, b: SweepCurve) -> int | None:
    """First severity index at which ``a`` matches or exceeds ``b``; None if never."""
    if a.indices != b.indices:
        raise DataError(f"severity levels differ: {a.indices} vs {b.indices}")
    for (idx, ra), (_, rb) in zip(a.levels, b.levels):
        if ra >= rb:
            return idx
    return None


# -- push recovery -----------------------------------------------------------

@dataclass(frozen=True)
class EpisodeTrace:
    errors: tuple[float, ...]
    push_step: int
    window: int = 40

    def __post_init__(self):
        errors = tuple(float(e) for e in self.errors)
        if self.push_step < 0 or self.push_step + 1 > len(errors):
            raise DataError(f"push_step {self.push_step} outside trace of length {len(errors)}")
        if self.window < 1:
            raise DataError(f"window must be >= 1, got {self.window}")
        if any(not np.isfinite(e) or e < 0 for e in errors):
            raise DataError("tracking errors must be finite and nonnegative")
        object.__setattr__(self, "errors", errors)

    def post_push(self) -> tuple[float, ...]:
        """Errors at steps push_step+1 .. push_step+window (truncated at trace end)."""
        return self.errors[self.push_step + 1:self.push_step + 1 + self.window]


@dataclass(frozen=True)
class Recovery:
    steps: int
    censored: bool


def recovery_time(trace: EpisodeTrace, threshold: float = 1.5) -> Recovery:
    """Smallest n >= 1 with errors[push_step + n] < threshold.

    If the error never drops below the threshold inside the window, the
    result is ``Recovery(window, censored=True)``.
    """
    for n, e in enumerate(trace.post_push(), start=1):
        if e < threshold:
            return Recovery(n, False)
    return Recovery(trace.window, True)


def peak_error(trace: EpisodeTrace) -> float:
    """Max error over (push_step, push_step + window]; 0 if the trace ends at the push."""
    post = trace.post_push()
    return max(post) if post else 0.0


# -- interventions -----------------------------------------------------------

@dataclass(frozen=True)
class InterventionRecord:
    factor: str
    dr_level: str
    seed: str
    baseline_reward: float
    clamped_reward: float

    def __post_init__(self):
        if not (np.isfinite(self.baseline_reward) and np.isfinite(self.clamped_reward)):
            raise DataError(f"non-finite reward in intervention record for {self.factor!r}")


def intervention_delta(records: Iterable[InterventionRecord]) -> dict[str, float]:
    """Mean |clamped - baseline| reward per factor, in first-seen factor order."""
    by_factor: dict[str, list[float]] = defaultdict(list)
    for rec in records:
        by_factor[rec.factor].append(abs(rec.clamped_reward - rec.baseline_reward))
    if not by_factor:
        raise DataError("no intervention records")
    return {f: float(np.mean(v)) for f, v in by_factor.items()}


# -- file formats ------------------------------------------------------------

def _read_rows(path, required: Sequence[str]) -> list[dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        fields = [f.strip() for f in reader.fieldnames]
        missing = [c for c in required if c not in fields]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        rows = [{k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
                for row in reader]
    if not rows:
        raise DataError(f"{path}: empty body")
    return rows


def _float(row: dict, col: str, path, lineno: int) -> float:
    try:
        return float(row[col])
    except (TypeError, ValueError):
        raise DataError(f"{path}: non-numeric {col} {row.get(col)!r} at row {lineno}") from None


def _int(row: dict, col: str, path, lineno: int) -> int:
    v = _float(row, col, path, lineno)
    if v != int(v):
        raise DataError(f"{path}: non-integer {col} {row[col]!r} at row {lineno}")
    return int(v)


def load_sweep_csv(path) -> list[SweepCurve]:
    """Columns ``model,seed,level,mean_reward``; one curve per (model, seed).

    An empty seed cell means the row already holds a seed-averaged value.
    """
    rows = _read_rows(path, ["model", "seed", "level", "mean_reward"])
    groups: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for lineno, row in enumerate(rows, start=2):
        key = (row["model"], row["seed"])
        groups.setdefault(key, []).append(
            (_int(row, "level", path, lineno), _float(row, "mean_reward", path, lineno)))
    curves = []
    for (model, seed), levels in groups.items():
        levels.sort()
        idx = [i for i, _ in levels]
        if len(set(idx)) != len(idx):
            raise DataError(f"{path}: duplicate level for model {model!r} seed {seed!r}")
        curves.append(SweepCurve(model, tuple(levels), seed or None))
    return curves


def average_curves(curves: Sequence[SweepCurve], model: str) -> SweepCurve:
    """Level-wise mean over the seeds of one model."""
    mine = [c for c in curves if c.model == model]
    if not mine:
        raise DataError(f"no curves for model {model!r}")
    idx = mine[0].indices
    for c in mine[1:]:
        if c.indices != idx:
            raise DataError(f"model {model!r}: seeds cover different severity levels")
    mean = np.mean([c.rewards for c in mine], axis=0)
    return SweepCurve.from_rewards(model, mean, None, idx)


def load_trace_csv(path, push_steps: dict[str, int] | None = None,
                   window: int = 40) -> dict[str, EpisodeTrace]:
    """Columns ``episode_id,step,tracking_error`` plus ``push_step`` unless given separately."""
    need = ["episode_id", "step", "tracking_error"]
    rows = _read_rows(path, need if push_steps is not None else need + ["push_step"])
    series: dict[str, list[tuple[int, float]]] = {}
    pushes: dict[str, int] = {}
    for lineno, row in enumerate(rows, start=2):
        ep = row["episode_id"]
        series.setdefault(ep, []).append(
            (_int(row, "step", path, lineno), _float(row, "tracking_error", path, lineno)))
        if push_steps is None:
            p = _int(row, "push_step", path, lineno)
            if pushes.setdefault(ep, p) != p:
                raise DataError(f"{path}: episode {ep!r} has inconsistent push_step values")
    if push_steps is not None:
        pushes = push_steps
    traces = {}
    for ep, pts in series.items():
        pts.sort()
        steps = [s for s, _ in pts]
        if steps != list(range(steps[0], steps[0] + len(steps))):
            raise DataError(f"{path}: episode {ep!r} steps are not contiguous")
        if ep not in pushes:
            raise DataError(f"{path}: no push_step for episode {ep!r}")
        traces[ep] = EpisodeTrace(tuple(e for _, e in pts), pushes[ep] - steps[0], window)
    return traces


def load_push_steps_csv(path) -> dict[str, int]:
    rows = _read_rows(path, ["episode_id", "push_step"])
    return {row["episode_id"]: _int(row, "push_step", path, i) for i, row in enumerate(rows, start=2)}


def load_intervention_csv(path) -> list[InterventionRecord]:
    cols = ["factor", "dr_level", "seed", "baseline_reward", "clamped_reward"]
    rows = _read_rows(path, cols)
    return [
        InterventionRecord(row["factor"], row["dr_level"], row["seed"],
                           _float(row, "baseline_reward", path, i),
                           _float(row, "clamped_reward", path, i))
        for i, row in enumerate(rows, start=2)
    ]
