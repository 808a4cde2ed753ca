"""Data model, file ingestion and latent-subspace utilities.

Representations and factors are plain float64 numpy arrays wrapped in small
frozen dataclasses that carry column names. Arrays are copied and marked
read-only on construction so instances can be shared freely.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

BIN_MAGIC = b"LDM1"
_HEADER = struct.Struct("<4sII")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, order="C", copy=True)
    if arr.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"matrix must have at least one row and one column, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def check_finite(values: np.ndarray, what: str = "matrix") -> None:
    """Raise DataError naming the first (row, col) holding NaN or Inf."""
    bad = ~np.isfinite(values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"non-finite value in {what} at ({r}, {c}): {values[r, c]!r}")


@dataclass(frozen=True)
class _NamedMatrix:
    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if len(self.names) != self.values.shape[1]:
            raise DataError(
                f"{len(self.names)} column names for {self.values.shape[1]} columns"
            )
        if len(set(self.names)) != len(self.names):
            raise DataError(f"duplicate column names: {list(self.names)}")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


class RepresentationSet(_NamedMatrix):
    """Samples of a learned representation, one row per sample."""

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None) -> "RepresentationSet":
        values = np.asarray(values, dtype=np.float64)
        if names is None:
            names = [f"z{j}" for j in range(values.shape[1])]
        return cls(values, tuple(names))


class FactorSet(_NamedMatrix):
    """Ground-truth factor values, row-aligned with a RepresentationSet."""

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None) -> "FactorSet":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if names is None:
            names = [f"factor_{j}" for j in range(values.shape[1])]
        return cls(values, tuple(names))


@dataclass(frozen=True)
class Dataset:
    repr: RepresentationSet
    factors: FactorSet

    def __post_init__(self):
        if self.repr.n_rows != self.factors.n_rows:
            raise DataError(
                f"row count mismatch: representation has {self.repr.n_rows} rows, "
                f"factors have {self.factors.n_rows}"
            )

    @property
    def n_samples(self) -> int:
        return self.repr.n_rows

    @property
    def Z(self) -> np.ndarray:
        return self.repr.values

    @property
    def Y(self) -> np.ndarray:
        return self.factors.values


def validate_dataset(repr: RepresentationSet, factors: FactorSet) -> Dataset:
    """Pair representation and factors, rejecting row mismatch and non-finite values."""
    check_finite(repr.values, "representation")
    check_finite(factors.values, "factors")
    return Dataset(repr, factors)


# -- partitions --------------------------------------------------------------

@dataclass(frozen=True)
class FactorPartition:
    """Ordered assignment of half-open latent dimension ranges to factors."""

    entries: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        entries = tuple((str(n), int(s), int(e)) for n, s, e in self.entries)
        object.__setattr__(self, "entries", entries)
        names = [n for n, _, _ in entries]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate factor names in partition: {names}")
        for name, start, end in entries:
            if start < 0 or end <= start:
                raise DataError(f"invalid range for {name!r}: [{start}, {end})")
        spans = sorted((s, e, n) for n, s, e in entries)
        for (s0, e0, n0), (s1, _, n1) in zip(spans, spans[1:]):
            if s1 < e0:
                raise DataError(f"partition ranges overlap: {n0!r} and {n1!r}")

    @property
    def names(self) -> list[str]:
        return [n for n, _, _ in self.entries]

    @property
    def n_dims(self) -> int:
        """One past the largest dimension index covered."""
        return max(e for _, _, e in self.entries)

    def dims(self, factor: str) -> range:
        for name, start, end in self.entries:
            if name == factor:
                return range(start, end)
        raise DataError(f"unknown factor {factor!r}; partition has {self.names}")

    def check_within(self, n_dims: int) -> None:
        if self.n_dims > n_dims:
            raise DataError(
                f"partition references dimension {self.n_dims - 1} but representation has {n_dims}"
            )


DEFAULT_FACTORS = ("friction", "mass", "motor", "contact", "delay")


def default_partition() -> FactorPartition:
    """The five-factor layout of a 24-d latent."""
    return FactorPartition((
        ("friction", 0, 4),
        ("mass", 4, 10),
        ("motor", 10, 16),
        ("contact", 16, 20),
        ("delay", 20, 24),
    ))


def load_partition(path) -> FactorPartition:
    """Read a partition config: one ``name,start,end_exclusive`` per line.

    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    entries = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected name,start,end_exclusive")
            try:
                entries.append((parts[0], int(parts[1]), int(parts[2])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer range bound") from None
    if not entries:
        raise DataError(f"{path}: empty partition")
    return FactorPartition(tuple(entries))


def clamp_subspace(repr: RepresentationSet, partition: FactorPartition,
                   factor: str, value: float) -> RepresentationSet:
    """Copy of ``repr`` with every column of ``factor``'s subspace set to ``value``."""
    dims = partition.dims(factor)
    if not np.isfinite(value):
        raise DataError(f"clamp value must be finite, got {value!r}")
    partition.check_within(repr.n_cols)
    out = np.array(repr.values)
    out[:, dims.start:dims.stop] = value
    return type(repr)(out, repr.names)


# -- CSV ---------------------------------------------------------------------

def read_csv_matrix(path) -> tuple[list[str], np.ndarray]:
    """Parse a header + numeric body CSV. Row numbers in errors are 1-based file lines."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: ragged row {lineno}: {len(row)} cells, header has {len(header)}"
                )
            parsed = []
            for col, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: empty body")
    return header, np.array(rows, dtype=np.float64)


def load_csv(path, kind: str = "repr") -> RepresentationSet | FactorSet:
    header, values = read_csv_matrix(path)
    check_finite(values, str(path))
    if kind == "repr":
        return RepresentationSet(values, tuple(header))
    if kind == "factors":
        return FactorSet(values, tuple(header))
    raise ValueError(f"kind must be 'repr' or 'factors', got {kind!r}")


def _fmt(x: float) -> str:
    return repr(float(x))


def save_csv(named: RepresentationSet | FactorSet, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(named.names)
        for row in named.values:
            writer.writerow([_fmt(v) for v in row])


# -- binary ------------------------------------------------------------------

def save_bin(matrix, path) -> None:
    """Write ``LDM1`` + u32 rows + u32 cols + row-major little-endian float64."""
    arr = np.ascontiguousarray(matrix, dtype="<f8")
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DataError(f"cannot save matrix of shape {arr.shape}")
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(BIN_MAGIC, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes(order="C"))


def load_bin(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != BIN_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if rows == 0 or cols == 0:
        raise DataError(f"{path}: zero row or column count ({rows}x{cols})")
    expected = rows * cols * 8
    payload = raw[_HEADER.size:]
    if len(payload) < expected:
        raise DataError(
            f"{path}: truncated payload, {len(payload) // 8} of {rows * cols} floats present"
        )
    if len(payload) > expected:
        raise DataError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)


def load_matrix(path, kind: str = "repr") -> RepresentationSet | FactorSet:
    """Load by extension: ``.bin`` uses the binary format, anything else CSV."""
    if Path(path).suffix == ".bin":
        values = load_bin(path)
        check_finite(values, str(path))
        cls = RepresentationSet if kind == "repr" else FactorSet
        return cls.from_array(values)
    return load_csv(path, kind)


def save_matrix(named: RepresentationSet | FactorSet, path) -> None:
    if Path(path).suffix == ".bin":
        save_bin(named.values, path)
    else:
        save_csv(named, path)
