"""Synthetic datasets whose metric values are known in closed form.

All generators are pure functions of their arguments. The factor, noise,
padding and rotation draws come from separate Philox streams (see
:mod:`latentdiag.seeding`), so ``gen_rotated`` rotates exactly the dataset
``gen_axis_aligned`` would return for the same spec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeding
from .data import DEFAULT_FACTORS, Dataset, FactorSet, RepresentationSet
from .errors import DataError

_FACTORS, _NOISE, _PAD, _ROTATION, _NULL_REPR, _LOWRANK_G, _LOWRANK_A, _PAIR = range(8)


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int
    n_factors: int
    n_dims: int
    noise_sigma: float = 0.0
    seed: int = 0

    def validate(self, aligned: bool = True) -> None:
        if self.n_samples < 2:
            raise DataError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.n_factors < 1 or self.n_dims < 1:
            raise DataError("n_factors and n_dims must be positive")
        if aligned and self.n_dims < self.n_factors:
            raise DataError(
                f"n_dims ({self.n_dims}) must be >= n_factors ({self.n_factors})"
            )
        if not self.noise_sigma >= 0:
            raise DataError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")


def factor_names(n: int) -> list[str]:
    """Default partition names first, then ``factor_<j>``."""
    return [DEFAULT_FACTORS[j] if j < len(DEFAULT_FACTORS) else f"factor_{j}"
            for j in range(n)]


def _wrap(Z: np.ndarray, Y: np.ndarray) -> Dataset:
    return Dataset(RepresentationSet.from_array(Z),
                   FactorSet.from_array(Y, factor_names(Y.shape[1])))


def _axis_aligned_arrays(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    n, F, D = spec.n_samples, spec.n_factors, spec.n_dims
    Y = seeding.rng(spec.seed, seeding.SYNTH, _FACTORS).standard_normal((n, F))
    Z = np.empty((n, D))
    Z[:, :F] = Y
    if spec.noise_sigma > 0:
        Z[:, :F] += spec.noise_sigma * seeding.rng(
            spec.seed, seeding.SYNTH, _NOISE).standard_normal((n, F))
    if D > F:
        Z[:, F:] = seeding.rng(spec.seed, seeding.SYNTH, _PAD).standard_normal((n, D - F))
    return Z, Y


def gen_axis_aligned(spec: SynthSpec) -> Dataset:
    """Dim j = factor j (+ Gaussian noise) for j < F, remaining dims pure noise."""
    spec.validate()
    return _wrap(*_axis_aligned_arrays(spec))


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with diag(R) > 0."""
    G = seeding.rng(seed, seeding.SYNTH, _ROTATION).standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def gen_rotated(spec: SynthSpec) -> Dataset:
    spec.validate()
    Z, Y = _axis_aligned_arrays(spec)
    return _wrap(Z @ random_orthogonal(spec.n_dims, spec.seed), Y)


def gen_null(spec: SynthSpec) -> Dataset:
    """Representation and factors drawn independently; no dependence at all."""
    spec.validate(aligned=False)
    Y = seeding.rng(spec.seed, seeding.SYNTH, _FACTORS).standard_normal(
        (spec.n_samples, spec.n_factors))
    Z = seeding.rng(spec.seed, seeding.SYNTH, _NULL_REPR).standard_normal(
        (spec.n_samples, spec.n_dims))
    return _wrap(Z, Y)


def gen_lowrank(n_samples: int, n_dims: int, rank: int, seed: int = 0) -> RepresentationSet:
    """Samples G @ A with Gaussian G (n x rank) and orthonormal-row A (rank x D)."""
    if not 1 <= rank <= n_dims:
        raise DataError(f"rank must lie in [1, {n_dims}], got {rank}")
    if n_samples < 2:
        raise DataError(f"n_samples must be >= 2, got {n_samples}")
    G = seeding.rng(seed, seeding.SYNTH, _LOWRANK_G).standard_normal((n_samples, rank))
    M = seeding.rng(seed, seeding.SYNTH, _LOWRANK_A).standard_normal((n_dims, rank))
    A = np.linalg.qr(M)[0].T
    return RepresentationSet.from_array(G @ A)


def gen_gaussian_pair(n_samples: int, rho: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Standard bivariate Gaussian with correlation ``rho``."""
    if not abs(rho) < 1:
        raise DataError(f"|rho| must be < 1, got {rho}")
    g = seeding.rng(seed, seeding.SYNTH, _PAIR).standard_normal((n_samples, 2))
    x = g[:, 0]
    y = rho * x + np.sqrt(1.0 - rho * rho) * g[:, 1]
    return x, y


def gaussian_mi(rho: float) -> float:
    """Closed-form MI (nats) of a bivariate Gaussian."""
    return -0.5 * np.log1p(-rho * rho)


GENERATORS = {
    "axis": gen_axis_aligned,
    "rotated": gen_rotated,
    "null": gen_null,
}
