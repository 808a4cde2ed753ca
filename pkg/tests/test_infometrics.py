import math
from collections import Counter

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentdiag.data import Dataset, FactorPartition, FactorSet, RepresentationSet, default_partition
from latentdiag.errors import DataError, NumericError
from latentdiag.infometrics import (
    dci, discretize, factor_alignment, hist_entropy, hist_mi, ksg_mi, mi_per_factor, mig, sap,
)
from latentdiag.synth import SynthSpec, gaussian_mi, gen_axis_aligned, gen_gaussian_pair, gen_null


def ksg_bruteforce(x, y, k):
    """O(N^2) KSG estimator 1 written from the definition."""
    n = len(x)
    total = 0.0
    for i in range(n):
        d = sorted(max(abs(x[i] - x[j]), abs(y[i] - y[j])) for j in range(n) if j != i)
        eps = d[k - 1]
        nx = sum(1 for j in range(n) if j != i and abs(x[i] - x[j]) < eps)
        ny = sum(1 for j in range(n) if j != i and abs(y[i] - y[j]) < eps)
        total += float(mpmath.digamma(nx + 1) + mpmath.digamma(ny + 1))
    return float(mpmath.digamma(k) + mpmath.digamma(n)) - total / n


def hist_mi_bruteforce(x, y, bins):
    def codes(v):
        lo, hi = min(v), max(v)
        return [min(int((a - lo) / (hi - lo) * bins), bins - 1) for a in v]

    cx, cy = codes(list(x)), codes(list(y))
    n = len(cx)
    pxy, px, py = Counter(zip(cx, cy)), Counter(cx), Counter(cy)
    return sum(c / n * math.log((c / n) / (px[a] / n * py[b] / n)) for (a, b), c in pxy.items())


def make_ds(Z, Y, names=None):
    return Dataset(RepresentationSet.from_array(Z), FactorSet.from_array(Y, names))


# -- KSG ---------------------------------------------------------------------

@pytest.mark.parametrize("rho,k", [(0.0, 3), (0.6, 5), (0.95, 1)])
def test_ksg_matches_bruteforce(rho, k):
    x, y = gen_gaussian_pair(150, rho, seed=2)
    assert ksg_mi(x, y, k) == pytest.approx(ksg_bruteforce(x, y, k), abs=1e-9)


def test_ksg_independent():
    x, y = gen_gaussian_pair(10000, 0.0, seed=31)
    assert abs(ksg_mi(x, y, 5)) <= 0.02


@pytest.mark.parametrize("rho", [0.5, 0.9])
def test_ksg_gaussian_closed_form(rho):
    x, y = gen_gaussian_pair(10000, rho, seed=32)
    assert ksg_mi(x, y, 5) == pytest.approx(gaussian_mi(rho), abs=0.05)


def test_ksg_self_mi_large():
    x, _ = gen_gaussian_pair(1000, 0.0, seed=4)
    assert ksg_mi(x, x.copy(), 5) >= 2.0


def test_ksg_symmetric():
    x, y = gen_gaussian_pair(2000, 0.7, seed=5)
    assert abs(ksg_mi(x, y, 5, seed=3) - ksg_mi(y, x, 5, seed=3)) <= 1e-9


def test_ksg_affine_invariance():
    x, y = gen_gaussian_pair(10000, 0.6, seed=6)
    assert ksg_mi(x, y) == pytest.approx(ksg_mi(x, 3 * y + 7), abs=0.02)


def test_ksg_errors():
    with pytest.raises(DataError):
        ksg_mi(np.arange(5.0), np.arange(5.0), k=5)
    with pytest.raises(NumericError, match="zero-variance"):
        ksg_mi(np.ones(20), np.arange(20.0))


def test_ksg_multidim_paths_agree():
    import latentdiag.infometrics as im
    r = np.random.default_rng(0)
    X = r.standard_normal((400, 3))
    y = X[:, 0] + 0.5 * r.standard_normal(400)
    tree = ksg_mi(X, y)
    old = im._TREE_MAX_DIMS
    im._TREE_MAX_DIMS = 0
    try:
        brute = ksg_mi(X, y)
    finally:
        im._TREE_MAX_DIMS = old
    assert tree == brute


# -- per-factor MI -----------------------------------------------------------

def test_mi_null_per_factor(null_10k):
    rep = mi_per_factor(null_10k, k=5)
    assert all(v <= 0.02 for v in rep.per_factor_mi.values())
    assert rep.overall_mi == pytest.approx(sum(rep.per_factor_mi.values()))


@pytest.mark.slow
def test_mi_null_joint_overall(null_10k):
    assert mi_per_factor(null_10k, k=5, mode="joint").overall_mi <= 0.05


def test_mi_axis_aligned(aligned_10k):
    rep = mi_per_factor(aligned_10k, k=5)
    assert all(v >= 1.5 for v in rep.per_factor_mi.values())
    assert rep.best_dim == {n: f"z{j}" for j, n in enumerate(aligned_10k.factors.names)}


def test_mi_negative_flagged():
    x, y = gen_gaussian_pair(300, 0.0, seed=0)
    rep = mi_per_factor(make_ds(x[:, None], y[:, None]), k=5)
    v = rep.overall_mi
    assert bool(rep.flags) == (v < 0)


# -- histogram MI / MIG ------------------------------------------------------

def test_hist_mi_matches_bruteforce(rng):
    x = rng.standard_normal(500)
    y = x + rng.standard_normal(500)
    assert hist_mi(x, y, 7) == pytest.approx(hist_mi_bruteforce(x, y, 7), abs=1e-12)


def test_hist_mi_identity_uniform(rng):
    x = rng.uniform(size=100000)
    assert hist_mi(x, x, 20) == pytest.approx(math.log(20), abs=0.05)


def test_hist_mi_independent(rng):
    assert hist_mi(rng.uniform(size=100000), rng.uniform(size=100000), 20) <= 0.01


def test_hist_mi_sign_flip(rng):
    x = rng.standard_normal(5000)
    assert hist_mi(x, -x, 20) == pytest.approx(hist_mi(x, x, 20), abs=1e-9)


def test_hist_mi_zero_range():
    with pytest.raises(DataError, match="zero range"):
        hist_mi(np.ones(30), np.arange(30.0), 5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.floats(0.0, 3.0))
def test_hist_mi_bounded_by_entropies(seed, bins, noise):
    r = np.random.default_rng(seed)
    x = r.standard_normal(400)
    y = x + noise * r.standard_normal(400)
    mi = hist_mi(x, y, bins)
    assert mi <= min(hist_entropy(x, bins), hist_entropy(y, bins)) + 1e-9


def test_discretize_edges():
    np.testing.assert_array_equal(discretize(np.array([0.0, 0.5, 1.0]), 2), [0, 1, 1])


def test_mig_axis_aligned(aligned_10k):
    assert mig(aligned_10k) >= 0.9


def test_mig_null(null_10k):
    assert mig(null_10k) <= 0.02


def test_mig_duplicated_dim():
    ds = gen_axis_aligned(SynthSpec(10000, 2, 2, 0.0, seed=3))
    Z = np.column_stack([ds.Z, ds.Z[:, 0]])
    dup = make_ds(Z, ds.Y[:, :1])
    assert mig(dup) == pytest.approx(0.0, abs=1e-12)


def test_mig_skips_degenerate_factor(rng):
    Z = rng.standard_normal((500, 3))
    Y = np.column_stack([Z[:, 0], np.ones(500)])
    flags = []
    mig(make_ds(Z, Y), flags=flags)
    assert any("factor_1" in f for f in flags)
    with pytest.raises(DataError, match="degenerate"):
        mig(make_ds(Z, np.ones((500, 1))))


# -- DCI / SAP ---------------------------------------------------------------

def test_dci_one_to_one(aligned_10k):
    rep, R = dci(aligned_10k)
    assert rep.dci_disent >= 0.95 and rep.dci_complete >= 0.95
    assert rep.dci_inform <= 0.01
    assert R.shape == (5, 5)
    np.testing.assert_allclose(R.sum(axis=0), 1.0)


def test_dci_rotation(aligned_10k, rotated_10k):
    a, _ = dci(aligned_10k)
    r, _ = dci(rotated_10k)
    assert abs(a.dci_inform - r.dci_inform) <= 0.02
    assert r.dci_disent < a.dci_disent


def test_dci_null(null_10k):
    rep, _ = dci(null_10k)
    assert rep.dci_inform == pytest.approx(1.0, abs=0.05)


def test_dci_hand_matrix():
    # importance columns [1,0] and [0.5,0.5]: row masses 1.5 and 0.5;
    # the second row is concentrated on one factor so it contributes its full weight
    from latentdiag.infometrics import _normalized_entropy
    R = np.array([[1.0, 0.5], [0.0, 0.5]])
    rho = R.sum(1) / R.sum()
    d = sum(rho[i] * (1 - _normalized_entropy(R[i], 2)) for i in range(2))
    h0 = -(2 / 3 * math.log(2 / 3) + 1 / 3 * math.log(1 / 3)) / math.log(2)
    assert d == pytest.approx(0.75 * (1 - h0) + 0.25)


def test_sap_one_to_one(aligned_10k):
    assert sap(aligned_10k) >= 0.95


def test_sap_null(null_10k):
    assert sap(null_10k) <= 0.02


def test_sap_duplicated_dim():
    ds = gen_axis_aligned(SynthSpec(5000, 1, 1, 0.0, seed=3))
    Z = np.column_stack([ds.Z, ds.Z[:, 0], np.random.default_rng(0).standard_normal(5000)])
    assert sap(make_ds(Z, ds.Y)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 4), st.floats(0.0, 2.0))
def test_metrics_bounded(seed, d, f, noise):
    r = np.random.default_rng(seed)
    Y = r.standard_normal((300, f))
    Z = r.standard_normal((300, d)) + noise * np.resize(Y, (300, d))
    ds = make_ds(Z, Y)
    rep, _ = dci(ds, folds=3)
    assert rep.dci_inform >= 0
    assert 0 <= rep.dci_disent <= 1 and 0 <= rep.dci_complete <= 1
    assert 0 <= mig(ds) <= 1 and 0 <= sap(ds) <= 1


# -- alignment ---------------------------------------------------------------

def _aligned_partition_dataset(n=2000, seed=0):
    r = np.random.default_rng(seed)
    Y = r.standard_normal((n, 5))
    part = default_partition()
    Z = np.empty((n, 24))
    for f, (_, s, e) in enumerate(part.entries):
        Z[:, s:e] = Y[:, [f]]
    return Z, Y, part


def test_alignment_perfect():
    Z, Y, part = _aligned_partition_dataset()
    # orthogonalize factors so cross-correlations are exactly zero
    Yo = np.linalg.qr(Y - Y.mean(0))[0]
    for f, (_, s, e) in enumerate(part.entries):
        Z[:, s:e] = Yo[:, [f]]
    rep = factor_alignment(make_ds(Z, Yo, list(part.names)), part)
    assert rep.score == pytest.approx(1.0, abs=1e-12)
    assert rep.chance_level == 0.2


def test_alignment_equal_split():
    r = np.random.default_rng(3)
    Y = np.linalg.qr(r.standard_normal((1000, 5)) - 0.0)[0]
    Y -= Y.mean(0)
    Y = np.linalg.qr(Y)[0]
    z = Y[:, 0] + Y[:, 1]
    part = FactorPartition((("a", 0, 1), ("b", 1, 2)))
    ds = make_ds(np.column_stack([z, Y[:, 1]]), Y, ["a", "b", "c", "d", "e"])
    rep = factor_alignment(ds, part)
    assert rep.per_dim_ratio[0] == pytest.approx(0.5, abs=1e-12)


def test_alignment_chance_level_for_noise():
    r = np.random.default_rng(9)
    Y = r.standard_normal((20000, 5))
    part = default_partition()
    Z = r.standard_normal((20000, 24))
    rep = factor_alignment(make_ds(Z, Y, list(part.names)), part)
    assert rep.score == pytest.approx(0.2, abs=0.03)


def test_alignment_zero_denominator_flagged():
    Z, Y, part = _aligned_partition_dataset()
    Z[:, 0] = 0.0
    rep = factor_alignment(make_ds(Z, Y, list(part.names)), part)
    assert rep.per_dim_ratio[0] == 0.0
    assert any("1 dim" in f for f in rep.flags)


def test_alignment_scale_invariant():
    Z, Y, part = _aligned_partition_dataset()
    Z = Z + np.random.default_rng(1).standard_normal(Z.shape)
    base = factor_alignment(make_ds(Z, Y, list(part.names)), part).score
    Z2 = Z * np.linspace(0.1, 50, 24)
    assert factor_alignment(make_ds(Z2, Y, list(part.names)), part).score == pytest.approx(base, abs=1e-12)


def test_alignment_positional_and_missing():
    Z, Y, part = _aligned_partition_dataset()
    rep = factor_alignment(make_ds(Z, Y), part)
    assert any("by position" in f for f in rep.flags)
    with pytest.raises(DataError):
        factor_alignment(make_ds(Z[:, :10], Y, list(part.names)), part)
