import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentdiag.errors import DataError, NumericError
from latentdiag.geometry import (
    GradientSeries, cosine_series, norm_fraction, spectrum_metrics, svd_geometry,
)
from latentdiag.synth import gen_lowrank


def test_uniform_spectrum_exact():
    # 10 orthonormal directions with equal scale -> all singular values equal
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((40, 10)))[0]
    g = svd_geometry(Q * 3.0, center=False)
    assert g.effective_rank == pytest.approx(10.0, abs=1e-10)
    assert g.participation_ratio == pytest.approx(10.0, abs=1e-10)
    assert g.condition_number == pytest.approx(1.0, abs=1e-10)


def test_spectrum_metrics_direct():
    e, p, c, n = spectrum_metrics(np.ones(10))
    assert (e, p, c, n) == (pytest.approx(10.0), pytest.approx(10.0), 1.0, 10)


def test_spectrum_metrics_against_eigendecomposition(rng):
    X = rng.standard_normal((500, 6)) @ rng.standard_normal((6, 6))
    g = svd_geometry(X)
    lam = np.clip(np.linalg.eigvalsh(np.cov(X.T, bias=True) * len(X)), 0, None)
    assert g.participation_ratio == pytest.approx(lam.sum() ** 2 / (lam ** 2).sum(), rel=1e-9)
    sv = np.sort(np.sqrt(lam))[::-1]
    p = sv / sv.sum()
    assert g.effective_rank == pytest.approx(np.exp(-(p * np.log(p)).sum()), rel=1e-9)
    assert g.condition_number == pytest.approx(sv[0] / sv[-1], rel=1e-6)


def test_rank_one():
    g = svd_geometry(gen_lowrank(10000, 24, 1, seed=2))
    assert g.effective_rank <= 1.1 and g.participation_ratio <= 1.1
    assert g.n_retained == 1


def test_centering_flag():
    X = np.ones((50, 3)) * [1.0, 2.0, 3.0] + np.random.default_rng(1).standard_normal((50, 3)) * 1e-3
    assert svd_geometry(X, center=False).effective_rank < svd_geometry(X).effective_rank


def test_all_zero_rejected():
    with pytest.raises(NumericError):
        svd_geometry(np.zeros((5, 3)))
    with pytest.raises(DataError):
        svd_geometry(np.zeros((1, 3)))


def test_frobenius_reconstruction(rng):
    X = rng.standard_normal((200, 7))
    g = svd_geometry(X)
    Xc = X - X.mean(0)
    assert np.sum(g.singular_values ** 2) == pytest.approx(np.sum(Xc ** 2), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_geometry_invariances(seed, scale):
    r = np.random.default_rng(seed)
    X = r.standard_normal((60, 5)) @ r.standard_normal((5, 5))
    base = svd_geometry(X)
    perm = svd_geometry(X[r.permutation(60)])
    scaled = svd_geometry(X * scale)
    for g in (perm, scaled):
        assert g.effective_rank == pytest.approx(base.effective_rank, rel=1e-9)
        assert g.participation_ratio == pytest.approx(base.participation_ratio, rel=1e-9)
    assert 1 <= base.effective_rank <= 5 and 1 <= base.participation_ratio <= 5
    assert base.condition_number >= 1


# -- gradients ---------------------------------------------------------------

def series(values, steps=None):
    values = np.asarray(values, dtype=float)
    return GradientSeries(tuple(range(0, 10 * len(values), 10)) if steps is None else steps, values)


def test_cosine_positive_scaling(rng):
    g = rng.standard_normal((8, 20))
    cos, mean, std = cosine_series(series(g), series(2 * g))
    np.testing.assert_allclose(cos, 1.0)
    assert mean == pytest.approx(1.0) and std == pytest.approx(0.0, abs=1e-12)


def test_cosine_orthogonal():
    a = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 2.0]])
    b = np.array([[0, 3.0, 0], [0, 0, -1.0], [5.0, 0, 0]])
    cos, mean, std = cosine_series(series(a), series(b))
    assert np.all(cos == 0) and mean == 0 and std == 0


def test_cosine_population_std():
    a = np.array([[1.0, 0], [1.0, 0]])
    b = np.array([[1.0, 0], [0, 1.0]])
    _, mean, std = cosine_series(series(a), series(b))
    assert mean == 0.5 and std == 0.5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cosine_bounds_and_row_scaling(seed):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal((6, 4)), r.standard_normal((6, 4))
    cos, _, _ = cosine_series(series(a), series(b))
    assert np.all(np.abs(cos) <= 1)
    scaled, _, _ = cosine_series(series(a * r.uniform(0.1, 10, (6, 1))), series(b))
    np.testing.assert_allclose(scaled, cos, atol=1e-12)


def test_cosine_errors(rng):
    a = rng.standard_normal((3, 4))
    with pytest.raises(DataError, match="step"):
        cosine_series(series(a), series(a, steps=(0, 1, 2)))
    z = a.copy()
    z[1] = 0
    with pytest.raises(NumericError, match="step 10"):
        cosine_series(series(a), series(z))
    with pytest.raises(DataError):
        GradientSeries((0, 0, 1), a)


def test_norm_fraction_examples(rng):
    g = rng.standard_normal((4, 6))
    np.testing.assert_allclose(norm_fraction(series(g), series(g)), 1.0)
    np.testing.assert_allclose(norm_fraction(series(0.3 * g), series(g)), 0.3)
    u = np.array([[3.0, 0.0]])
    v = np.array([[0.0, 4.0]])
    assert norm_fraction(series(u), series(u + v))[0] == pytest.approx(0.6)
    with pytest.raises(NumericError):
        norm_fraction(series(u), series(np.zeros((1, 2))))
