import numpy as np
import pytest

from latentdiag.errors import DataError
from latentdiag.geometry import svd_geometry
from latentdiag.infometrics import ksg_mi
from latentdiag.probes import ProbeConfig, cv_probe
from latentdiag.synth import (
    SynthSpec, gaussian_mi, gen_axis_aligned, gen_gaussian_pair, gen_lowrank, gen_null,
    gen_rotated, random_orthogonal,
)


def test_noiseless_columns_equal_factors():
    ds = gen_axis_aligned(SynthSpec(200, 3, 6, 0.0, seed=1))
    np.testing.assert_array_equal(ds.Z[:, :3], ds.Y)


def test_deterministic_and_seed_sensitive():
    spec = SynthSpec(100, 2, 4, 0.5, seed=9)
    a, b = gen_axis_aligned(spec), gen_axis_aligned(spec)
    assert a.Z.tobytes() == b.Z.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    c = gen_axis_aligned(SynthSpec(100, 2, 4, 0.5, seed=10))
    assert not np.array_equal(a.Z, c.Z)
    for gen in (gen_null, gen_rotated):
        assert gen(spec).Z.tobytes() == gen(spec).Z.tobytes()


def test_invalid_specs():
    with pytest.raises(DataError):
        gen_axis_aligned(SynthSpec(100, 5, 3))
    with pytest.raises(DataError):
        gen_null(SynthSpec(1, 1, 1))
    with pytest.raises(DataError):
        gen_lowrank(100, 4, 5, 0)
    with pytest.raises(DataError):
        gen_gaussian_pair(10, 1.0)


def test_noise_one_gives_half_r2():
    # var(f) / (var(f) + sigma^2) = 0.5
    ds = gen_axis_aligned(SynthSpec(20000, 1, 1, 1.0, seed=3))
    r2 = cv_probe(ds, ProbeConfig(seed=1)).overall_r2
    assert r2 == pytest.approx(0.5, abs=0.02)


def test_rotation_orthogonal():
    Q = random_orthogonal(24, seed=4)
    np.testing.assert_allclose(Q.T @ Q, np.eye(24), atol=1e-10)


def test_rotated_is_rotation_of_aligned():
    spec = SynthSpec(500, 3, 5, 0.1, seed=2)
    a, r = gen_axis_aligned(spec), gen_rotated(spec)
    np.testing.assert_array_equal(a.Y, r.Y)
    np.testing.assert_allclose(a.Z @ random_orthogonal(5, 2), r.Z, atol=1e-12)


def test_rotation_preserves_covariance_spectrum():
    spec = SynthSpec(2000, 3, 6, 0.3, seed=8)
    ev = [np.linalg.eigvalsh(np.cov(g(spec).Z.T)) for g in (gen_axis_aligned, gen_rotated)]
    np.testing.assert_allclose(ev[0], ev[1], atol=1e-8)


def test_rotation_lowers_max_dim_correlation():
    spec = SynthSpec(5000, 3, 3, 0.0, seed=6)

    def max_corr(ds):
        c = np.corrcoef(ds.Z.T, ds.Y.T)[:3, 3:]
        return np.abs(c).max(axis=1)

    assert np.all(max_corr(gen_rotated(spec)) < max_corr(gen_axis_aligned(spec)))


def test_rotation_preserves_joint_mi():
    spec = SynthSpec(3000, 2, 2, 0.5, seed=12)
    a, r = gen_axis_aligned(spec), gen_rotated(spec)
    for f in range(2):
        assert ksg_mi(a.Z, a.Y[:, f]) == pytest.approx(ksg_mi(r.Z, r.Y[:, f]), abs=0.05)


@pytest.mark.parametrize("rank,lo,hi", [(1, 1.0, 1.1), (5, 4.5, 5.2)])
def test_lowrank_effective_rank(rank, lo, hi):
    g = svd_geometry(gen_lowrank(10000, 24, rank, seed=3))
    assert lo <= g.effective_rank <= hi


def test_full_rank_participation_ratio():
    g = svd_geometry(gen_lowrank(10000, 24, 24, seed=3))
    assert 20 <= g.participation_ratio <= 24


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.9])
def test_gaussian_pair_correlation(rho):
    x, y = gen_gaussian_pair(50000, rho, seed=1)
    assert np.corrcoef(x, y)[0, 1] == pytest.approx(rho, abs=0.01)


def test_gaussian_mi_closed_form():
    assert gaussian_mi(0.0) == 0.0
    assert gaussian_mi(0.9) == pytest.approx(0.8304, abs=1e-4)
    assert gaussian_mi(0.5) == pytest.approx(0.1438, abs=1e-4)
