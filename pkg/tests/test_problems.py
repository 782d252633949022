import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskdecomp._seeding import child_seed
from riskdecomp.problems import (CoordinateStats, DiagonalMeasurements, DiagonalRecoverySpec,
                                 GeneralRecoverySpec, LinearProblemSpec, SpecificationError,
                                 all_coordinate_stats, coordinate_stats, gen_diagonal_measurements,
                                 gen_general_measurements, gen_linear_dataset,
                                 general_ground_truth, noise_second_moment, split_signal_noise,
                                 theta_star)


# -- seeding ----------------------------------------------------------------


def test_child_seed_is_stable_and_label_sensitive():
    assert child_seed(0, "X") == child_seed(0, "X")
    assert len({child_seed(0, "X"), child_seed(0, "eps"), child_seed(1, "X"),
                child_seed(0, "X", 1)}) == 4
    assert 0 <= child_seed(123, "theta") < 2**64


# -- linear regression ------------------------------------------------------


def test_linear_dataset_shapes_for_figure_setting():
    spec = LinearProblemSpec(d=500, n=300, noise_level=2.0, seed=1)
    ds = gen_linear_dataset(spec)
    assert ds.X.shape == (300, 500)
    for v in (ds.y_noisy, ds.y_clean, ds.eps):
        assert v.shape == (300,)


def test_zero_noise_gives_clean_responses():
    ds = gen_linear_dataset(LinearProblemSpec(d=20, n=30, noise_level=0.0, seed=2))
    assert np.all(ds.eps == 0)
    np.testing.assert_array_equal(ds.y_noisy, ds.y_clean)


def test_empirical_covariance_concentrates():
    ds = gen_linear_dataset(LinearProblemSpec(d=5, n=100_000, seed=3))
    emp = ds.X.T @ ds.X / ds.n
    assert np.max(np.abs(emp - np.eye(5))) < 0.05


def test_powerlaw_covariance_scales_columns():
    cov = np.array([1.0, 0.25, 0.04])
    ds = gen_linear_dataset(LinearProblemSpec(d=3, n=50_000, cov_diag=cov, seed=4))
    var = ds.X.var(axis=0)
    np.testing.assert_allclose(var, cov, rtol=0.05)


def test_dataset_is_deterministic():
    spec = LinearProblemSpec(d=10, n=20, seed=9)
    a, b = gen_linear_dataset(spec), gen_linear_dataset(spec)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y_noisy, b.y_noisy)


def test_theta_generators():
    dense = theta_star(LinearProblemSpec(d=40, n=5, theta_norm=2.0, seed=1))
    assert np.linalg.norm(dense) == pytest.approx(2.0)
    sparse = theta_star(LinearProblemSpec(d=40, n=5, theta_kind="sparse", theta_support=5,
                                          theta_norm=1.0, seed=1))
    assert np.count_nonzero(sparse) == 5
    assert np.linalg.norm(sparse) == pytest.approx(1.0)
    fixed = np.arange(4.0)
    np.testing.assert_array_equal(
        theta_star(LinearProblemSpec(d=4, n=5, theta_kind="fixed", theta_fixed=fixed)), fixed)


@pytest.mark.parametrize("kwargs", [
    dict(d=0, n=5), dict(d=5, n=0), dict(d=3, n=5, cov_diag=[1.0, -1.0, 1.0]),
    dict(d=3, n=5, theta_kind="sparse"), dict(d=3, n=5, theta_kind="fixed"),
    dict(d=3, n=5, noise_kind="laplace"), dict(d=3, n=5, noise_level=-1.0),
])
def test_invalid_linear_specs(kwargs):
    with pytest.raises(SpecificationError):
        LinearProblemSpec(**kwargs)


def test_split_reconstructs_noisy_response():
    ds = gen_linear_dataset(LinearProblemSpec(d=100, n=50, noise_level=2.0, seed=5))
    bias, var = split_signal_noise(ds)
    np.testing.assert_array_equal(bias.y_noisy + var.y_noisy, ds.y_noisy)
    # variance responses are the stored noise, bit for bit
    assert np.array_equal(var.y_noisy, ds.eps)
    assert bias.X is ds.X and var.X is ds.X


def test_split_zero_noise_variance_responses_vanish():
    ds = gen_linear_dataset(LinearProblemSpec(d=10, n=20, noise_level=0.0, seed=5))
    _, var = split_signal_noise(ds)
    assert np.all(var.y_noisy == 0)


@given(seed=st.integers(0, 2**32), n=st.integers(1, 40), d=st.integers(1, 40),
       level=st.floats(0.0, 10.0))
def test_split_additivity_property(seed, n, d, level):
    ds = gen_linear_dataset(LinearProblemSpec(d=d, n=n, noise_level=level, seed=seed))
    bias, var = split_signal_noise(ds)
    assert np.array_equal(bias.y_noisy + var.y_noisy, ds.y_noisy)


def test_noise_second_moment_oracles():
    # clipped Gaussian against a large Monte Carlo sample
    spec = LinearProblemSpec(d=1, n=1, noise_level=2.0, noise_clip=1.5)
    x = np.clip(2.0 * np.random.default_rng(0).standard_normal(2_000_000), -1.5, 1.5)
    assert noise_second_moment(spec) == pytest.approx(np.mean(x**2), rel=3e-3)
    assert noise_second_moment(LinearProblemSpec(d=1, n=1, noise_kind="uniform",
                                                 noise_level=3.0)) == pytest.approx(3.0)
    assert noise_second_moment(LinearProblemSpec(d=1, n=1, noise_level=2.0)) == 4.0


def test_clipped_noise_respects_bound():
    ds = gen_linear_dataset(LinearProblemSpec(d=2, n=5000, noise_level=2.0, noise_clip=1.0))
    assert np.max(np.abs(ds.eps)) <= 1.0


# -- diagonal recovery --------------------------------------------------------


def _diag(**kw):
    base = dict(d=20, r=3, sigma_star=(5.0, 3.0, 1.0), n=200, noise_std=1.0, seed=0)
    base.update(kw)
    return DiagonalRecoverySpec(**base)


def test_diagonal_measurement_shapes():
    m = gen_diagonal_measurements(_diag())
    assert m.a.shape == m.eps.shape == m.y.shape == (20, 200)
    np.testing.assert_array_equal(m.sigma_star[:3], [5.0, 3.0, 1.0])
    assert np.all(m.sigma_star[3:] == 0)


def test_diagonal_zero_noise():
    m = gen_diagonal_measurements(_diag(noise_std=0.0))
    assert np.all(m.eps == 0)
    np.testing.assert_array_equal(m.y, m.a * m.sigma_star[:, None])


def test_measurement_second_moment_concentrates():
    m = gen_diagonal_measurements(_diag(seed=7))
    xi = np.mean(m.a**2, axis=1)
    assert np.all(np.abs(xi - 1.0) <= 3.0 * np.sqrt(2.0 / 200))


def test_uniform_measurements_are_bounded_unit_variance():
    m = gen_diagonal_measurements(_diag(measurement="uniform", n=20_000))
    assert np.max(np.abs(m.a)) <= np.sqrt(3.0)
    np.testing.assert_allclose(np.mean(m.a**2, axis=1), 1.0, atol=0.05)


def test_noise_clip_recorded_and_applied():
    m = gen_diagonal_measurements(_diag(noise_bound=0.5))
    assert m.metadata["clipped"] and m.metadata["noise_bound"] == 0.5
    assert np.max(np.abs(m.eps)) <= 0.5 + 1e-12


def test_coordinate_stats_trivial_instance():
    a = np.ones((1, 10))
    m = DiagonalMeasurements(a=a, eps=np.zeros((1, 10)), y=5.0 * a, sigma_star=np.array([5.0]))
    st_ = coordinate_stats(m, 0)
    assert (st_.xi, st_.s_b, st_.s_v, st_.s_emp) == (1.0, 5.0, 0.0, 5.0)


def test_coordinate_stats_zero_signal_and_range():
    m = gen_diagonal_measurements(_diag())
    st_ = coordinate_stats(m, 10)
    assert st_.sigma_star == 0 and st_.s_emp == st_.s_v
    with pytest.raises(IndexError):
        coordinate_stats(m, 20)


@given(seed=st.integers(0, 2**32))
def test_coordinate_stats_invariants(seed):
    for st_ in all_coordinate_stats(gen_diagonal_measurements(_diag(seed=seed, n=50))):
        assert st_.xi > 0
        assert st_.s_emp == st_.s_b + st_.s_v


def test_noise_target_concentrates_over_seeds():
    # |s_v| <= 3 nu / sqrt(n) in at least 99% of 1000 seeds (one coordinate)
    n, hits = 600, 0
    for seed in range(1000):
        m = gen_diagonal_measurements(DiagonalRecoverySpec(d=1, r=1, sigma_star=(1.0,), n=n,
                                                           seed=seed))
        hits += abs(coordinate_stats(m, 0).s_v) <= 3.0 / np.sqrt(n)
    assert hits >= 990


@pytest.mark.parametrize("kwargs", [dict(r=0), dict(r=21), dict(sigma_star=(1.0, 3.0, 5.0)),
                                    dict(sigma_star=(5.0, 3.0)), dict(alpha=0.0),
                                    dict(noise_std=-1.0), dict(measurement="rademacher")])
def test_invalid_diagonal_specs(kwargs):
    with pytest.raises(SpecificationError):
        _diag(**kwargs)


# -- general recovery ---------------------------------------------------------


def test_general_ground_truth_is_rank_r_psd():
    spec = GeneralRecoverySpec(d=20, r=3, sigma_star=(5, 3, 1), n=10, seed=3)
    x = general_ground_truth(spec)
    np.testing.assert_allclose(x, x.T, atol=1e-12)
    eig = np.sort(np.linalg.eigvalsh(x))[::-1]
    np.testing.assert_allclose(eig[:3], [5, 3, 1], atol=1e-10)
    assert np.max(np.abs(eig[3:])) < 1e-10


def test_general_measurements_shapes_and_model():
    spec = GeneralRecoverySpec(d=20, r=3, sigma_star=(5, 3, 1), n=200, seed=1)
    m = gen_general_measurements(spec)
    assert m.A.shape == (200, 20, 20)
    np.testing.assert_allclose(m.y, np.einsum("kij,ij->k", m.A, m.x_star) + m.eps, atol=1e-12)


def test_general_zero_noise():
    m = gen_general_measurements(GeneralRecoverySpec(d=5, r=1, sigma_star=(1,), n=30,
                                                     noise_std=0.0))
    np.testing.assert_array_equal(m.y, m.y_clean)


def test_general_measurement_inner_products_center():
    spec = GeneralRecoverySpec(d=20, r=3, sigma_star=(5, 3, 1), n=600, seed=2)
    m = gen_general_measurements(spec)
    M = np.random.default_rng(5).standard_normal((20, 20))
    M /= np.linalg.norm(M)
    assert abs(np.mean(np.einsum("kij,ij->k", m.A, M))) <= 3.0 / np.sqrt(600)


def test_factor_seed_fixes_ground_truth():
    a = GeneralRecoverySpec(d=6, r=2, sigma_star=(2, 1), n=5, seed=1, factor_seed=9)
    b = GeneralRecoverySpec(d=6, r=2, sigma_star=(2, 1), n=5, seed=2, factor_seed=9)
    np.testing.assert_array_equal(general_ground_truth(a), general_ground_truth(b))


def test_coordinate_stats_dataclass_defaults():
    assert CoordinateStats(1.0, 0.0, 0.0, 0.0).sigma_star == 0.0
