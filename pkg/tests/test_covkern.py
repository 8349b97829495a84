"""Covariance construction and correlated sampling."""

import numpy as np
import pytest

from fqme.covkern import CovarianceSpec, ErrorLaw, build_covariance, sample_correlated


def test_ar1_matrix_closed_form():
    cov = build_covariance(CovarianceSpec("AR1", 4, rho=0.5, sigma=2.0))
    expected = np.array(
        [
            [4.0, 2.0, 1.0, 0.5],
            [2.0, 4.0, 2.0, 1.0],
            [1.0, 2.0, 4.0, 2.0],
            [0.5, 1.0, 2.0, 4.0],
        ]
    )
    assert np.array_equal(cov, expected)


def test_cs_matrix_closed_form():
    cov = build_covariance(CovarianceSpec("CS", 3, rho=0.3, sigma=1.0))
    expected = np.array([[1.0, 0.3, 0.3], [0.3, 1.0, 0.3], [0.3, 0.3, 1.0]])
    assert np.array_equal(cov, expected)


def test_ind_matrix_is_scaled_identity():
    cov = build_covariance(CovarianceSpec("IND", 5, rho=0.9, sigma=1.5))
    assert np.array_equal(cov, 2.25 * np.eye(5))


def test_se_adjacent_correlation_and_decay():
    cov = build_covariance(CovarianceSpec("SE", 6, rho=0.7, sigma=2.0))
    corr = cov / 4.0
    assert np.allclose(np.diag(corr), 1.0)
    for i in range(5):
        assert abs(corr[i, i + 1] - 0.7) < 1e-12
    # correlation decays with lag
    first_row = corr[0]
    assert np.all(np.diff(first_row) < 0)


def test_se_zero_rho_is_diagonal():
    cov = build_covariance(CovarianceSpec("SE", 4, rho=0.0, sigma=1.0))
    assert np.array_equal(cov, np.eye(4))


def test_un_matrix_properties():
    spec = CovarianceSpec("UN", 6, rho=0.4, sigma=1.2, seed=9)
    cov = build_covariance(spec)
    assert np.allclose(cov, cov.T)
    assert np.allclose(np.diag(cov), 1.44)
    corr = cov / 1.44
    off = corr[~np.eye(6, dtype=bool)]
    assert abs(off.mean() - 0.4) < 1e-10
    assert np.linalg.eigvalsh(cov).min() > -1e-10
    assert np.array_equal(cov, build_covariance(spec))
    other = build_covariance(CovarianceSpec("UN", 6, rho=0.4, sigma=1.2, seed=10))
    assert not np.array_equal(cov, other)


def test_un_high_rho_blend():
    # requesting more correlation than the raw draw has blends toward all-ones
    cov = build_covariance(CovarianceSpec("UN", 5, rho=0.95, sigma=1.0, seed=3))
    corr_off = cov[~np.eye(5, dtype=bool)]
    assert abs(corr_off.mean() - 0.95) < 1e-10
    assert np.linalg.eigvalsh(cov).min() > -1e-10


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(structure="XX", dim=3),
        dict(structure="AR1", dim=0),
        dict(structure="AR1", dim=3, rho=1.0),
        dict(structure="AR1", dim=3, rho=-0.1),
        dict(structure="AR1", dim=3, sigma=0.0),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        CovarianceSpec(**kwargs)


def test_law_validation():
    with pytest.raises(ValueError):
        ErrorLaw("Cauchy")
    with pytest.raises(ValueError):
        ErrorLaw("StudentT", df=2.0)
    ErrorLaw("StudentT", df=2.5)


def test_sampling_matches_target_covariance():
    cov = build_covariance(CovarianceSpec("AR1", 3, rho=0.6, sigma=1.5))
    draws = sample_correlated(cov, ErrorLaw("Normal"), 40000, np.random.default_rng(0))
    sample_cov = draws.T @ draws / draws.shape[0]
    assert np.abs(sample_cov - cov).max() < 0.06


@pytest.mark.parametrize("law", [ErrorLaw("Normal"), ErrorLaw("StudentT", df=8.0), ErrorLaw("Laplace")])
def test_all_laws_are_variance_matched(law):
    cov = np.array([[4.0]])
    draws = sample_correlated(cov, law, 60000, np.random.default_rng(1)).ravel()
    assert abs(draws.mean()) < 0.05
    assert abs(draws.var() - 4.0) < 0.2


@pytest.mark.parametrize("law", [ErrorLaw("StudentT", df=8.0), ErrorLaw("Laplace")])
def test_mixture_laws_have_heavy_tails(law):
    draws = sample_correlated(np.eye(1), law, 60000, np.random.default_rng(2)).ravel()
    excess = np.mean(draws**4) / np.mean(draws**2) ** 2 - 3.0
    assert excess > 0.5, f"{law.kind} excess kurtosis {excess:.2f}"


def test_draws_reproducible_from_seed():
    cov = build_covariance(CovarianceSpec("CS", 4, rho=0.2, sigma=1.0))
    a = sample_correlated(cov, ErrorLaw("Laplace"), 50, 7)
    b = sample_correlated(cov, ErrorLaw("Laplace"), 50, 7)
    assert np.array_equal(a, b)
    assert a.shape == (50, 4)


def test_non_psd_input_rejected():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        sample_correlated(bad, ErrorLaw("Normal"), 5, 0)


def test_zero_draws_allowed():
    out = sample_correlated(np.eye(2), ErrorLaw("Normal"), 0, 0)
    assert out.shape == (0, 2)
