"""Check-loss solver against brute-force enumeration and invariances."""

import numpy as np
import pytest
from reference import vertex_quantile_fit

from fqme.quantreg import QuantileFit, SingularDesign, check_loss, fit_quantile


def _random_instance(rng):
    n = int(rng.integers(5, 31))
    p = int(rng.integers(1, 4))
    X = rng.standard_normal((n, p))
    X[:, 0] = 1.0
    y = X @ rng.standard_normal(p) + rng.standard_normal(n)
    tau = float(rng.choice([0.1, 0.25, 0.5, 0.75, 0.9]))
    return X, y, tau


def test_check_loss_values():
    assert check_loss(np.array([1.0, -1.0]), 0.3) == 1.0
    assert check_loss(np.array([2.0]), 0.75) == 1.5
    assert check_loss(np.array([-2.0]), 0.75) == 0.5
    assert check_loss(np.zeros(4), 0.5) == 0.0
    with pytest.raises(ValueError):
        check_loss(np.ones(2), 1.0)


def test_median_of_three_points():
    X = np.ones((3, 1))
    fit = fit_quantile(X, np.array([1.0, 2.0, 9.0]), 0.5)
    assert isinstance(fit, QuantileFit)
    assert fit.status == "Optimal"
    assert abs(fit.coefficients[0] - 2.0) < 1e-6
    assert abs(fit.objective - 4.0) < 1e-8


def test_matches_enumeration_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        X, y, tau = _random_instance(rng)
        fit = fit_quantile(X, y, tau)
        oracle_obj, _ = vertex_quantile_fit(X, y, tau)
        assert fit.objective <= oracle_obj * (1.0 + 1e-8) + 1e-12
        assert fit.objective >= oracle_obj * (1.0 - 1e-8) - 1e-12


def test_weighted_matches_enumeration_oracle():
    rng = np.random.default_rng(12)
    for _ in range(25):
        X, y, tau = _random_instance(rng)
        w = rng.uniform(0.1, 3.0, X.shape[0])
        w[rng.integers(0, w.size)] = 0.0
        fit = fit_quantile(X, y, tau, weights=w)
        keep = w > 0
        oracle_obj, _ = vertex_quantile_fit(X[keep], y[keep], tau, weights=w[keep])
        assert abs(fit.objective - oracle_obj) <= 1e-8 * (1.0 + oracle_obj)


def test_location_and_scale_equivariance():
    rng = np.random.default_rng(13)
    X = np.hstack([np.ones((60, 1)), rng.standard_normal((60, 2))])
    y = X @ np.array([1.0, -0.5, 2.0]) + rng.standard_normal(60)
    base = fit_quantile(X, y, 0.3)
    delta = np.array([0.7, -1.1, 0.4])
    shifted = fit_quantile(X, y + X @ delta, 0.3)
    assert np.abs(shifted.coefficients - base.coefficients - delta).max() < 1e-5
    assert abs(shifted.objective - base.objective) < 1e-7 * (1.0 + base.objective)
    scaled = fit_quantile(X, 3.0 * y, 0.3)
    assert np.abs(scaled.coefficients - 3.0 * base.coefficients).max() < 1e-4
    assert abs(scaled.objective - 3.0 * base.objective) < 1e-6 * (1.0 + base.objective)


def test_local_perturbations_do_not_improve():
    rng = np.random.default_rng(14)
    X = np.hstack([np.ones((50, 1)), rng.standard_normal((50, 2))])
    y = rng.standard_normal(50)
    w = rng.uniform(0.5, 2.0, 50)
    fit = fit_quantile(X, y, 0.7, weights=w)

    def loss(beta):
        r = y - X @ beta
        return float(np.sum(w * r * (0.7 - (r < 0))))

    best = loss(fit.coefficients)
    for _ in range(30):
        direction = rng.standard_normal(3)
        trial = loss(fit.coefficients + 1e-4 * direction)
        assert best <= trial + 1e-9


def test_zero_weight_rows_are_inert():
    rng = np.random.default_rng(15)
    X = np.hstack([np.ones((30, 1)), rng.standard_normal((30, 1))])
    y = rng.standard_normal(30)
    X_aug = np.vstack([X, [[1.0, 50.0], [1.0, -50.0]]])
    y_aug = np.r_[y, 1e6, -1e6]
    w_aug = np.r_[np.ones(30), 0.0, 0.0]
    plain = fit_quantile(X, y, 0.4)
    masked = fit_quantile(X_aug, y_aug, 0.4, weights=w_aug)
    assert abs(plain.objective - masked.objective) < 1e-9
    assert np.abs(plain.coefficients - masked.coefficients).max() < 1e-6


def test_weight_scaling_leaves_coefficients():
    rng = np.random.default_rng(16)
    X = np.hstack([np.ones((40, 1)), rng.standard_normal((40, 1))])
    y = rng.standard_normal(40)
    w = rng.uniform(0.2, 2.0, 40)
    a = fit_quantile(X, y, 0.6, weights=w)
    b = fit_quantile(X, y, 0.6, weights=5.0 * w)
    assert abs(b.objective - 5.0 * a.objective) < 1e-7 * (1.0 + a.objective)
    assert np.abs(a.coefficients - b.coefficients).max() < 1e-5


def test_intercept_quantiles_monotone_in_tau():
    rng = np.random.default_rng(17)
    y = rng.standard_normal(200)
    X = np.ones((200, 1))
    fitted = [fit_quantile(X, y, t).coefficients[0] for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(b - a > -1e-8 for a, b in zip(fitted, fitted[1:]))


def test_singular_design_rejected():
    X = np.ones((10, 2))
    X[:, 1] = 2.0
    with pytest.raises(SingularDesign) as info:
        fit_quantile(X, np.arange(10.0), 0.5)
    assert info.value.columns
    with pytest.raises(SingularDesign):
        fit_quantile(np.ones((1, 2)), np.ones(1), 0.5)


def test_input_validation():
    X = np.ones((5, 1))
    y = np.zeros(5)
    with pytest.raises(ValueError):
        fit_quantile(X, y, 0.0)
    with pytest.raises(ValueError):
        fit_quantile(X, np.zeros(4), 0.5)
    with pytest.raises(ValueError):
        fit_quantile(X, y, 0.5, weights=np.ones(4))
    with pytest.raises(ValueError):
        fit_quantile(X, y, 0.5, weights=-np.ones(5))


def test_tall_problem_stays_fast_and_accurate():
    rng = np.random.default_rng(18)
    X = np.hstack([np.ones((4000, 1)), rng.standard_normal((4000, 8))])
    y = X @ rng.standard_normal(9) + rng.standard_normal(4000)
    fit = fit_quantile(X, y, 0.5)
    assert fit.status == "Optimal"
    r = y - X @ fit.coefficients
    # roughly tau*n residuals below zero at the optimum
    assert abs((r < 0).mean() - 0.5) < 0.02
