"""Independent reference implementations used to cross-check the package.

Everything here is written from first principles with no imports from the
package under test: brute-force enumeration for quantile regression,
textbook method-of-moments formulas for the one-way random-effects model,
and loop-based estimators for replicate error covariances.
"""

import itertools

import numpy as np


def vertex_quantile_fit(X, y, tau, weights=None):
    """Exhaustive LP-vertex solution of the weighted check-loss problem.

    A minimizer of the piecewise-linear objective exists at a point where p
    residuals vanish, so enumerating every size-p subset of rows and solving
    the exact interpolation yields the global optimum.  Returns (objective,
    beta) of the best vertex.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    best_obj, best_beta = np.inf, None
    for rows in itertools.combinations(range(n), p):
        sub = X[list(rows)]
        try:
            beta = np.linalg.solve(sub, y[list(rows)])
        except np.linalg.LinAlgError:
            continue
        r = y - X @ beta
        obj = float(np.sum(w * r * (tau - (r < 0))))
        if obj < best_obj:
            best_obj, best_beta = obj, beta
    if best_beta is None:
        raise ValueError("no invertible row subset; design is degenerate")
    return best_obj, best_beta


def balanced_anova(block):
    """One-way random-intercept moments for an (n, m) balanced block.

    Returns (grand_mean, var_within, var_between, shrinkage) using the
    classical ANOVA estimators: MSW on n(m-1) degrees of freedom, MSB on
    n-1, var_between = max(0, (MSB - MSW)/m), and the shrinkage factor
    var_b / (var_b + var_w / m) of the subject-mean deviations.
    """
    block = np.asarray(block, dtype=float)
    n, m = block.shape
    grand = block.mean()
    means = block.mean(axis=1)
    ssw = 0.0
    for i in range(n):
        for j in range(m):
            ssw += (block[i, j] - means[i]) ** 2
    msw = ssw / (n * (m - 1))
    ssb = 0.0
    for i in range(n):
        ssb += (means[i] - grand) ** 2
    msb = m * ssb / (n - 1)
    var_b = max(0.0, (msb - msw) / m)
    denom = var_b + msw / m
    shrink = var_b / denom if denom > 0 else 0.0
    return grand, msw, var_b, shrink


def pooled_deviation_cov(rows):
    """Replicate-deviation covariance: sum of outer products over sum (J_i - 1).

    ``rows`` is a list of (J_i, K) arrays of replicate vectors per subject.
    """
    K = np.asarray(rows[0], dtype=float).shape[1]
    acc = np.zeros((K, K))
    dof = 0
    for r in rows:
        r = np.asarray(r, dtype=float)
        center = r.mean(axis=0)
        for j in range(r.shape[0]):
            d = r[j] - center
            acc += np.outer(d, d)
        dof += r.shape[0] - 1
    return acc / dof
