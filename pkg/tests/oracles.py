"""Independent reference computations used by the tests.

Nothing here imports the model or criterion code under test: mean responses
and log-likelihoods are transcribed directly from the model table and
differentiated numerically.
"""

import itertools
import math

import numpy as np
from scipy.special import expit, log_ndtr

# mean responses eta(x, theta) of the regression problems
ETA = {
    1: lambda x, t: t[0] * np.exp(-t[1] * x[0]) + t[2] * np.exp(-t[3] * x[0]),
    2: lambda x, t: t[0] + t[1] * x[0] + t[2] * x[0] ** 2 + t[3] * x[1] + t[4] * x[0] * x[1],
    4: lambda x, t: t[0] * np.exp(t[1] * x[0]) + t[2] * np.exp(t[3] * x[0]),
    5: lambda x, t: t[0] * t[2] * x[0] / (1 + t[0] * x[0] + t[1] * x[1]),
    6: lambda x, t: t[0] * x[0] / (t[1] + x[0]),
    7: lambda x, t: t[0] * x[0] / ((1 + x[1] / t[2]) * t[1] + (1 + x[1] / t[3]) * x[0]),
    8: lambda x, t: (
        t[0] * x[0] + t[1] * x[1] + t[2] * x[2] + t[3] * x[0] * x[1] + t[4] * x[0] * x[2]
        + t[5] * x[1] * x[2] + t[6] / x[0] + t[7] / x[1] + t[8] / x[2]
    ),
}

# the linear models have no nominal theta; their gradients do not depend on it
LINEAR_THETA = {
    2: [1.0, -0.5, 2.0, 0.3, 1.1],
    8: [0.3, -1.2, 0.7, 1.5, 0.2, -0.4, 0.9, 1.3, -0.8],
}


def fd_gradient(fn, x, theta):
    """Central differences of ``fn(x, theta)`` in theta, step 1e-6 (1 + |theta_j|)."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for j in range(theta.size):
        h = 1e-6 * (1 + abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        g[j] = (fn(x, up) - fn(x, down)) / (2 * h)
    return g


def _second_difference(fn, theta, h):
    n = theta.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            def at(si, sj):
                t = theta.copy()
                t[i] += si * h[i]
                t[j] += sj * h[j]
                return fn(t)
            H[i, j] = H[j, i] = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h[i] * h[j])
    return H


def fd_hessian(fn, theta, step=2e-3):
    """Central second differences of a scalar function of theta, Richardson-extrapolated."""
    theta = np.asarray(theta, dtype=float)
    h = step * (1 + np.abs(theta))
    coarse = _second_difference(fn, theta, h)
    fine = _second_difference(fn, theta, h / 2)
    return (4 * fine - coarse) / 3


def _h(x):
    return np.concatenate([[1.0], np.asarray(x, dtype=float)])


def _binary_mean(kind, x, t):
    eta = _h(x) @ t
    if kind == "probit":
        return math.exp(log_ndtr(eta)), math.exp(log_ndtr(-eta))
    return expit(eta), expit(-eta)


def _gamma_mean(x, t):
    g = t[0] * x[0] + sum(x[i - 1] * x[i] * t[i] for i in range(1, 5))
    return g * g


def _multinomial_probs(x, t):
    h = _h(x)
    q = h.size
    e1, e2 = math.exp(h @ t[:q]), math.exp(h @ t[q:])
    den = 1 + e1 + e2
    return np.array([1 / den, e1 / den, e2 / den])


def expected_negative_loglik(problem_id, kind, x, theta0):
    """``theta -> -E_{theta0}[log-likelihood(theta)]`` for one observation at ``x``."""
    theta0 = np.asarray(theta0, dtype=float)
    if kind in ("probit", "logistic"):
        p1, p0 = _binary_mean(kind, x, theta0)

        def f(t):
            m1, m0 = _binary_mean(kind, x, t)
            return -(p1 * math.log(m1) + p0 * math.log(m0))
        return f
    if kind == "gamma":
        mu0 = _gamma_mean(x, theta0)

        def f(t):
            mu = _gamma_mean(x, t)
            # shape-1 gamma: log f(y) = -log mu - y / mu; the expectation sets y = mu0
            return math.log(mu) + mu0 / mu
        return f
    if kind == "multinomial-logit":
        pi0 = _multinomial_probs(x, theta0)

        def f(t):
            return -float(pi0 @ np.log(_multinomial_probs(x, t)))
        return f
    raise ValueError(kind)


def glm_information_oracle(problem_id, kind, x, theta0):
    return fd_hessian(expected_negative_loglik(problem_id, kind, x, theta0), theta0)


def exact_rank_sum_pvalue(a, b):
    """Two-sided permutation p-value of the rank-sum statistic (ties via midranks)."""
    from scipy.stats import rankdata

    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    n1 = len(a)
    total = ranks.sum()
    mean = n1 * total / len(pooled)
    observed = abs(ranks[:n1].sum() - mean)
    count = hits = 0
    for idx in itertools.combinations(range(len(pooled)), n1):
        count += 1
        if abs(ranks[list(idx)].sum() - mean) >= observed - 1e-9:
            hits += 1
    return hits / count


def exact_rank_sum_moments(a, b):
    """Mean and variance of the rank sum of ``a`` over every relabelling of the pooled sample."""
    from scipy.stats import rankdata

    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    sums = [ranks[list(idx)].sum() for idx in itertools.combinations(range(len(pooled)), len(a))]
    return float(np.mean(sums)), float(np.var(sums))


def mann_whitney_u(a, b):
    """U of ``a`` by direct pair counting (ties count one half)."""
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)


def michaelis_menten_gradient(x, t1=1.0, t2=1.0):
    return np.array([x / (t2 + x), -t1 * x / (t2 + x) ** 2])


def brute_force_two_point_d(step=0.005, lo=0.0, hi=5.0):
    """Exhaustive D-optimal two-point design for Michaelis-Menten on a grid.

    For points (x1, x2) and weights (w, 1 - w), det M = w (1 - w) det[f(x1) f(x2)]^2,
    evaluated for every grid pair and every grid weight.
    """
    xs = np.round(np.arange(lo, hi + step / 2, step), 10)
    ws = np.round(np.arange(step, 1.0, step), 10)
    F = np.array([michaelis_menten_gradient(x) for x in xs])
    cross = np.abs(np.outer(F[:, 0], F[:, 1]) - np.outer(F[:, 1], F[:, 0]))
    with np.errstate(divide="ignore"):
        pair_term = -2.0 * np.log(cross)
    best = (np.inf, None, None, None)
    for w in ws:
        total = pair_term - math.log(w * (1 - w))
        k = np.unravel_index(np.argmin(total), total.shape)
        if total[k] < best[0]:
            best = (float(total[k]), xs[k[0]], xs[k[1]], w)
    return best
