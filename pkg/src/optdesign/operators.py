"""Differential-evolution building blocks.

All operators accept either a single individual or a whole generation: index
arrays of shape ``(n, k)`` and per-individual ``f``/``cr`` vectors produce one
donor or trial per row.
"""

from __future__ import annotations

import numpy as np

# number of distinct population members (besides the target) each strategy draws
ARITY = {
    "rand1": 3,
    "rand2": 5,
    "best1": 2,
    "best2": 4,
    "current-to-pbest1": 2,
    "current-to-rand1": 3,
}


class ConfigurationError(ValueError):
    pass


def initialize_population(lower, upper, n, rng) -> np.ndarray:
    """``n`` individuals drawn uniformly inside the per-gene bounds."""
    if n < 4:
        raise ConfigurationError("population size must be at least 4")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return lower + rng.random((n, lower.size)) * (upper - lower)


def distinct_indices(n, k, rng, size=None, exclude_self=True) -> np.ndarray:
    """For each target ``i < size`` draw ``k`` distinct indices from ``range(n)``.

    The target itself is excluded when ``exclude_self`` is set.
    """
    size = n if size is None else size
    need = k + (1 if exclude_self else 0)
    if n < need:
        raise ConfigurationError(f"strategy needs {need} individuals, population has {n}")
    keys = rng.random((size, n))
    if exclude_self:
        keys[np.arange(size), np.arange(size)] = np.inf
    return np.argsort(keys, axis=1, kind="stable")[:, :k]


def _vec(f):
    f = np.asarray(f, dtype=float)
    return f[..., None] if f.ndim else f


def mutate(strategy, population, target, indices, f, best=None, pbest=None, union=None):
    """Donor vector(s) for ``strategy``.

    ``target`` is an index (or array of indices) into ``population``;
    ``indices`` holds the random partners in the order the formula uses them.
    For ``current-to-pbest1`` the second partner indexes ``union``
    (population followed by archive) when given.
    """
    pop = np.asarray(population, dtype=float)
    idx = np.asarray(indices)
    if strategy not in ARITY:
        raise ConfigurationError(f"unknown mutation strategy {strategy!r}")
    if idx.shape[-1] < ARITY[strategy] - (1 if strategy == "current-to-pbest1" else 0):
        raise ConfigurationError(f"{strategy} needs {ARITY[strategy]} partner indices")
    F = _vec(f)
    x = pop[target]
    if strategy == "current-to-pbest1":
        source = pop if union is None else np.asarray(union, dtype=float)
        return x + F * (pbest - x) + F * (pop[idx[..., 0]] - source[idx[..., 1]])
    r = [pop[idx[..., j]] for j in range(idx.shape[-1])]

    if strategy == "rand1":
        return r[0] + F * (r[1] - r[2])
    if strategy == "rand2":
        return r[0] + F * (r[1] - r[2]) + F * (r[3] - r[4])
    if strategy == "best1":
        return best + F * (r[0] - r[1])
    if strategy == "best2":
        return best + F * (r[0] - r[1]) + F * (r[2] - r[3])
    raise ConfigurationError(f"{strategy} needs an explicit coefficient; use current_to_rand")


def current_to_rand(population, target, indices, f, k) -> np.ndarray:
    """``x + k (x_r1 - x) + F (x_r2 - x_r3)`` with ``k`` uniform in [0, 1]."""
    pop = np.asarray(population, dtype=float)
    idx = np.asarray(indices)
    x = pop[target]
    r1, r2, r3 = (pop[idx[..., j]] for j in range(3))
    return x + _vec(k) * (r1 - x) + _vec(f) * (r2 - r3)


def crossover_binomial(target, donor, cr, rng) -> np.ndarray:
    """Take each gene from ``donor`` with probability ``cr``; gene ``j_rand`` always."""
    target = np.asarray(target, dtype=float)
    donor = np.asarray(donor, dtype=float)
    single = target.ndim == 1
    t = np.atleast_2d(target)
    d = np.atleast_2d(donor)
    n, dim = t.shape
    cr = np.broadcast_to(np.asarray(cr, dtype=float), (n,))
    mask = rng.random((n, dim)) < cr[:, None]
    mask[np.arange(n), rng.integers(dim, size=n)] = True
    trial = np.where(mask, d, t)
    return trial[0] if single else trial


def select(target_value, trial_value):
    """True where the trial replaces the target (ties go to the trial)."""
    return np.asarray(trial_value) <= np.asarray(target_value)


def lehmer_mean(values, weights=None) -> float:
    """Weighted Lehmer mean ``sum(w v^2) / sum(w v)``.

    Values are assumed nonnegative; if every weighted value is zero the mean is 0.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("Lehmer mean of an empty sample")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != v.shape:
        raise ValueError("values and weights differ in length")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be nonnegative with a positive sum")
    den = np.sum(w * v)
    return float(np.sum(w * v * v) / den) if den != 0 else 0.0


def weighted_mean(values, weights=None) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("mean of an empty sample")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(w * v) / np.sum(w))


def sample_f(mu, rng) -> np.ndarray:
    """Cauchy(mu, 0.1) draws, redrawn while <= 0 and truncated at 1."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    f = mu + 0.1 * rng.standard_cauchy(mu.shape)
    bad = f <= 0.0
    while np.any(bad):
        f[bad] = mu[bad] + 0.1 * rng.standard_cauchy(int(bad.sum()))
        bad = f <= 0.0
    return np.minimum(f, 1.0)


def sample_cr(mu, rng) -> np.ndarray:
    """Normal(mu, 0.1) draws clipped to [0, 1]; NaN (terminal) memories give 0."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cr = np.clip(mu + 0.1 * rng.standard_normal(mu.shape), 0.0, 1.0)
    return np.where(np.isnan(mu), 0.0, cr)
