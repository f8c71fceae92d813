"""Registry of the twelve benchmark design problems.

Every problem supplies a vectorized *factor* function ``F(X, theta)`` with
shape ``(N, r, p)`` such that the unit information at ``X[n]`` is
``sum_k outer(F[n, k], F[n, k])``. Regression models have ``r = 1`` and the
factor is the mean gradient; the GLMs scale ``h(x) = [1, x]`` by the square
root of their Fisher weight, and the multinomial logit uses the Cholesky
factor of ``diag(pi) - pi pi^T`` so ``r = 2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, log_ndtr, logsumexp
from scipy.stats import norm

from optdesign.design import DesignSpace

log = logging.getLogger(__name__)

KINDS = (
    "nonlinear-regression",
    "linear-regression",
    "probit",
    "logistic",
    "gamma",
    "multinomial-logit",
)
REGRESSION_KINDS = ("nonlinear-regression", "linear-regression")
PROBIT_UNDERFLOW = 1e-300


class ProblemNotFound(KeyError):
    pass


class UnsupportedKind(TypeError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    id: int
    name: str
    kind: str
    space: DesignSpace
    p: int
    n_supp: int
    theta: Optional[np.ndarray]
    factor_fn: Callable = field(repr=False)
    gradient_fn: Optional[Callable] = field(default=None, repr=False)

    @property
    def n_factors(self) -> int:
        return self.space.n_factors

    @property
    def encoded_dim(self) -> int:
        return self.n_supp * (self.n_factors + 1)

    def factors(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.n_factors)
        return self.factor_fn(X, self.theta)

    def with_overrides(self, theta=None, lower=None, upper=None) -> ProblemSpec:
        """Copy of this problem with a different nominal theta and/or bounds."""
        changes = {}
        if theta is not None:
            theta = np.asarray(theta, dtype=float).ravel()
            if self.theta is not None and theta.size != self.theta.size:
                raise ValueError(
                    f"problem {self.id} expects {self.theta.size} parameters, got {theta.size}"
                )
            changes["theta"] = theta
        if lower is not None or upper is not None:
            changes["space"] = DesignSpace(
                self.space.lower if lower is None else lower,
                self.space.upper if upper is None else upper,
            )
            if changes["space"].n_factors != self.n_factors:
                raise ValueError("bound overrides must keep the number of factors")
        return replace(self, **changes)


def _regression(grad):
    def factors(X, theta):
        return grad(X, theta)[:, None, :]

    return factors


# -- mean gradients ---------------------------------------------------------


def _grad_double_exp_decay(X, theta):
    t1, t2, t3, t4 = theta
    x = X[:, 0]
    e2, e4 = np.exp(-t2 * x), np.exp(-t4 * x)
    return np.column_stack([e2, -t1 * x * e2, e4, -t3 * x * e4])


def _grad_quadratic_interaction(X, theta=None):
    x1, x2 = X[:, 0], X[:, 1]
    return np.column_stack([np.ones_like(x1), x1, x1**2, x2, x1 * x2])


def _grad_double_exp_growth(X, theta):
    t1, t2, t3, t4 = theta
    x = X[:, 0]
    e2, e4 = np.exp(t2 * x), np.exp(t4 * x)
    return np.column_stack([e2, t1 * x * e2, e4, t3 * x * e4])


def _grad_dehydrogenation(X, theta):
    t1, t2, t3 = theta
    x1, x2 = X[:, 0], X[:, 1]
    den = 1.0 + t1 * x1 + t2 * x2
    return np.column_stack(
        [
            t3 * x1 * (1.0 + t2 * x2) / den**2,
            -t1 * t3 * x1 * x2 / den**2,
            t1 * x1 / den,
        ]
    )


def _grad_michaelis_menten(X, theta):
    t1, t2 = theta
    x = X[:, 0]
    return np.column_stack([x / (t2 + x), -t1 * x / (t2 + x) ** 2])


def _grad_mixed_inhibition(X, theta):
    t1, t2, t3, t4 = theta
    x1, x2 = X[:, 0], X[:, 1]
    den = (1.0 + x2 / t3) * t2 + (1.0 + x2 / t4) * x1
    num = t1 * x1
    return np.column_stack(
        [
            x1 / den,
            -num * (1.0 + x2 / t3) / den**2,
            num * t2 * x2 / (t3**2 * den**2),
            num * x1 * x2 / (t4**2 * den**2),
        ]
    )


def _grad_inverse_interaction(X, theta=None):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return np.column_stack(
        [x1, x2, x3, x1 * x2, x1 * x3, x2 * x3, 1.0 / x1, 1.0 / x2, 1.0 / x3]
    )


# -- GLM factors ------------------------------------------------------------


def _with_intercept(X):
    return np.column_stack([np.ones(X.shape[0]), X])


def probit_weight(eta):
    """Fisher weight phi^2 / (Phi (1 - Phi)) and a mask of underflowed entries."""
    eta = np.asarray(eta, dtype=float)
    log_cdf = log_ndtr(eta)
    log_sf = log_ndtr(-eta)
    underflow = (np.exp(log_cdf) < PROBIT_UNDERFLOW) | (np.exp(log_sf) < PROBIT_UNDERFLOW)
    w = np.exp(2.0 * norm.logpdf(eta) - log_cdf - log_sf)
    return np.where(underflow, 0.0, w), underflow


def _probit_factors(X, theta):
    h = _with_intercept(X)
    w, _ = probit_weight(h @ theta)
    return (np.sqrt(w)[:, None] * h)[:, None, :]


def _logistic_factors(X, theta):
    h = _with_intercept(X)
    mu = expit(h @ theta)
    return (np.sqrt(mu * (1.0 - mu))[:, None] * h)[:, None, :]


def _gamma_inner(X, theta):
    """Linear predictor g and its gradient for the gamma model (shape 1, mean g^2)."""
    grad = np.column_stack(
        [X[:, 0], X[:, 0] * X[:, 1], X[:, 1] * X[:, 2], X[:, 2] * X[:, 3], X[:, 3] * X[:, 4]]
    )
    return grad @ theta, grad


def _gamma_factors(X, theta):
    g, grad = _gamma_inner(X, theta)
    scale = np.divide(2.0, g, out=np.zeros_like(g), where=g != 0.0)
    return (scale[:, None] * grad)[:, None, :]


def multinomial_probabilities(X, theta):
    """Category probabilities (pi_1, pi_2) against the reference category."""
    h = _with_intercept(X)
    q = h.shape[1]
    eta = np.column_stack([h @ theta[:q], h @ theta[q:]])
    lse = logsumexp(np.column_stack([np.zeros(len(h)), eta]), axis=1)
    return np.exp(eta - lse[:, None])


def _multinomial_factors(X, theta):
    h = _with_intercept(X)
    pi = multinomial_probabilities(X, theta)
    p1, p2 = pi[:, 0], pi[:, 1]
    p0 = np.clip(1.0 - p1 - p2, 0.0, None)
    # Cholesky of [[p1(1-p1), -p1 p2], [-p1 p2, p2(1-p2)]]
    c11 = np.sqrt(p1 * (1.0 - p1))
    c21 = -p2 * np.sqrt(np.divide(p1, 1.0 - p1, out=np.zeros_like(p1), where=p1 < 1.0))
    c22 = np.sqrt(np.divide(p2 * p0, 1.0 - p1, out=np.zeros_like(p1), where=p1 < 1.0))
    zeros = np.zeros_like(h)
    first = np.concatenate([c11[:, None] * h, c21[:, None] * h], axis=1)
    second = np.concatenate([zeros, c22[:, None] * h], axis=1)
    return np.stack([first, second], axis=1)


# -- registry ---------------------------------------------------------------


def _space(lower, upper, n=1):
    return DesignSpace(np.full(n, lower, dtype=float), np.full(n, upper, dtype=float))


def _theta(*values):
    return np.array(values, dtype=float)


def _build_registry():
    glm_theta = _theta(0.5, 0.7, 0.18, -0.20, -0.58, 0.51)
    entries = [
        ProblemSpec(1, "double exponential decay", "nonlinear-regression", _space(0, 3), 4, 6,
                    _theta(1, 1, 1, 2), _regression(_grad_double_exp_decay), _grad_double_exp_decay),
        ProblemSpec(2, "quadratic with interaction", "linear-regression",
                    DesignSpace([-1.0, 0.0], [1.0, 1.0]), 5, 10, None,
                    _regression(_grad_quadratic_interaction), _grad_quadratic_interaction),
        ProblemSpec(3, "multinomial logit, 3 factors", "multinomial-logit", _space(0, 6, 3), 8, 15,
                    _theta(1, 1, -1, 2, -1, 2, 1, -1), _multinomial_factors),
        ProblemSpec(4, "double exponential growth", "nonlinear-regression", _space(0, 1), 4, 8,
                    _theta(1, 0.5, 1, 1), _regression(_grad_double_exp_growth), _grad_double_exp_growth),
        ProblemSpec(5, "catalytic dehydrogenation kinetics", "nonlinear-regression", _space(0, 3, 2),
                    3, 10, _theta(2.9, 12.2, 0.69), _regression(_grad_dehydrogenation),
                    _grad_dehydrogenation),
        ProblemSpec(6, "Michaelis-Menten", "nonlinear-regression", _space(0, 5), 2, 5,
                    _theta(1, 1), _regression(_grad_michaelis_menten), _grad_michaelis_menten),
        ProblemSpec(7, "mixed-type inhibition", "nonlinear-regression",
                    DesignSpace([0.0, 0.0], [30.0, 60.0]), 4, 5, _theta(1, 4, 2, 4),
                    _regression(_grad_mixed_inhibition), _grad_mixed_inhibition),
        ProblemSpec(8, "linear with interactions and inverse terms", "linear-regression",
                    _space(0.5, 2, 3), 9, 20, None, _regression(_grad_inverse_interaction),
                    _grad_inverse_interaction),
        ProblemSpec(9, "probit regression", "probit", _space(-2, 2, 5), 6, 25, glm_theta,
                    _probit_factors),
        ProblemSpec(10, "logistic regression", "logistic", _space(-2, 2, 5), 6, 25,
                    glm_theta.copy(), _logistic_factors),
        ProblemSpec(11, "gamma regression", "gamma", _space(0, 10, 5), 5, 25,
                    _theta(0.25, 0.5, 0.20, 0.58, 0.51), _gamma_factors),
        ProblemSpec(12, "multinomial logit, 10 factors", "multinomial-logit", _space(0, 3, 10), 22, 17,
                    _theta(1, 1, -1, 2, -2, 1, 0.5, -0.25, 0.5, -0.75, 2,
                           -1, 2, 1, -1, -1, -1, -0.5, 1, 0.75, 0.25, -2),
                    _multinomial_factors),
    ]
    for spec in entries:
        if spec.theta is not None:
            spec.theta.setflags(write=False)
    return {spec.id: spec for spec in entries}


PROBLEMS = _build_registry()


def get_problem(problem_id: int) -> ProblemSpec:
    try:
        return PROBLEMS[int(problem_id)]
    except (KeyError, ValueError, TypeError):
        raise ProblemNotFound(f"no design problem with id {problem_id!r} (known: 1-12)") from None


def mean_gradient(problem: ProblemSpec, x) -> np.ndarray:
    """Gradient of the mean response in theta at the nominal values."""
    if problem.kind not in REGRESSION_KINDS:
        raise UnsupportedKind(f"problem {problem.id} is a {problem.kind} model; no mean gradient")
    X = np.asarray(x, dtype=float).reshape(1, problem.n_factors)
    return problem.gradient_fn(X, problem.theta)[0]


def unit_information(problem: ProblemSpec, x) -> np.ndarray:
    """Single-observation Fisher information M(x, theta)."""
    X = np.asarray(x, dtype=float).reshape(1, problem.n_factors)
    if problem.kind == "probit":
        _, underflow = probit_weight(_with_intercept(X) @ problem.theta)
        if underflow[0]:
            log.warning("probit weight underflow at x=%s; weight clamped to 0", X[0].tolist())
    F = problem.factor_fn(X, problem.theta)[0]
    return F.T @ F
