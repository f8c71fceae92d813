"""D- and A-optimality: criterion values, sensitivity functions, efficiency bounds."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from optdesign.design import Design, DesignSpace, information_matrix
from optdesign.kernels import PENALTY, PIVOT_TOL

LOG_DET_FLOOR = np.log(1e-300)


class CriterionKind(str, enum.Enum):
    D = "D"
    A = "A"

    @classmethod
    def parse(cls, value) -> CriterionKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown criterion {value!r}; expected 'D' or 'A'") from None


class SingularDesignError(np.linalg.LinAlgError):
    """The information matrix of a design is singular; it cannot be certified."""


def _cholesky(M):
    """Lower Cholesky factor, or None when a pivot falls below the relative tolerance."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        return None
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    piv = np.diag(L) ** 2
    if not np.all((piv > PIVOT_TOL * np.diag(M)) & (piv > 0.0)):
        return None
    if 2.0 * np.log(np.diag(L)).sum() <= LOG_DET_FLOOR:
        return None
    return L


def d_criterion(M) -> float:
    """``-log det M`` from the Cholesky diagonal; 1e10 when M is singular."""
    L = _cholesky(M)
    if L is None:
        return PENALTY
    return float(-2.0 * np.log(np.diag(L)).sum())


def a_criterion(M) -> float:
    """``trace(M^-1)``; 1e10 when M is singular."""
    L = _cholesky(M)
    if L is None:
        return PENALTY
    Linv = np.linalg.solve(L, np.eye(L.shape[0]))
    return float(np.sum(Linv * Linv))


def criterion_value(kind, M) -> float:
    kind = CriterionKind.parse(kind)
    return d_criterion(M) if kind is CriterionKind.D else a_criterion(M)


def _inverse(design: Design, problem):
    M = information_matrix(design, problem)
    L = _cholesky(M)
    if L is None:
        raise SingularDesignError(
            f"information matrix of the design is singular for problem {problem.id}"
        )
    return cho_solve((L, True), np.eye(M.shape[0]))


class _Sensitivity:
    """Vectorized S(x) for one design; the matrix inverse is computed once."""

    def __init__(self, kind, design: Design, problem):
        self.kind = CriterionKind.parse(kind)
        self.problem = problem
        Minv = _inverse(design, problem)
        self.trace_inv = float(np.trace(Minv))
        if self.kind is CriterionKind.D:
            self.kernel = Minv
            self.offset = float(problem.p)
        else:
            self.kernel = Minv @ Minv
            self.offset = self.trace_inv

    def __call__(self, X) -> np.ndarray:
        F = self.problem.factors(X)
        return np.einsum("nra,ab,nrb->n", F, self.kernel, F) - self.offset


def sensitivity(kind, X, design: Design, problem) -> np.ndarray:
    """Sensitivity function at each row of ``X``."""
    return _Sensitivity(kind, design, problem)(X)


def d_sensitivity(x, design: Design, problem) -> float:
    """``trace(M(x) M^-1(design)) - p``; zero at the support of a D-optimal design."""
    return float(sensitivity(CriterionKind.D, x, design, problem)[0])


def a_sensitivity(x, design: Design, problem) -> float:
    """``trace(M(x) M^-2(design)) - trace(M^-1(design))``."""
    return float(sensitivity(CriterionKind.A, x, design, problem)[0])


@dataclass(frozen=True)
class GridSpec:
    """How the sensitivity function is maximized over the design space.

    ``resolution`` is points per factor; by default 512 for one or two factors,
    otherwise 64 per factor reduced until the grid has at most ``max_samples``
    points. With three or more factors, ``restarts`` random starting points are
    polished in addition to the best grid points.
    """

    resolution: int | None = None
    max_samples: int = 2**20
    restarts: int = 50
    polish: bool = True
    seed: int = 0

    def resolution_for(self, n_factors: int) -> int:
        if self.resolution is not None:
            return int(self.resolution)
        if n_factors <= 2:
            return 512
        per_factor = int(np.floor(self.max_samples ** (1.0 / n_factors) + 1e-9))
        return max(2, min(64, per_factor))

    def points(self, space: DesignSpace) -> np.ndarray:
        res = self.resolution_for(space.n_factors)
        axes = [np.linspace(lo, hi, res) for lo, hi in zip(space.lower, space.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class CertificationReport:
    kind: CriterionKind
    max_sensitivity: float
    arg_max: np.ndarray
    efficiency_lower_bound: float
    support_sensitivities: list = field(default_factory=list)
    criterion_value: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "criterion": self.kind.value,
            "criterion_value": self.criterion_value,
            "max_sensitivity": self.max_sensitivity,
            "arg_max": np.asarray(self.arg_max).tolist(),
            "efficiency_lower_bound": self.efficiency_lower_bound,
            "support_sensitivities": [
                {"point": np.asarray(x).tolist(), "S": s} for x, s in self.support_sensitivities
            ],
        }


def _evaluate_chunked(fn, X, chunk=65536):
    return np.concatenate([fn(X[i : i + chunk]) for i in range(0, len(X), chunk)])


def _pattern_search(fn, starts, lower, upper, step, tol=1e-10, max_iter=500):
    """Coordinate-wise ascent from many starts at once, halving steps on failure."""
    x = starts.copy()
    fx = fn(x)
    step = np.broadcast_to(step, x.shape).copy()
    floor = tol * (upper - lower)
    for _ in range(max_iter):
        improved = np.zeros(len(x), dtype=bool)
        for j in range(x.shape[1]):
            for sign in (1.0, -1.0):
                cand = x.copy()
                cand[:, j] = np.clip(x[:, j] + sign * step[:, j], lower[j], upper[j])
                fc = fn(cand)
                better = fc > fx
                x[better] = cand[better]
                fx[better] = fc[better]
                improved |= better
        step[~improved] *= 0.5
        if np.all(step <= floor):
            break
    return x, fx


def efficiency_bound(kind, design: Design, problem, grid: GridSpec | None = None):
    """Certify a design: maximize its sensitivity function and bound its efficiency.

    Raises SingularDesignError when the information matrix is singular.
    """
    kind = CriterionKind.parse(kind)
    grid = grid or GridSpec()
    support = design.support()
    S = _Sensitivity(kind, support, problem)
    space = problem.space

    X = grid.points(space)
    values = _evaluate_chunked(S, X)
    support_values = S(support.points)
    candidates = [X, support.points]
    scores = [values, support_values]

    if grid.polish:
        n_best = min(len(X), 5)
        best = np.argpartition(values, -n_best)[-n_best:]
        starts = [X[best], support.points]
        if space.n_factors >= 3 and grid.restarts > 0:
            rng = np.random.default_rng(grid.seed)
            starts.append(rng.uniform(space.lower, space.upper, (grid.restarts, space.n_factors)))
        starts = np.vstack(starts)
        res = grid.resolution_for(space.n_factors)
        cell = (space.upper - space.lower) / max(res - 1, 1)
        xp, fp = _pattern_search(S, starts, space.lower, space.upper, cell)
        candidates.append(xp)
        scores.append(fp)

    X_all = np.vstack(candidates)
    S_all = np.concatenate(scores)
    k = int(np.argmax(S_all))
    max_s = float(S_all[k])

    if kind is CriterionKind.D:
        bound = float(np.exp(-max_s / problem.p))
    else:
        bound = 1.0 - max_s / S.trace_inv
    bound = float(min(1.0, max(0.0, bound)))

    M = information_matrix(support, problem)
    return CertificationReport(
        kind=kind,
        max_sensitivity=max_s,
        arg_max=X_all[k],
        efficiency_lower_bound=bound,
        support_sensitivities=[(x, float(s)) for x, s in zip(support.points, support_values)],
        criterion_value=criterion_value(kind, M),
    )
