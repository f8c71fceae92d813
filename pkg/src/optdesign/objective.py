"""Batch objective: repair a population, then score every individual."""

from __future__ import annotations

import numpy as np

from optdesign import kernels
from optdesign.criteria import CriterionKind
from optdesign.encoding import Encoding, RepairConfig, decode, repair


class DesignObjective:
    """Criterion value of encoded designs for one problem.

    Calling the objective on a population ``(n, dim)`` returns the repaired
    population and its criterion values; ``nfev`` counts evaluations.
    """

    def __init__(self, problem, criterion, repair_cfg: RepairConfig | None = None):
        self.problem = problem
        self.criterion = CriterionKind.parse(criterion)
        self.encoding = Encoding.for_problem(problem)
        self.repair_cfg = repair_cfg or RepairConfig.default_for(problem.space)
        self.lower, self.upper = self.encoding.bounds(problem.space)
        self.nfev = 0

    @property
    def dim(self) -> int:
        return self.encoding.dim

    def repair(self, pop) -> np.ndarray:
        return repair(pop, self.encoding, self.problem.space, self.repair_cfg)

    def evaluate(self, pop) -> np.ndarray:
        """Criterion values of already-repaired individuals."""
        pop = np.asarray(pop, dtype=float).reshape(-1, self.dim)
        n = pop.shape[0]
        enc = self.encoding
        block = pop.reshape(n, enc.n_supp, enc.n_factors + 1)
        X = block[:, :, :-1].reshape(-1, enc.n_factors)
        w = block[:, :, -1]
        F = self.problem.factors(X)
        r, p = F.shape[1], F.shape[2]
        F = np.ascontiguousarray(F.reshape(n, enc.n_supp * r, p))
        W = np.ascontiguousarray(np.repeat(w, r, axis=1))
        self.nfev += n
        return kernels.criterion_batch(F, W, self.criterion is CriterionKind.A)

    def __call__(self, pop):
        repaired = self.repair(pop)
        return repaired, self.evaluate(repaired)

    def design(self, vector):
        return decode(vector, self.encoding)
