"""Multi-run experiments, summary statistics and Wilcoxon rank-sum comparisons."""

from __future__ import annotations

import hashlib
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, rankdata

from optdesign.criteria import CriterionKind
from optdesign.encoding import RepairConfig
from optdesign.engines import EngineConfig, RunRecord, Variant, run
from optdesign.models import get_problem
from optdesign.objective import DesignObjective

log = logging.getLogger(__name__)

SMALL_PROBLEM_FES = 10_000
LARGE_PROBLEM_FES = 500_000


def default_max_fes(problem_id: int) -> int:
    """Evaluation budget used for each problem: 1e4 for Problems 1-7, 5e5 beyond."""
    return SMALL_PROBLEM_FES if problem_id <= 7 else LARGE_PROBLEM_FES


class PlanError(ValueError):
    pass


class StructuralError(KeyError):
    """A comparison refers to a (problem, variant) cell that was never run."""


@dataclass(frozen=True)
class ExperimentPlan:
    problem_ids: tuple
    criterion: CriterionKind | str
    variants: tuple
    runs: int = 25
    max_fes: dict = field(default_factory=dict)
    base_seed: int = 0
    engine_options: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "criterion", CriterionKind.parse(self.criterion))
        object.__setattr__(self, "problem_ids", tuple(int(p) for p in self.problem_ids))
        object.__setattr__(self, "variants", tuple(Variant.parse(v) for v in self.variants))
        if self.runs < 1:
            raise PlanError("runs must be at least 1")
        if not self.problem_ids or not self.variants:
            raise PlanError("a plan needs at least one problem and one variant")
        for pid in self.problem_ids:
            get_problem(pid)

    def fes_for(self, problem_id: int) -> int:
        return int(self.max_fes.get(problem_id, default_max_fes(problem_id)))


@dataclass(frozen=True)
class SummaryRow:
    best: float
    median: float
    worst: float
    mean: float
    std: float
    mean_time: float
    n_runs: int = 0
    partial: bool = False

    @classmethod
    def from_runs(cls, records, expected=None) -> SummaryRow:
        """Statistics of the final best values (sample std, zero for a single run)."""
        finals = np.array([r.best_value for r in records], dtype=float)
        n = finals.size
        partial = expected is not None and n < expected
        if n == 0:
            nan = float("nan")
            return cls(nan, nan, nan, nan, nan, nan, 0, True)
        return cls(
            best=float(finals.min()),
            median=float(np.median(finals)),
            worst=float(finals.max()),
            mean=float(finals.mean()),
            std=float(finals.std(ddof=1)) if n > 1 else 0.0,
            mean_time=float(np.mean([r.elapsed for r in records])),
            n_runs=n,
            partial=partial,
        )


@dataclass(frozen=True)
class ComparisonCell:
    """Wilcoxon outcomes of a target variant against another, across problems."""

    losses: int = 0
    wins: int = 0
    ties: int = 0

    @property
    def n(self) -> int:
        return self.losses + self.wins + self.ties

    def __str__(self):
        return f"[{self.losses}/{self.wins}/{self.ties}]"


def run_seed(base_seed: int, problem_id: int, variant, run_index: int) -> int:
    """Per-run seed: ``base_seed`` XOR a 64-bit hash of the cell and run index."""
    key = f"{int(problem_id)}:{Variant.parse(variant).value}:{int(run_index)}".encode()
    h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    return (int(base_seed) ^ h) & (2**64 - 1)


def run_single(problem_id, criterion, variant, max_fes, seed, options=None) -> RunRecord:
    """One seeded run; module-level so it can be shipped to worker processes."""
    options = dict(options or {})
    repair_keys = {k: options.pop(k) for k in ("merge_eps", "min_weight") if k in options}
    problem = get_problem(problem_id)
    cfg = RepairConfig.default_for(problem.space, **repair_keys)
    objective = DesignObjective(problem, criterion, cfg)
    return run(objective, EngineConfig(variant=variant, max_fes=max_fes, seed=seed, **options))


def worker_count(n_tasks: int) -> int:
    """Pool size: ``OED_THREADS`` when set, else the CPU count, never above the task count."""
    env = os.environ.get("OED_THREADS")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise PlanError(f"OED_THREADS must be an integer, got {env!r}") from None
    return max(1, min(cap, n_tasks))


def run_experiment(plan: ExperimentPlan, workers: int | None = None):
    """Run every (problem, variant) cell of ``plan``.

    Returns a dict mapping ``(problem_id, variant_name)`` to
    ``(SummaryRow, [RunRecord, ...])`` with runs in run-index order. If the
    experiment is interrupted the cells are returned with the runs completed
    so far and ``SummaryRow.partial`` set.
    """
    tasks = [
        (pid, v, i)
        for pid in plan.problem_ids
        for v in plan.variants
        for i in range(plan.runs)
    ]
    done: dict = {}

    def submit_args(pid, v, i):
        seed = run_seed(plan.base_seed, pid, v, i)
        return (pid, plan.criterion, v, plan.fes_for(pid), seed, plan.engine_options)

    n_workers = workers if workers is not None else worker_count(len(tasks))
    try:
        if n_workers <= 1:
            for t in tasks:
                done[t] = run_single(*submit_args(*t))
        else:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                futures = {pool.submit(run_single, *submit_args(*t)): t for t in tasks}
                try:
                    for fut in as_completed(futures):
                        done[futures[fut]] = fut.result()
                except KeyboardInterrupt:
                    for fut in futures:
                        fut.cancel()
                    raise
    except KeyboardInterrupt:
        log.warning("experiment interrupted after %d of %d runs", len(done), len(tasks))

    results = {}
    for pid in plan.problem_ids:
        for v in plan.variants:
            records = [done[(pid, v, i)] for i in range(plan.runs) if (pid, v, i) in done]
            results[(pid, v.value)] = (SummaryRow.from_runs(records, plan.runs), records)
    return results


def rank_sum_statistic(a, b):
    """Mann-Whitney U of ``a``, its null mean and tie-corrected variance."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    n1, n2 = a.size, b.size
    n = n1 + n2
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = np.sum(counts**3 - counts) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    return float(u), n1 * n2 / 2.0, float(var)


def rank_sum_pvalue(a, b) -> float:
    """Two-sided p-value (normal approximation with continuity correction)."""
    u, mean, var = rank_sum_statistic(a, b)
    if var <= 0:
        return 1.0
    z = max(abs(u - mean) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))


def wilcoxon_rank_sum(a, b, alpha: float = 0.05) -> str:
    """Compare two samples of minimized values.

    Returns ``"minus"`` when ``b`` is significantly lower (``b`` better),
    ``"plus"`` when it is significantly higher and ``"equal"`` otherwise.
    """
    u, mean, var = rank_sum_statistic(a, b)
    if var <= 0 or rank_sum_pvalue(a, b) >= alpha:
        return "equal"
    return "minus" if u > mean else "plus"


def _finals(results, problem_id, variant):
    key = (problem_id, Variant.parse(variant).value)
    if key not in results:
        raise StructuralError(f"no results for problem {problem_id}, variant {key[1]}")
    _, records = results[key]
    if not records:
        raise StructuralError(f"cell problem {problem_id}, variant {key[1]} has no runs")
    return [r.best_value for r in records]


def aggregate_comparison(results, target, other, alpha: float = 0.05) -> ComparisonCell:
    """Count per-problem Wilcoxon outcomes of ``target`` against ``other``.

    A problem where ``other`` is significantly better is a loss for the target.
    """
    problems = sorted({pid for pid, _ in results})
    losses = wins = ties = 0
    for pid in problems:
        outcome = wilcoxon_rank_sum(
            _finals(results, pid, target), _finals(results, pid, other), alpha
        )
        if outcome == "minus":
            losses += 1
        elif outcome == "plus":
            wins += 1
        else:
            ties += 1
    return ComparisonCell(losses, wins, ties)


def comparison_matrix(results, variants, alpha: float = 0.05) -> dict:
    """``{(target, other): ComparisonCell}`` over every ordered pair of ``variants``."""
    names = [Variant.parse(v).value for v in variants]
    return {(t, o): aggregate_comparison(results, t, o, alpha) for t in names for o in names}
