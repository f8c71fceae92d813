"""Differential-evolution engines: classic DE, JADE, CoDE, SHADE and LSHADE.

Every engine works on flat design vectors through a :class:`DesignObjective`,
which repairs each trial before scoring it. Evaluation is batched per
generation; selection only compares values, so the result does not depend on
evaluation order.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from optdesign.operators import (
    ConfigurationError,
    crossover_binomial,
    current_to_rand,
    distinct_indices,
    initialize_population,
    lehmer_mean,
    mutate,
    sample_cr,
    sample_f,
    weighted_mean,
)


class Variant(str, enum.Enum):
    DE_RAND1 = "DE-rand1"
    DE_RAND2 = "DE-rand2"
    DE_BEST1 = "DE-best1"
    DE_BEST2 = "DE-best2"
    JADE = "JADE"
    CODE = "CoDE"
    SHADE = "SHADE"
    LSHADE = "LSHADE"

    @classmethod
    def parse(cls, value) -> Variant:
        if isinstance(value, cls):
            return value
        key = str(value).replace("_", "-").replace("/", "").lower()
        for v in cls:
            if v.value.lower() == key or v.value.lower().replace("-", "") == key.replace("-", ""):
                return v
        raise ConfigurationError(f"unknown variant {value!r}; choose from {[v.value for v in cls]}")

    @property
    def is_classic(self) -> bool:
        return self.value.startswith("DE-")


_CLASSIC_STRATEGY = {
    Variant.DE_RAND1: "rand1",
    Variant.DE_RAND2: "rand2",
    Variant.DE_BEST1: "best1",
    Variant.DE_BEST2: "best2",
}

# target plus the distinct partners its mutation strategies draw
_MIN_POPULATION = {Variant.DE_RAND2: 6, Variant.DE_BEST2: 5, Variant.CODE: 6}

# (F, CR) settings CoDE draws from for each of its three strategies
CODE_POOL = ((1.0, 0.1), (1.0, 0.9), (0.8, 0.2))


@dataclass(frozen=True)
class EngineConfig:
    """Run configuration.

    ``f`` and ``cr`` apply to the classic variants only. Adaptive-variant
    settings left as ``None`` take the variant's default: ``p_best_frac`` 0.05
    for JADE, 0.1 for SHADE and 0.11 for LSHADE; ``history_size`` equal to
    ``np_init`` for SHADE and 6 for LSHADE.

    Trials are always repaired before scoring. With ``store_repaired`` the
    repaired vector also replaces the parent; by default the population keeps
    the bound-clipped trial, so deleted or merged support points stay
    available to later mutations.
    """

    variant: Variant | str = Variant.LSHADE
    max_fes: int = 10_000
    np_init: int = 50
    f: float = 0.5
    cr: float = 0.9
    seed: int = 0
    p_best_frac: float | None = None
    c: float = 0.1
    history_size: int | None = None
    np_min: int = 4
    archive_rate: float = 1.0
    code_third_bin: bool = False
    store_repaired: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.np_init < 4:
            raise ConfigurationError("np_init must be at least 4")
        if self.max_fes < self.np_init:
            raise ConfigurationError("max_fes must be at least np_init")
        if not 0.0 < self.f <= 2.0:
            raise ConfigurationError("f must lie in (0, 2]")
        if not 0.0 <= self.cr <= 1.0:
            raise ConfigurationError("cr must lie in [0, 1]")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.p_best_frac is not None and not 0.0 < self.p_best_frac <= 1.0:
            raise ConfigurationError("p_best_frac must lie in (0, 1]")
        if not 0.0 < self.c <= 1.0:
            raise ConfigurationError("c must lie in (0, 1]")
        if self.history_size is not None and self.history_size < 1:
            raise ConfigurationError("history_size must be positive")
        if not 4 <= self.np_min <= self.np_init:
            raise ConfigurationError("np_min must lie in [4, np_init]")
        if not 0.0 <= self.archive_rate <= 1.0:
            raise ConfigurationError("archive_rate must lie in [0, 1]")
        need = _MIN_POPULATION.get(self.variant, 4)
        if self.np_init < need:
            raise ConfigurationError(f"{self.variant.value} needs a population of at least {need}")

    @property
    def variant_params(self) -> dict:
        v = self.variant
        if v is Variant.JADE:
            return {"p_best_frac": self.p_best_frac or 0.05, "c": self.c,
                    "archive_rate": self.archive_rate}
        if v is Variant.SHADE:
            return {"p_best_frac": self.p_best_frac or 0.1,
                    "history_size": self.history_size or self.np_init,
                    "archive_rate": self.archive_rate}
        if v is Variant.LSHADE:
            return {"p_best_frac": self.p_best_frac or 0.11, "history_size": self.history_size or 6,
                    "np_min": self.np_min, "archive_rate": self.archive_rate}
        if v is Variant.CODE:
            return {"third_bin": self.code_third_bin}
        return {"f": self.f, "cr": self.cr}


@dataclass
class ParamMemory:
    """Adaptive state: JADE means, SHADE/LSHADE slot memories and the archive.

    A NaN in ``m_cr`` is the terminal marker: draws from that slot use CR = 0.
    ``k`` is the zero-based slot written next.
    """

    mu_f: float = 0.5
    mu_cr: float = 0.5
    m_f: np.ndarray = field(default_factory=lambda: np.empty(0))
    m_cr: np.ndarray = field(default_factory=lambda: np.empty(0))
    k: int = 0
    archive: np.ndarray | None = None

    @classmethod
    def with_history(cls, h: int, dim: int) -> ParamMemory:
        return cls(m_f=np.full(h, 0.5), m_cr=np.full(h, 0.5), archive=np.empty((0, dim)))

    def add_to_archive(self, parents: np.ndarray):
        self.archive = np.vstack([self.archive, parents]) if len(parents) else self.archive

    def trim_archive(self, size: int, rng):
        if len(self.archive) > size:
            keep = np.sort(rng.choice(len(self.archive), size=size, replace=False))
            self.archive = self.archive[keep]


@dataclass
class RunRecord:
    best_vector: np.ndarray
    best_value: float
    history: list
    seed: int
    elapsed: float
    variant: str = ""
    fes: int = 0

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": int(self.seed),
            "best_value": float(self.best_value),
            "best_vector": np.asarray(self.best_vector).tolist(),
            "fes": int(self.fes),
            "elapsed": float(self.elapsed),
            "history": [[int(f), float(v)] for f, v in self.history],
        }


def lshade_population_size(fes: int, cfg: EngineConfig) -> int:
    """Linear reduction from ``np_init`` at 0 FES to ``np_min`` at ``max_fes``."""
    if not 0 <= fes <= cfg.max_fes:
        raise ValueError("fes must lie in [0, max_fes]")
    size = (cfg.np_min - cfg.np_init) / cfg.max_fes * fes + cfg.np_init
    return int(min(cfg.np_init, max(cfg.np_min, math.floor(size + 0.5))))


class _Tracker:
    """Counts evaluations and keeps the best individual ever evaluated."""

    def __init__(self, objective, store_repaired=False):
        self.objective = objective
        self.store_repaired = store_repaired
        self.fes = 0
        self.best_value = math.inf
        self.best_vector = None
        self.history = []

    def __call__(self, pop):
        repaired, values = self.objective(pop)
        self.fes += len(values)
        k = int(np.argmin(values))
        if values[k] < self.best_value:
            self.best_value = float(values[k])
            self.best_vector = repaired[k].copy()
        if self.store_repaired:
            return repaired, values
        return np.clip(pop, self.objective.lower, self.objective.upper), values

    def checkpoint(self):
        self.history.append((self.fes, self.best_value))


def _pbest(pop, fit, frac, rng, n):
    top = max(2, math.ceil(frac * len(pop)))
    order = np.argsort(fit, kind="stable")[:top]
    return pop[rng.choice(order, size=n)]


def _pbest_donors(pop, fit, archive, f, frac, rng):
    """current-to-pbest/1 donors with the second partner drawn from population plus archive."""
    n = len(pop)
    union = np.vstack([pop, archive]) if len(archive) else pop
    r1 = distinct_indices(n, 1, rng)[:, 0]
    # r2 from the union, distinct from the target and from r1
    keys = rng.random((n, len(union)))
    keys[np.arange(n), np.arange(n)] = np.inf
    keys[np.arange(n), r1] = np.inf
    r2 = np.argmin(keys, axis=1)
    pb = _pbest(pop, fit, frac, rng, n)
    return mutate("current-to-pbest1", pop, np.arange(n), np.column_stack([r1, r2]), f,
                  pbest=pb, union=union)


def _success_weights(delta):
    total = delta.sum()
    return delta / total if total > 0 else np.full(len(delta), 1.0 / len(delta))


class _Classic:
    def __init__(self, cfg, rng, dim):
        self.cfg, self.rng = cfg, rng
        self.strategy = _CLASSIC_STRATEGY[cfg.variant]

    def generation(self, pop, fit, evaluate, budget):
        cfg, rng = self.cfg, self.rng
        n = len(pop)
        k = min(n, budget)
        arity = {"rand1": 3, "rand2": 5, "best1": 2, "best2": 4}[self.strategy]
        idx = distinct_indices(n, arity, rng)
        best = pop[int(np.argmin(fit))]
        donors = mutate(self.strategy, pop, np.arange(n), idx, cfg.f, best=best)
        trials = crossover_binomial(pop, donors, cfg.cr, rng)[:k]
        trials, tv = evaluate(trials)
        win = tv <= fit[:k]
        pop[:k][win] = trials[win]
        fit[:k][win] = tv[win]
        return pop, fit


class _JADE:
    def __init__(self, cfg, rng, dim):
        self.cfg, self.rng = cfg, rng
        self.params = cfg.variant_params
        self.memory = ParamMemory(archive=np.empty((0, dim)))

    def generation(self, pop, fit, evaluate, budget):
        rng, mem = self.rng, self.memory
        n = len(pop)
        k = min(n, budget)
        F = sample_f(np.full(n, mem.mu_f), rng)
        CR = sample_cr(np.full(n, mem.mu_cr), rng)
        donors = _pbest_donors(pop, fit, mem.archive, F, self.params["p_best_frac"], rng)
        trials = crossover_binomial(pop, donors, CR, rng)[:k]
        trials, tv = evaluate(trials)
        win = tv <= fit[:k]
        mem.add_to_archive(pop[:k][win].copy())
        pop[:k][win] = trials[win]
        fit[:k][win] = tv[win]
        mem.trim_archive(int(round(self.params["archive_rate"] * n)), rng)
        if np.any(win):
            c = self.params["c"]
            mem.mu_cr = (1 - c) * mem.mu_cr + c * weighted_mean(CR[:k][win])
            mem.mu_f = (1 - c) * mem.mu_f + c * lehmer_mean(F[:k][win])
        return pop, fit


class _SHADE:
    """SHADE; with ``linear_reduction`` it becomes LSHADE."""

    def __init__(self, cfg, rng, dim, linear_reduction=False):
        self.cfg, self.rng = cfg, rng
        self.params = cfg.variant_params
        self.lshade = linear_reduction
        self.memory = ParamMemory.with_history(self.params["history_size"], dim)

    def generation(self, pop, fit, evaluate, budget):
        rng, mem = self.rng, self.memory
        n = len(pop)
        k = min(n, budget)
        slot = rng.integers(len(mem.m_f), size=n)
        F = sample_f(mem.m_f[slot], rng)
        CR = sample_cr(mem.m_cr[slot], rng)
        donors = _pbest_donors(pop, fit, mem.archive, F, self.params["p_best_frac"], rng)
        trials = crossover_binomial(pop, donors, CR, rng)[:k]
        trials, tv = evaluate(trials)
        win = tv <= fit[:k]
        delta = np.abs(fit[:k][win] - tv[win])
        mem.add_to_archive(pop[:k][win].copy())
        pop[:k][win] = trials[win]
        fit[:k][win] = tv[win]
        mem.trim_archive(int(round(self.params["archive_rate"] * n)), rng)
        if np.any(win):
            w = _success_weights(delta)
            s_f, s_cr = F[:k][win], CR[:k][win]
            if self.lshade:
                if np.isnan(mem.m_cr[mem.k]) or s_cr.max() == 0.0:
                    mem.m_cr[mem.k] = np.nan
                else:
                    mem.m_cr[mem.k] = lehmer_mean(s_cr, w)
            else:
                mem.m_cr[mem.k] = weighted_mean(s_cr, w)
            mem.m_f[mem.k] = lehmer_mean(s_f, w)
            mem.k = (mem.k + 1) % len(mem.m_f)
        return pop, fit

    def resize(self, pop, fit, fes):
        """LSHADE population reduction: keep the best ``lshade_population_size`` members."""
        n_next = lshade_population_size(min(fes, self.cfg.max_fes), self.cfg)
        if n_next < len(pop):
            keep = np.sort(np.argsort(fit, kind="stable")[:n_next])
            pop, fit = pop[keep], fit[keep]
        self.memory.trim_archive(int(round(self.params["archive_rate"] * len(pop))), self.rng)
        return pop, fit


class _CoDE:
    def __init__(self, cfg, rng, dim):
        self.cfg, self.rng = cfg, rng
        self.pool = np.array(CODE_POOL)

    def _params(self, n):
        return self.pool[self.rng.integers(len(self.pool), size=n)]

    def generation(self, pop, fit, evaluate, budget):
        rng = self.rng
        n = len(pop)
        k = min(n, math.ceil(budget / 3))
        targets = np.arange(n)

        p1 = self._params(n)
        d1 = mutate("rand1", pop, targets, distinct_indices(n, 3, rng), p1[:, 0])
        t1 = crossover_binomial(pop, d1, p1[:, 1], rng)

        p2 = self._params(n)
        d2 = mutate("rand2", pop, targets, distinct_indices(n, 5, rng), p2[:, 0])
        t2 = crossover_binomial(pop, d2, p2[:, 1], rng)

        p3 = self._params(n)
        t3 = current_to_rand(pop, targets, distinct_indices(n, 3, rng), p3[:, 0], rng.random(n))
        if self.cfg.code_third_bin:
            t3 = crossover_binomial(pop, t3, p3[:, 1], rng)

        cand = np.stack([t1[:k], t2[:k], t3[:k]], axis=1)
        repaired, values = evaluate(cand.reshape(3 * k, -1))
        repaired = repaired.reshape(k, 3, -1)
        values = values.reshape(k, 3)
        choice = np.argmin(values, axis=1)
        best_trial = repaired[np.arange(k), choice]
        best_value = values[np.arange(k), choice]
        win = best_value <= fit[:k]
        pop[:k][win] = best_trial[win]
        fit[:k][win] = best_value[win]
        return pop, fit


def _make_engine(cfg, rng, dim):
    v = cfg.variant
    if v.is_classic:
        return _Classic(cfg, rng, dim)
    if v is Variant.JADE:
        return _JADE(cfg, rng, dim)
    if v is Variant.CODE:
        return _CoDE(cfg, rng, dim)
    return _SHADE(cfg, rng, dim, linear_reduction=v is Variant.LSHADE)


def run(objective, cfg: EngineConfig) -> RunRecord:
    """Minimize ``objective`` with the configured variant until ``max_fes`` evaluations.

    Parameters
    ----------
    objective : DesignObjective
        Batch objective that repairs and scores a population.
    cfg : EngineConfig

    Returns
    -------
    RunRecord
        Best repaired vector ever evaluated, its value and a per-generation
        ``(fes, best_value)`` history.
    """
    if not isinstance(cfg, EngineConfig):
        raise ConfigurationError("cfg must be an EngineConfig")
    start = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
    tracker = _Tracker(objective, cfg.store_repaired)

    pop = initialize_population(objective.lower, objective.upper, cfg.np_init, rng)
    pop, fit = tracker(pop)
    tracker.checkpoint()
    engine = _make_engine(cfg, rng, objective.dim)

    while tracker.fes < cfg.max_fes:
        pop, fit = engine.generation(pop, fit, tracker, cfg.max_fes - tracker.fes)
        if cfg.variant is Variant.LSHADE:
            pop, fit = engine.resize(pop, fit, tracker.fes)
        tracker.checkpoint()

    return RunRecord(
        best_vector=tracker.best_vector,
        best_value=tracker.best_value,
        history=tracker.history,
        seed=cfg.seed,
        elapsed=time.perf_counter() - start,
        variant=cfg.variant.value,
        fes=tracker.fes,
    )
