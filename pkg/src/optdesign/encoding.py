"""Flat-vector encoding of designs and the repair operator.

An individual is laid out as ``[x_1, w_1, x_2, w_2, ..., x_m, w_m]`` where each
``x_i`` occupies ``n_factors`` entries. Repair makes any such vector a feasible
design: coordinates are clamped into the space, weights into [0, 1] and then
normalized; support points closer than ``merge_eps`` are merged into their
midpoint carrying the summed weight; points lighter than ``min_weight`` are
dropped; the freed rows are padded with zero-weight copies of the lower
corner; the remaining weights are renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from optdesign import kernels
from optdesign.design import Design, DesignError, DesignSpace


@dataclass(frozen=True)
class Encoding:
    n_supp: int
    n_factors: int

    def __post_init__(self):
        if self.n_supp < 1 or self.n_factors < 1:
            raise DesignError("n_supp and n_factors must be positive")

    @property
    def dim(self) -> int:
        return self.n_supp * (self.n_factors + 1)

    @property
    def weight_index(self) -> np.ndarray:
        stride = self.n_factors + 1
        return np.arange(self.n_factors, self.dim, stride)

    def bounds(self, space: DesignSpace):
        """Per-gene lower/upper bounds of the flat vector (weights in [0, 1])."""
        block_lo = np.append(space.lower, 0.0)
        block_hi = np.append(space.upper, 1.0)
        return np.tile(block_lo, self.n_supp), np.tile(block_hi, self.n_supp)

    @classmethod
    def for_problem(cls, problem) -> Encoding:
        return cls(problem.n_supp, problem.n_factors)


@dataclass(frozen=True)
class RepairConfig:
    merge_eps: float
    min_weight: float = 0.01

    def __post_init__(self):
        if not self.merge_eps > 0:
            raise ValueError("merge_eps must be positive")
        if not 0.0 <= self.min_weight < 1.0:
            raise ValueError("min_weight must lie in [0, 1)")

    @classmethod
    def default_for(cls, space: DesignSpace, merge_eps=None, min_weight=None) -> RepairConfig:
        """2.5% of the space diameter as merge distance and a 1% weight floor."""
        return cls(
            merge_eps=0.025 * space.diameter if merge_eps is None else float(merge_eps),
            min_weight=0.01 if min_weight is None else float(min_weight),
        )


def decode(vector, enc: Encoding) -> Design:
    v = np.asarray(vector, dtype=float)
    if v.shape != (enc.dim,):
        raise DesignError(f"vector of length {v.size} does not match encoding dimension {enc.dim}")
    block = v.reshape(enc.n_supp, enc.n_factors + 1)
    return Design(block[:, :-1].copy(), block[:, -1].copy())


def encode(design: Design, enc: Encoding) -> np.ndarray:
    if design.n_points != enc.n_supp or design.n_factors != enc.n_factors:
        raise DesignError(
            f"design with {design.n_points} points x {design.n_factors} factors does not fit "
            f"encoding {enc.n_supp} x {enc.n_factors}"
        )
    return np.column_stack([design.points, design.weights]).ravel()


def _normalize_weights(pop, enc: Encoding):
    idx = enc.weight_index
    total = pop[:, idx].sum(axis=1)
    empty = total <= 0.0
    if np.any(empty):
        pop[np.ix_(empty, idx)] = 1.0
        total[empty] = enc.n_supp
    pop[:, idx] /= total[:, None]


def repair(population, enc: Encoding, space: DesignSpace, cfg: RepairConfig) -> np.ndarray:
    """Repair a population (rows are individuals); returns a new array."""
    pop = np.array(population, dtype=float, ndmin=2, order="C", copy=True)
    if pop.shape[1] != enc.dim:
        raise DesignError(f"individuals have {pop.shape[1]} genes, encoding expects {enc.dim}")
    lo, hi = enc.bounds(space)
    np.clip(pop, lo, hi, out=pop)
    _normalize_weights(pop, enc)
    kernels.repair_rows(pop, enc.n_supp, enc.n_factors, space.lower, cfg.merge_eps, cfg.min_weight)
    return pop


def repair_one(vector, enc: Encoding, space: DesignSpace, cfg: RepairConfig) -> np.ndarray:
    return repair(np.asarray(vector, dtype=float)[None, :], enc, space, cfg)[0]
