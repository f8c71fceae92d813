"""Approximate designs, design spaces and information-matrix assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DesignError(ValueError):
    """Structural problem with a design or design space."""


@dataclass(frozen=True)
class DesignSpace:
    """Axis-aligned box ``[lower, upper]`` in ``n_factors`` dimensions."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise DesignError("lower and upper bounds must be 1-d vectors of equal length")
        if not np.all(lower < upper):
            raise DesignError("every factor needs lower < upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_factors(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, point, tol: float = 0.0) -> bool:
        x = np.asarray(point, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def __eq__(self, other):
        if not isinstance(other, DesignSpace):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True)
class Design:
    """Support points (rows of ``points``) with their weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if points.ndim != 2 or points.shape[0] != weights.size:
            raise DesignError(
                f"{points.shape[0]} support points but {weights.size} weights"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def n_points(self) -> int:
        return self.weights.size

    @property
    def n_factors(self) -> int:
        return self.points.shape[1]

    def support(self, tol: float = 0.0) -> Design:
        """The sub-design of points with weight above ``tol``."""
        keep = self.weights > tol
        return Design(self.points[keep], self.weights[keep])

    def normalized(self) -> Design:
        total = self.weights.sum()
        if total <= 0:
            raise DesignError("cannot normalize a design with zero total weight")
        return Design(self.points, self.weights / total)

    def is_feasible(self, space: DesignSpace, tol: float = 1e-9) -> bool:
        return (
            self.n_factors == space.n_factors
            and bool(np.all(self.weights >= 0))
            and abs(self.weights.sum() - 1.0) <= tol
            and all(space.contains(x, tol) for x in self.points)
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": "1",
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Design:
        try:
            return cls(data["points"], data["weights"])
        except KeyError as exc:
            raise DesignError(f"design record missing field {exc}") from None


def clamp_to_space(point, space: DesignSpace) -> np.ndarray:
    """Componentwise projection of ``point`` onto the box."""
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != space.n_factors:
        raise DesignError(f"point has {x.shape[-1]} coordinates, space has {space.n_factors}")
    return np.minimum(np.maximum(x, space.lower), space.upper)


def information_matrix(design: Design, problem) -> np.ndarray:
    """Normalized information matrix ``sum_i w_i M(x_i, theta)``.

    Zero-weight points are skipped, so padding rows never contribute.
    """
    if design.n_factors != problem.space.n_factors:
        raise DesignError(
            f"design has {design.n_factors} factors, problem {problem.id} has "
            f"{problem.space.n_factors}"
        )
    active = design.weights != 0.0
    F = problem.factors(design.points[active])
    w = design.weights[active]
    M = np.einsum("i,ira,irb->ab", w, F, F)
    return 0.5 * (M + M.T)
