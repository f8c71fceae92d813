"""Backend selection for the hot loops.

The compiled extension ``optdesign._kernels`` is used when it was built and
``OPTDESIGN_PURE_PYTHON`` is unset; otherwise the numpy implementation in
``optdesign._kernels_py`` takes over. Both expose the same two functions:

``criterion_batch(factors, weights, a_optimal, pivot_tol)``
    ``factors`` has shape (n, K, p) and ``weights`` shape (n, K). Row k of
    individual i contributes ``weights[i, k] * outer(f, f)`` to that
    individual's information matrix. Returns the D value (-log det M) or the
    A value (trace M^-1) for each individual, or the penalty 1e10 when the
    Cholesky factorization breaks down.

``repair_rows(pop, n_supp, n_factors, lower, eps, min_weight)``
    In-place per-individual part of the repair: lexicographic sort, merging
    of support points closer than ``eps``, deletion of light points, padding
    and renormalization.
"""

import os

from optdesign import _kernels_py

PENALTY = 1e10
# Cholesky pivots below this fraction of the matching diagonal entry count as
# rank deficiency.
PIVOT_TOL = 1e-12

_backend = _kernels_py
BACKEND = "python"

if not os.environ.get("OPTDESIGN_PURE_PYTHON"):
    try:
        from optdesign import _kernels as _compiled
    except ImportError:
        pass
    else:
        _backend = _compiled
        BACKEND = "cython"


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from optdesign import _kernels  # noqa: F401
    except ImportError:
        return names
    return ["cython"] + names


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active one)."""
    if name is None:
        return _backend
    if name == "python":
        return _kernels_py
    if name == "cython":
        from optdesign import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def criterion_batch(factors, weights, a_optimal, pivot_tol=PIVOT_TOL):
    return _backend.criterion_batch(factors, weights, bool(a_optimal), float(pivot_tol))


def repair_rows(pop, n_supp, n_factors, lower, eps, min_weight):
    _backend.repair_rows(pop, int(n_supp), int(n_factors), lower, float(eps), float(min_weight))
