"""Pure numpy/Python versions of the compiled kernels.

Used when the Cython extension is not built, or when ``OPTDESIGN_PURE_PYTHON``
is set. Results agree with the compiled path to rounding error.
"""

import numpy as np

PENALTY = 1e10
LOG_DET_FLOOR = np.log(1e-300)


def criterion_batch(factors, weights, a_optimal, pivot_tol):
    factors = np.asarray(factors, dtype=float)
    weights = np.asarray(weights, dtype=float)
    active = weights != 0.0
    # zero-weight rows may hold non-finite factors; they must not leak into M
    F = np.where(active[..., None], factors, 0.0)
    M = np.einsum("nk,nka,nkb->nab", weights, F, F)
    M = np.tril(M) + np.swapaxes(np.tril(M, -1), -1, -2)

    out = np.full(M.shape[0], PENALTY)
    for i, Mi in enumerate(M):
        if not np.all(np.isfinite(Mi)):
            continue
        try:
            L = np.linalg.cholesky(Mi)
        except np.linalg.LinAlgError:
            continue
        piv = np.diag(L) ** 2
        diag = np.diag(Mi)
        if not np.all((piv > pivot_tol * diag) & (piv > 0.0)):
            continue
        logdet = 2.0 * np.log(np.diag(L)).sum()
        if not np.isfinite(logdet) or logdet <= LOG_DET_FLOOR:
            continue
        if not a_optimal:
            out[i] = -logdet
            continue
        Linv = np.linalg.solve(L, np.eye(L.shape[0]))
        trace = float(np.sum(Linv * Linv))
        if np.isfinite(trace):
            out[i] = trace
    return out


def _repair_one(data, n_factors, eps, min_weight):
    """Merge/delete on an (n_supp, n_factors + 1) block, rows already sorted."""
    rows = [list(r) for r in data]
    wcol = n_factors
    eps2 = eps * eps
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(rows) - 1:
            if rows[i][wcol] > 0.0:
                j = i + 1
                while j < len(rows):
                    if rows[j][wcol] > 0.0:
                        a, b = rows[i], rows[j]
                        dist = sum((a[c] - b[c]) ** 2 for c in range(n_factors))
                        if dist < eps2:
                            merged = [0.5 * (a[c] + b[c]) for c in range(n_factors)]
                            merged.append(a[wcol] + b[wcol])
                            rows[i] = merged
                            del rows[j]
                            changed = True
                            continue
                    j += 1
            i += 1

    kept = [r for r in rows if not r[wcol] < min_weight]
    if not kept:
        heaviest = max(range(len(rows)), key=lambda k: (rows[k][wcol], -k))
        kept = [rows[heaviest]]
    return kept


def repair_rows(pop, n_supp, n_factors, lower, eps, min_weight):
    stride = n_factors + 1
    for r in range(pop.shape[0]):
        block = pop[r].reshape(n_supp, stride)
        order = np.lexsort(block[:, n_factors - 1::-1].T)
        kept = _repair_one(block[order], n_factors, eps, min_weight)
        total = sum(row[n_factors] for row in kept)
        out = np.empty((n_supp, stride))
        out[: len(kept)] = kept
        out[: len(kept), n_factors] /= total
        out[len(kept):, :n_factors] = lower
        out[len(kept):, n_factors] = 0.0
        pop[r] = out.ravel()
