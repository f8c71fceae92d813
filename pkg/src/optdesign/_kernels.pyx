# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: batched criterion evaluation and per-individual repair."""

from libc.math cimport log, sqrt, isfinite
import numpy as np

cdef double PENALTY = 1e10
cdef double LOG_DET_FLOOR = -690.7755278982137  # log(1e-300)


cdef double _factor_value(double[:, ::1] M, double[:, ::1] L, double[::1] y,
                          int p, bint a_optimal, double pivot_tol) nogil:
    cdef int i, j, k
    cdef double s, d, logdet = 0.0, trace = 0.0

    for j in range(p):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > pivot_tol * M[j, j]) or not (s > 0.0):
            return PENALTY
        d = sqrt(s)
        L[j, j] = d
        logdet += 2.0 * log(d)
        for i in range(j + 1, p):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / d

    if logdet <= LOG_DET_FLOOR or not isfinite(logdet):
        return PENALTY
    if not a_optimal:
        return -logdet

    # trace(M^-1) = ||L^-1||_F^2, one forward solve per unit vector
    for j in range(p):
        y[j] = 1.0 / L[j, j]
        trace += y[j] * y[j]
        for i in range(j + 1, p):
            s = 0.0
            for k in range(j, i):
                s -= L[i, k] * y[k]
            y[i] = s / L[i, i]
            trace += y[i] * y[i]
    if not isfinite(trace):
        return PENALTY
    return trace


def criterion_batch(const double[:, :, ::1] factors, const double[:, ::1] weights,
                    bint a_optimal, double pivot_tol):
    cdef Py_ssize_t n = factors.shape[0]
    cdef Py_ssize_t K = factors.shape[1]
    cdef int p = <int>factors.shape[2]
    cdef Py_ssize_t idx, k
    cdef int a, b
    cdef double w, ga

    out = np.empty(n, dtype=np.float64)
    cdef double[::1] outv = out
    cdef double[:, ::1] M = np.zeros((p, p), dtype=np.float64)
    cdef double[:, ::1] L = np.zeros((p, p), dtype=np.float64)
    cdef double[::1] y = np.zeros(p, dtype=np.float64)

    with nogil:
        for idx in range(n):
            for a in range(p):
                for b in range(a + 1):
                    M[a, b] = 0.0
            for k in range(K):
                w = weights[idx, k]
                if w == 0.0:
                    continue
                for a in range(p):
                    ga = w * factors[idx, k, a]
                    if ga == 0.0:
                        continue
                    for b in range(a + 1):
                        M[a, b] += ga * factors[idx, k, b]
            outv[idx] = _factor_value(M, L, y, p, a_optimal, pivot_tol)
    return out


def repair_rows(double[:, ::1] pop, int n_supp, int n_factors,
                const double[::1] lower, double eps, double min_weight):
    """In-place sort / merge / delete / pad / renormalize on each individual."""
    cdef Py_ssize_t n = pop.shape[0]
    cdef int stride = n_factors + 1
    cdef int wcol = n_factors
    cdef Py_ssize_t r
    cdef int i, j, c, t, rows, kept, heaviest
    cdef bint changed
    cdef double dist, diff, total, eps2 = eps * eps, best_w

    cdef double[:, ::1] data = np.empty((n_supp, stride), dtype=np.float64)
    cdef double[:, ::1] tmp = np.empty((n_supp, stride), dtype=np.float64)
    cdef double[::1] hold = np.empty(stride, dtype=np.float64)

    with nogil:
        for r in range(n):
            for i in range(n_supp):
                for c in range(stride):
                    data[i, c] = pop[r, i * stride + c]
            rows = n_supp

            # stable insertion sort, lexicographic on coordinates
            for i in range(1, rows):
                for c in range(stride):
                    hold[c] = data[i, c]
                j = i - 1
                while j >= 0:
                    t = 0
                    for c in range(n_factors):
                        if hold[c] < data[j, c]:
                            t = 1
                            break
                        if hold[c] > data[j, c]:
                            break
                    if t == 0:
                        break
                    for c in range(stride):
                        data[j + 1, c] = data[j, c]
                    j -= 1
                for c in range(stride):
                    data[j + 1, c] = hold[c]

            changed = True
            while changed:
                changed = False
                i = 0
                while i < rows - 1:
                    if data[i, wcol] > 0.0:
                        j = i + 1
                        while j < rows:
                            if data[j, wcol] > 0.0:
                                dist = 0.0
                                for c in range(n_factors):
                                    diff = data[i, c] - data[j, c]
                                    dist += diff * diff
                                if dist < eps2:
                                    for c in range(n_factors):
                                        data[i, c] = 0.5 * (data[i, c] + data[j, c])
                                    data[i, wcol] = data[i, wcol] + data[j, wcol]
                                    for t in range(j, rows - 1):
                                        for c in range(stride):
                                            data[t, c] = data[t + 1, c]
                                    rows -= 1
                                    changed = True
                                    continue
                            j += 1
                    i += 1

            kept = 0
            heaviest = 0
            best_w = data[0, wcol]
            for i in range(rows):
                if data[i, wcol] > best_w:
                    best_w = data[i, wcol]
                    heaviest = i
                if not (data[i, wcol] < min_weight):
                    for c in range(stride):
                        tmp[kept, c] = data[i, c]
                    kept += 1
            if kept == 0:
                for c in range(stride):
                    tmp[0, c] = data[heaviest, c]
                kept = 1

            total = 0.0
            for i in range(kept):
                total += tmp[i, wcol]
            for i in range(n_supp):
                if i < kept:
                    for c in range(n_factors):
                        pop[r, i * stride + c] = tmp[i, c]
                    pop[r, i * stride + wcol] = tmp[i, wcol] / total
                else:
                    for c in range(n_factors):
                        pop[r, i * stride + c] = lower[c]
                    pop[r, i * stride + wcol] = 0.0
