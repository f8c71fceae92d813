"""Compare the compiled kernels with the numpy fallback.

Times the batched criterion, the per-row repair and a full LSHADE run on
Problem 6 under each available backend, and checks that both backends return
the same numbers.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from optdesign import kernels
from optdesign.encoding import Encoding, RepairConfig
from optdesign.engines import EngineConfig, run
from optdesign.models import get_problem
from optdesign.objective import DesignObjective


def best_time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def criterion_case(rng):
    """150 individuals of Problem 10 (25 support points, 6 parameters)."""
    p = get_problem(10)
    enc = Encoding.for_problem(p)
    X = rng.uniform(p.space.lower, p.space.upper, (150 * enc.n_supp, p.n_factors))
    F = np.ascontiguousarray(p.factors(X).reshape(150, enc.n_supp, p.theta.size))
    W = rng.dirichlet(np.ones(enc.n_supp), size=150)
    return F, W


def repair_case(rng):
    """150 individuals of Problem 9 with many near-duplicate support points."""
    p = get_problem(9)
    enc = Encoding.for_problem(p)
    lo, hi = enc.bounds(p.space)
    pop = np.round(rng.uniform(lo, hi, (150, enc.dim)), 1)
    cfg = RepairConfig.default_for(p.space)
    return pop, enc, p.space.lower, cfg


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    F, W = criterion_case(rng)
    pop, enc, lower, cfg = repair_case(rng)
    results = {}
    for name in kernels.available_backends():
        be = kernels.get_backend(name)
        t_crit, crit = best_time(lambda: be.criterion_batch(F, W, False, kernels.PIVOT_TOL),
                                 args.repeat)

        def do_repair():
            work = np.clip(pop, *enc.bounds(get_problem(9).space))
            be.repair_rows(work, enc.n_supp, enc.n_factors, lower, cfg.merge_eps,
                           cfg.min_weight)
            return work

        t_rep, rep = best_time(do_repair, args.repeat)

        saved = kernels._backend
        kernels._backend = be
        try:
            t_run, rec = best_time(
                lambda: run(DesignObjective(get_problem(6), "D"),
                            EngineConfig(variant="LSHADE", max_fes=10_000, seed=1)),
                max(1, args.repeat // 2))
        finally:
            kernels._backend = saved
        results[name] = (t_crit, t_rep, t_run, crit, rep, rec.best_value)

    print(f"{'backend':<8} {'criterion':>12} {'repair':>12} {'LSHADE P6':>12}")
    for name, (t_crit, t_rep, t_run, *_) in results.items():
        print(f"{name:<8} {t_crit * 1e3:>10.2f}ms {t_rep * 1e3:>10.2f}ms {t_run:>11.3f}s")
    if {"cython", "python"} <= set(results):
        c, p = results["cython"], results["python"]
        print(f"speed-up {p[0] / c[0]:>11.1f}x {p[1] / c[1]:>11.1f}x {p[2] / c[2]:>11.1f}x")
        print("max |criterion difference|:", float(np.max(np.abs(c[3] - p[3]))))
        print("max |repair difference|:   ", float(np.max(np.abs(c[4] - p[4]))))
        print("final values:", c[5], p[5])


if __name__ == "__main__":
    main()
