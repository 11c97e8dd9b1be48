"""Compare the compiled and pure-Python kernel backends.

Times each hot kernel on identical inputs, checks that both backends return
bit-identical results, and times whole sweeps at several database sizes.

    python benchmarks/bench_kernels.py [--n 1000 2000 4000] [--repeat 20]
"""
import argparse
import time

import numpy as np

from privgibbs import kernels
from privgibbs.distributions import RngStream
from privgibbs.experiments import runtime_benchmark, true_parameters
from privgibbs.models import LogLinearModel, RegressionModel


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n):
    """(name, callable(backend_module) -> outputs) pairs on fixed inputs."""
    rng = RngStream(11, n)
    reg = RegressionModel()
    reg_records = np.ascontiguousarray(reg.sample_records(true_parameters(reg, "fixture", 0), n,
                                                          rng))
    reg_prop = np.ascontiguousarray(reg.sample_records(true_parameters(reg, "fixture", 0), n,
                                                       rng))
    reg_mech = reg.mechanism(1.0)
    reg_s = reg_mech.release(reg_records, rng)
    ll = LogLinearModel(5, [3] * 5)
    ll_theta = true_parameters(ll, "fixture", 0)
    ll_records = ll.sample_records(ll_theta, n, rng)
    ll_mech = ll.mechanism(1.0)
    ll_s = ll_mech.release(ll_records, rng)
    log_u = np.log(rng.random(n))
    order = np.arange(n, dtype=np.int64)

    reg_cur = reg.record_contribution(reg_records)
    reg_new = reg.record_contribution(reg_prop)
    reg_total = reg_cur.sum(axis=0)
    ll_cur = np.ascontiguousarray(ll.record_cells(ll_records), dtype=np.int64)
    ll_new = np.ascontiguousarray(
        ll.record_cells(ll.sample_records(ll_theta, n, RngStream(12, n))), dtype=np.int64)
    ll_total = np.bincount(ll_cur.ravel(), minlength=ll_mech.dim).astype(float)

    def dense(k):
        total, cur = reg_total.copy(), reg_cur.copy()
        acc = np.empty(n, dtype=np.uint8)
        prob = np.empty(n)
        k.laplace_dense_sweep(reg_s.values, total, reg_mech.scale, cur, reg_new, log_u,
                              order, acc, prob)
        return total, cur, acc, prob

    def cells(k):
        total, cur = ll_total.copy(), ll_cur.copy()
        acc = np.empty(n, dtype=np.uint8)
        prob = np.empty(n)
        k.laplace_cells_sweep(ll_s.values, total, ll_mech.scale, cur, ll_new, log_u,
                              order, acc, prob)
        return total, cur, acc, prob

    def contrib(k):
        out = np.empty((n, reg.n_cells))
        k.regression_contributions(reg_records, reg.bounds.lower, reg.bounds.upper, out)
        return (out,)

    z = RngStream(13, n).standard_normal((n, 3))

    def propose(k):
        out = np.empty_like(z)
        k.regression_propose(z, reg.mean, reg._chol, np.array([-1.79, -2.89, -0.66]),
                             reg._sigma, out)
        return (out,)

    def gram(k):
        xtx = np.empty((3, 3))
        xty = np.empty(3)
        k.regression_gram(reg_records, xtx, xty)
        return xtx, xty

    return [("laplace_dense_sweep", dense), ("laplace_cells_sweep", cells),
            ("regression_contributions", contrib), ("regression_propose", propose),
            ("regression_gram", gram)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 2000, 4000])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    backends = sorted(kernels.BACKENDS)
    if "cython" not in backends:
        print("compiled backend unavailable; timing the Python kernels only")
    print(f"{'kernel':28s} {'n':>6s} " + " ".join(f"{b + ' ms':>12s}" for b in backends)
          + f" {'speedup':>8s} {'identical':>9s}")
    for n in args.n:
        for name, case in kernel_cases(n):
            outs = {b: case(kernels.get(b)) for b in backends}
            times = {b: best_of(lambda b=b: case(kernels.get(b)), args.repeat) for b in backends}
            ref = outs[backends[0]]
            same = all(all(np.array_equal(x, y) for x, y in zip(ref, outs[b])) for b in backends)
            speed = times.get("python", np.nan) / times.get("cython", np.nan)
            print(f"{name:28s} {n:6d} " + " ".join(f"{1e3 * times[b]:12.3f}" for b in backends)
                  + f" {speed:8.1f} {str(same):>9s}")

    if len(set(args.n)) < 2:
        return
    print()
    print("whole regression sweep, median over 50 sweeps")
    for b in backends:
        res = runtime_benchmark(RegressionModel(), args.n, backend=b)
        ratios = ", ".join(f"n={r.n}: {r.ratio_to(res[0]):.2f}" for r in res[1:])
        med = ", ".join(f"{1e3 * r.median_seconds:.3f} ms" for r in res)
        print(f"  {b:8s} {med}  (ratios {ratios})")


if __name__ == "__main__":
    main()
