import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privgibbs import _kernels_py, kernels
from privgibbs.distributions import RngStream
from privgibbs.models import LogLinearModel, RegressionModel

needs_ext = pytest.mark.skipif("cython" not in kernels.BACKENDS,
                               reason="compiled extension not built")


def both(fn):
    """Call ``fn(kernel_module)`` with each backend; return the outputs per backend."""
    return {name: fn(mod) for name, mod in kernels.BACKENDS.items()}


def assert_identical(outs):
    ref = outs["python"]
    for name, got in outs.items():
        for a, b in zip(ref, got):
            assert np.asarray(a).tobytes() == np.asarray(b).tobytes(), name


def test_default_backend_is_available():
    assert kernels.BACKEND in kernels.BACKENDS
    assert kernels.get() is kernels.BACKENDS[kernels.BACKEND]
    assert kernels.get("python") is _kernels_py


def _dense_case(seed, n, eps, order_kind):
    model = RegressionModel()
    rng = RngStream(seed)
    beta = model.sample_prior(rng)
    cur = model.record_contribution(model.sample_records(beta, n, rng) * 3)
    new = model.record_contribution(model.sample_records(beta, n, rng) * 3)
    s = cur.sum(axis=0) + rng.standard_normal(9) * 13.0 / eps
    log_u = np.log(rng.random(n))
    order = rng.permutation(n) if order_kind else np.arange(n)

    def run(k):
        total, c = cur.sum(axis=0), cur.copy()
        acc, prob = np.empty(n, dtype=np.uint8), np.empty(n)
        n_acc = k.laplace_dense_sweep(s, total, 13.0 / eps, c, new, log_u,
                                      order.astype(np.int64), acc, prob)
        return total, c, acc, prob, np.array([n_acc])
    return run


def _cells_case(seed, n, eps, order_kind):
    model = LogLinearModel(3, [2, 3, 4])
    rng = RngStream(seed)
    theta = model.sample_prior(rng)
    cur = model.record_cells(model.sample_records(theta, n, rng)).astype(np.int64)
    new = model.record_cells(model.sample_records(theta, n, rng)).astype(np.int64)
    s = np.bincount(cur.ravel(), minlength=model.n_cells) + rng.standard_normal(model.n_cells) / eps
    log_u = np.log(rng.random(n))
    order = rng.permutation(n) if order_kind else np.arange(n)

    def run(k):
        total = np.bincount(cur.ravel(), minlength=model.n_cells).astype(float)
        c = cur.copy()
        acc, prob = np.empty(n, dtype=np.uint8), np.empty(n)
        n_acc = k.laplace_cells_sweep(s, total, 6.0 / eps, c, new, log_u,
                                      order.astype(np.int64), acc, prob)
        return total, c, acc, prob, np.array([n_acc])
    return run


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 300), st.sampled_from([0.1, 1.0, 10.0]),
       st.booleans())
def test_dense_sweep_backends_identical(seed, n, eps, shuffled):
    assert_identical(both(_dense_case(seed, n, eps, shuffled)))


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 300), st.sampled_from([0.1, 1.0, 10.0]),
       st.booleans())
def test_cells_sweep_backends_identical(seed, n, eps, shuffled):
    assert_identical(both(_cells_case(seed, n, eps, shuffled)))


@needs_ext
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 200), st.integers(0, 4))
def test_regression_kernels_backends_identical(seed, n, p):
    rng = RngStream(seed)
    model = RegressionModel(p=p, mean=np.zeros(p))
    recs = np.ascontiguousarray(rng.standard_normal((n, p + 1)) * 8)
    z = rng.standard_normal((n, p + 1))
    beta = rng.standard_normal(p + 1)
    prec = np.eye(p + 1) + 0.1 * np.ones((p + 1, p + 1))
    shift = rng.standard_normal(p + 1)
    zq = rng.standard_normal(p + 1)

    def run(k):
        contrib = np.empty((n, model.n_cells))
        k.regression_contributions(recs, model.bounds.lower, model.bounds.upper, contrib)
        prop = np.empty_like(z)
        k.regression_propose(z, model.mean, model._chol, beta, 1.3, prop)
        xtx, xty = np.empty((p + 1, p + 1)), np.empty(p + 1)
        k.regression_gram(recs, xtx, xty)
        pr, sh, out = prec.copy(), shift.copy(), np.empty(p + 1)
        ok = k.normal_precision_draw(pr, sh, zq, out)
        return contrib, prop, xtx, xty, out, np.array([ok])
    assert_identical(both(run))


def test_dense_sweep_matches_direct_metropolis():
    # reference: evaluate the Laplace log density of each candidate summary
    run = _dense_case(3, 50, 1.0, False)
    total, _, acc, prob, _ = run(_kernels_py)
    model = RegressionModel()
    rng = RngStream(3)
    beta = model.sample_prior(rng)
    cur = model.record_contribution(model.sample_records(beta, 50, rng) * 3)
    new = model.record_contribution(model.sample_records(beta, 50, rng) * 3)
    s = cur.sum(axis=0) + rng.standard_normal(9) * 13.0
    log_u = np.log(rng.random(50))
    t = cur.sum(axis=0)
    for i in range(50):
        cand = t - cur[i] + new[i]
        log_ratio = (np.abs(s - t).sum() - np.abs(s - cand).sum()) / 13.0
        assert prob[i] == pytest.approx(min(1.0, np.exp(log_ratio)), rel=1e-12)
        if log_u[i] < log_ratio:
            t = cand
        assert bool(acc[i]) == (log_u[i] < log_ratio)
    np.testing.assert_allclose(total, t, rtol=0, atol=1e-12)


def test_normal_precision_draw_rejects_indefinite():
    for k in kernels.BACKENDS.values():
        out = np.empty(2)
        assert not k.normal_precision_draw(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2),
                                           np.zeros(2), out)


def test_normal_precision_draw_moments():
    prec = np.array([[2.0, 0.5], [0.5, 1.0]])
    shift = np.array([1.0, -1.0])
    rng = RngStream(4)
    draws = np.empty((50000, 2))
    for i in range(50000):
        kernels.get().normal_precision_draw(prec.copy(), shift.copy(), rng.standard_normal(2),
                                            draws[i])
    cov = np.linalg.inv(prec)
    np.testing.assert_allclose(draws.mean(axis=0), cov @ shift, atol=0.02)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


_CHAIN_SCRIPT = """
import json, numpy as np
from privgibbs import ChainConfig, RegressionModel, LogLinearModel, RngStream, run_chain, kernels
out = {"backend": kernels.BACKEND}
for name, model in (("reg", RegressionModel()), ("ll", LogLinearModel(5, [3] * 5))):
    rng = RngStream(9)
    theta = model.sample_prior(rng)
    mech = model.mechanism(1.0)
    s = mech.release(model.sample_records(theta, 60, rng), rng)
    tr = run_chain(ChainConfig(iterations=60, seed=2, order="random"), model, mech, s)
    out[name] = tr.samples.tobytes().hex()
    out[name + "_acc"] = tr.acceptance_mean.hex()
print(json.dumps(out))
"""


@needs_ext
def test_whole_chain_identical_across_backends():
    results = {}
    for backend in ("python", "cython"):
        env = dict(os.environ, PRIVGIBBS_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", _CHAIN_SCRIPT], env=env,
                              capture_output=True, text=True, check=True)
        results[backend] = json.loads(proc.stdout)
    assert results["python"]["backend"] == "python"
    assert results["cython"]["backend"] == "cython"
    for key in ("reg", "ll", "reg_acc", "ll_acc"):
        assert results["python"][key] == results["cython"][key]


def test_unknown_backend_rejected():
    env = dict(os.environ, PRIVGIBBS_BACKEND="fortran")
    proc = subprocess.run([sys.executable, "-c", "import privgibbs.kernels"], env=env,
                          capture_output=True, text=True)
    assert proc.returncode != 0
    assert "not available" in proc.stderr
