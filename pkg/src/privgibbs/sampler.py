"""Data-augmentation Metropolis-within-Gibbs sampling from p(theta, x | s_dp).

Each iteration draws ``theta | x`` with the model's own kernel and then
revisits every latent record: propose ``x_i* ~ f(. | theta)`` and accept
with probability ``min(1, g(s_dp, t*) / g(s_dp, t))``. Record additivity
makes each acceptance test O(d), so a sweep costs O(n).

For Laplace-noised mechanisms the record loop runs in a compiled kernel
(see :mod:`privgibbs.kernels`); other mechanisms fall back to a Python loop
over ``mech.log_g``. ``general_mwg_step`` implements the variant with
arbitrary proposal kernels for both blocks.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .distributions import RngStream
from .errors import AcceptanceBoundViolation, InstanceTooLarge, InvariantViolation, ParameterError
from .mechanisms import LaplaceNoise, SummaryState, summary_refresh, summary_swap
from .trace import Trace

BOUND_SLACK = 1e-12
DRIFT_TOL = 1e-9


@dataclass
class ChainConfig:
    iterations: int = 10000
    burn_in: int = None  # default: half the iterations
    order: str = "sequential"
    refresh_every: int = 1000
    seed: int = 0
    stream_id: tuple = (0,)
    assert_acceptance_bound: bool = False
    thin: int = 1
    snapshot_every: int = 100  # 0 disables latent-database snapshots
    backend: str = None

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.iterations // 2
        if isinstance(self.stream_id, int):
            self.stream_id = (self.stream_id,)
        self.stream_id = tuple(self.stream_id)
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ParameterError("need iterations >= 1 and 0 <= burn_in < iterations")
        if self.order not in ("sequential", "random"):
            raise ParameterError("order must be 'sequential' or 'random'")
        if self.thin < 1 or self.refresh_every < 1 or self.snapshot_every < 0:
            raise ParameterError("thin and refresh_every must be >= 1")


@dataclass
class ChainState:
    """Current ``(theta, x)`` plus the cached summary and acceptance counters.

    ``contrib`` holds the per-record contributions in the representation the
    kernel works on: dense ``(n, d)`` floats, or ``(n, c)`` cell indices
    when ``sparse`` is set.
    """

    theta: object
    records: np.ndarray
    contrib: np.ndarray
    sparse: bool
    summary: SummaryState
    iteration: int = 0
    proposed: int = 0
    accepted: int = 0
    density_evals: int = 0
    acc_prob_sum: float = 0.0
    acc_prob_min: float = 1.0
    theta_proposed: int = 0
    theta_accepted: int = 0

    @property
    def n(self):
        return len(self.records)


def _use_cells(mech):
    return mech.cells is not None


def _contributions(mech, records, sparse):
    if sparse:
        return np.ascontiguousarray(mech.cells(records), dtype=np.int64)
    return np.ascontiguousarray(mech.contributions(records), dtype=float)


def _total_from(contrib, mech, sparse):
    if len(contrib) == 0:
        return np.zeros(mech.dim)
    if sparse:
        return np.bincount(contrib.ravel(), minlength=mech.dim).astype(float)
    return contrib.sum(axis=0)


def init_state(model, mech, s_dp, rng, n=None, theta=None, records=None):
    """theta from the prior and x from f(. | theta), unless given."""
    if theta is None:
        theta = model.sample_prior(rng)
    if records is None:
        n = int(s_dp.public["n"]) if n is None else int(n)
        records = model.sample_records(theta, n, rng)
    records = np.array(records)
    sparse = _use_cells(mech)
    contrib = _contributions(mech, records, sparse)
    return ChainState(theta, records, contrib, sparse,
                      SummaryState(_total_from(contrib, mech, sparse)))


def recompute_summary(state, mech):
    return _total_from(state.contrib, mech, state.sparse)


def refresh_summary(state, mech):
    """Swap in a from-scratch total; raise if the cached one had drifted."""
    drift = summary_refresh(state.summary, recompute_summary(state, mech))
    if drift > DRIFT_TOL:
        raise InvariantViolation(f"cached summary drifted by {drift:.3g} (relative)")
    return drift


def acceptance_floor(mech):
    """exp(-epsilon) for pure-DP mechanisms, else None."""
    if not mech.pure:
        return None
    return math.exp(-mech.epsilon)


def _log_uniforms(rng, n):
    with np.errstate(divide="ignore"):
        return np.log(rng.random(n))


def _record_stats(state, probs):
    if len(probs):
        state.acc_prob_sum += float(probs.sum())
        state.acc_prob_min = min(state.acc_prob_min, float(probs.min()))
        state.proposed += len(probs)
        state.density_evals += len(probs)


def _check_floor(probs, floor):
    if floor is not None and len(probs) and probs.min() < floor - BOUND_SLACK:
        raise AcceptanceBoundViolation(
            f"acceptance probability {probs.min():.6g} below exp(-epsilon) = {floor:.6g}")


def update_theta(state, model, rng):
    """Exact draw from p(theta | x); the privatized output plays no part."""
    state.theta = model.conditional_theta(state.records, rng)
    return state


def _mh_record(state, i, new_record, log_u, log_extra, mech, s_dp):
    """Metropolis-Hastings test of replacing record ``i``; returns (accepted, prob)."""
    old_dense = mech.contributions(state.records[i:i + 1])[0]
    new_dense = mech.contributions(new_record[None])[0]
    cand = state.summary.total - old_dense + new_dense
    log_ratio = mech.log_g(s_dp, cand) - mech.log_g(s_dp, state.summary.total) + log_extra
    prob = 1.0 if log_ratio >= 0.0 else math.exp(log_ratio)
    accepted = log_u < log_ratio
    if accepted:
        summary_swap(state.summary, old_dense, new_dense)
        state.records[i] = new_record
        state.contrib[i] = _contributions(mech, new_record[None], state.sparse)[0]
        state.accepted += 1
    return accepted, prob


def update_record(state, i, model, mech, s_dp, rng, floor=None):
    """Single-site update of record ``i`` with an independence proposal from the model.

    Uses the generic ``mech.log_g`` route; ``gibbs_sweep`` does the same
    thing for all records at once through the compiled kernel.
    """
    log_u = float(_log_uniforms(rng, 1)[0])
    proposal = model.sample_records(state.theta, 1, rng)[0]
    accepted, prob = _mh_record(state, i, proposal, log_u, 0.0, mech, s_dp)
    probs = np.array([prob])
    _record_stats(state, probs)
    _check_floor(probs, floor)
    return prob


def _sweep_order(state, rng, order):
    if order == "random":
        return rng.permutation(state.n).astype(np.int64)
    return np.arange(state.n, dtype=np.int64)


def _records_step(state, model, mech, s_dp, rng, order, backend):
    n = state.n
    perm = _sweep_order(state, rng, order)
    log_u = _log_uniforms(rng, n)
    proposals = model.sample_records(state.theta, n, rng)
    if order == "random":
        # the r-th draw goes to the r-th visited record
        by_row = np.empty_like(proposals)
        by_row[perm] = proposals
        proposals = by_row
    probs = np.empty(n)
    if isinstance(mech.noise, LaplaceNoise):
        kern = kernels.get(backend)
        accepted = np.empty(n, dtype=np.uint8)
        if state.sparse:
            n_acc = kern.laplace_cells_sweep(s_dp.values, state.summary.total, mech.scale,
                                             state.contrib, mech.cells(proposals), log_u, perm,
                                             accepted, probs)
        else:
            n_acc = kern.laplace_dense_sweep(s_dp.values, state.summary.total, mech.scale,
                                             state.contrib, mech.contributions(proposals),
                                             log_u, perm, accepted, probs)
        state.accepted += n_acc
        state.summary.swaps += n_acc
        np.copyto(state.records, proposals, where=accepted.view(bool)[:, None])
    else:
        for r, i in enumerate(perm):
            _, probs[i] = _mh_record(state, i, proposals[i], log_u[r], 0.0, mech, s_dp)
    return probs


def gibbs_sweep(state, model, mech, s_dp, rng, order="sequential", backend=None, floor=None):
    """One full iteration: theta | x, then every record in turn."""
    update_theta(state, model, rng)
    if state.n:
        probs = _records_step(state, model, mech, s_dp, rng, order, backend)
        _record_stats(state, probs)
        _check_floor(probs, floor)
    else:
        probs = np.empty(0)
    state.iteration += 1
    return probs


# -- general Metropolis-within-Gibbs ------------------------------------------


class ConjugateThetaKernel:
    """Exact draw from p(theta | x). Its MH ratio is identically one."""

    exact = True

    def propose(self, model, theta, records, rng):
        return model.conditional_theta(records, rng)


class GridRandomWalk:
    """Symmetric random walk on grid indices: step uniform on {-w..w} without 0."""

    exact = False

    def __init__(self, width=10):
        self.width = int(width)

    def propose(self, model, g, records, rng):
        j = int(rng.generator.integers(0, 2 * self.width))
        return g + (j - self.width if j < self.width else j - self.width + 1)

    def log_q(self, to, frm):
        return 0.0


class GaussianRandomWalk:
    """Symmetric Gaussian random walk on a real parameter vector."""

    exact = False

    def __init__(self, step):
        self.step = float(step)

    def propose(self, model, theta, records, rng):
        theta = np.asarray(theta, dtype=float)
        return theta + self.step * rng.standard_normal(theta.shape)

    def log_q(self, to, frm):
        return 0.0


class ModelRecordProposal:
    """Independence proposal x_i* ~ f(. | theta), as in the basic sampler."""

    is_model_proposal = True

    def propose(self, model, i, state, s_dp, rng):
        return model.sample_records(state.theta, 1, rng)[0]

    def log_q(self, model, to, frm, state):
        return float(model.log_lik(to[None], state.theta)[0])


class UniformRecordProposal:
    """Uniform independence proposal over a finite record support."""

    is_model_proposal = False

    def __init__(self, support):
        self.support = np.asarray(support)

    def propose(self, model, i, state, s_dp, rng):
        return self.support[int(rng.generator.integers(0, len(self.support)))].copy()

    def log_q(self, model, to, frm, state):
        return -math.log(len(self.support))


def general_mwg_step(state, model, mech, s_dp, q_theta, q_x, rng, order="sequential",
                     floor=None):
    """One iteration with arbitrary proposal kernels for theta and for each record."""
    if q_theta.exact:
        state.theta = q_theta.propose(model, state.theta, state.records, rng)
    else:
        new = q_theta.propose(model, state.theta, state.records, rng)
        lp_new = model.log_prior(new)
        if np.isfinite(lp_new):
            log_ratio = (q_theta.log_q(state.theta, new) - q_theta.log_q(new, state.theta)
                         + lp_new - model.log_prior(state.theta)
                         + float(np.sum(model.log_lik(state.records, new)))
                         - float(np.sum(model.log_lik(state.records, state.theta))))
        else:
            log_ratio = -math.inf
        state.theta_proposed += 1
        if math.log(rng.random() + 2.0 ** -54) < log_ratio:
            state.theta = new
            state.theta_accepted += 1

    n = state.n
    if n:
        perm = _sweep_order(state, rng, order)
        log_u = _log_uniforms(rng, n)
        probs = np.empty(n)
        for r, i in enumerate(perm):
            cur = state.records[i].copy()
            new = q_x.propose(model, i, state, s_dp, rng)
            log_extra = (q_x.log_q(model, cur, new, state) - q_x.log_q(model, new, cur, state)
                         + float(model.log_lik(new[None], state.theta)[0])
                         - float(model.log_lik(cur[None], state.theta)[0]))
            _, probs[i] = _mh_record(state, i, new, log_u[r], log_extra, mech, s_dp)
        _record_stats(state, probs)
        if getattr(q_x, "is_model_proposal", False):
            _check_floor(probs, floor)
    state.iteration += 1
    return state


# -- driver -------------------------------------------------------------------


def run_chain(config, model, mech, s_dp, theta0=None, records0=None, q_theta=None, q_x=None):
    """Run one chain and return its post-burn-in :class:`Trace`.

    Passing ``q_theta``/``q_x`` selects the general sampler; otherwise the
    basic sampler with exact theta draws and model proposals runs.
    """
    mech.check_output(s_dp)
    rng = RngStream(config.seed, config.stream_id)
    state = init_state(model, mech, s_dp, rng, theta=theta0, records=records0)
    floor = acceptance_floor(mech) if config.assert_acceptance_bound else None
    general = q_theta is not None or q_x is not None
    if general:
        q_theta = q_theta or ConjugateThetaKernel()
        q_x = q_x or ModelRecordProposal()

    kept = []
    snapshots = []
    sweep_acc = np.empty(config.iterations)
    t0 = time.perf_counter()
    for it in range(config.iterations):
        if general:
            before = state.acc_prob_sum
            general_mwg_step(state, model, mech, s_dp, q_theta, q_x, rng, config.order, floor)
            sweep_acc[it] = (state.acc_prob_sum - before) / state.n if state.n else 1.0
        else:
            probs = gibbs_sweep(state, model, mech, s_dp, rng, config.order, config.backend, floor)
            sweep_acc[it] = probs.mean() if len(probs) else 1.0
        if state.iteration % config.refresh_every == 0:
            refresh_summary(state, mech)
        if it >= config.burn_in:
            if (it - config.burn_in) % config.thin == 0:
                kept.append(model.theta_vector(state.theta))
            if config.snapshot_every and (it - config.burn_in) % config.snapshot_every == 0:
                snapshots.append((it, state.records.copy()))
    elapsed = time.perf_counter() - t0
    refresh_summary(state, mech)

    meta = {
        "seed": config.seed,
        "stream_id": list(config.stream_id),
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()},
        "sampler": "general" if general else "basic",
        "backend": kernels.BACKEND if config.backend is None else config.backend,
        "mechanism": mech.name,
        "epsilon": mech.epsilon,
        "acceptance_floor": acceptance_floor(mech),
        "summary_max_drift": state.summary.max_drift,
        "timing": {"seconds": elapsed, "seconds_per_iteration": elapsed / config.iterations},
    }
    if general and state.theta_proposed:
        meta["theta_accept_fraction"] = state.theta_accepted / state.theta_proposed
    return Trace(
        names=model.theta_names(),
        samples=np.asarray(kept),
        acceptance_mean=state.acc_prob_sum / state.proposed if state.proposed else 1.0,
        acceptance_min=state.acc_prob_min,
        accept_fraction=state.accepted / state.proposed if state.proposed else 1.0,
        proposals=state.proposed,
        iterations=config.iterations,
        burn_in=config.burn_in,
        sweep_acceptance=sweep_acc,
        snapshots=snapshots,
        meta=meta,
    )


# -- brute-force oracle --------------------------------------------------------


def grid_posterior(model, s_dp, mech, n=None, max_size=10**7):
    """Exact p(theta | s_dp) on a finite parameter grid by enumerating every database."""
    n = int(s_dp.public["n"]) if n is None else int(n)
    support = model.support()
    size = len(support) ** n * model.grid_size
    if size > max_size:
        raise InstanceTooLarge(f"{len(support)}^{n} databases x {model.grid_size} grid points")
    db = np.array(list(itertools.product(range(len(support)), repeat=n)), dtype=np.int64)
    db = db.reshape(-1, n)
    contrib = mech.contributions(support)
    totals = contrib[db].sum(axis=1)
    log_eta = np.array([mech.log_g(s_dp, t) for t in totals])
    lf = np.array([model.log_lik(support, g) for g in range(model.grid_size)])  # (G, |X|)
    log_f = lf[:, db].sum(axis=-1)  # (G, M)
    with np.errstate(divide="ignore"):
        log_prior = np.log(model.prior)
    log_post = log_prior + logsumexp(log_eta[None, :] + log_f, axis=1)
    post = np.exp(log_post - log_post.max())
    return post / post.sum()
