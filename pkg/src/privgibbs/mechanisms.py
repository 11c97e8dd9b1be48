"""Record-additive privacy mechanisms.

A mechanism releases ``s_dp ~ g(. | sum_i t_i(x_i))``: each record
contributes a fixed-length vector ``t_i`` and the outer density only sees
their sum. That lets the sampler re-score a one-record change in O(d)
by swapping a single contribution in a cached running total.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .distributions import laplace_log_density, sample_laplace
from .errors import ConfigError, DataError, ParameterError, ShapeError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClampBounds:
    """Per-coordinate public clamping interval ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ShapeError("clamp bounds must be vectors of equal length")
        if not np.all(lower < upper):
            raise ParameterError("clamp bounds need lower < upper in every coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, dim, lower, upper):
        return cls(np.full(dim, float(lower)), np.full(dim, float(upper)))

    def __len__(self):
        return self.lower.shape[0]

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def _check_dims(z, bounds):
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (len(bounds),):
        raise ShapeError(f"last axis {z.shape[-1:]} does not match {len(bounds)} bounds")
    return z


def clamp(z, bounds):
    z = _check_dims(z, bounds)
    return np.minimum(np.maximum(z, bounds.lower), bounds.upper)


def normalize_to_unit(z, bounds):
    """Clamp, then map ``[lower, upper]`` affinely onto ``[-1, 1]``."""
    c = clamp(z, bounds)
    return 2.0 * (c - bounds.lower) / (bounds.upper - bounds.lower) - 1.0


# -- noise models -----------------------------------------------------------


class LaplaceNoise:
    """i.i.d. Laplace(0, sensitivity / epsilon) on every released entry."""

    kind = "laplace"
    pure = True

    def __init__(self, sensitivity, epsilon):
        if not sensitivity > 0 or not epsilon > 0:
            raise ParameterError("sensitivity and epsilon must be positive")
        self.sensitivity = float(sensitivity)
        self.epsilon = float(epsilon)
        self.scale = self.sensitivity / self.epsilon

    def sample(self, summary, rng):
        summary = np.asarray(summary, dtype=float)
        return summary + sample_laplace(0.0, self.scale, rng, size=summary.shape)

    def log_g(self, s_dp, total):
        return float(np.sum(laplace_log_density(s_dp, total, self.scale)))

    def to_dict(self):
        return {"kind": self.kind, "epsilon": self.epsilon, "sensitivity": self.sensitivity,
                "scale": self.scale}


class GaussianNoise:
    """i.i.d. N(0, sigma^2) noise. Record-additive but carries no pure-DP bound."""

    kind = "gaussian"
    pure = False
    epsilon = None
    sensitivity = None

    def __init__(self, sigma):
        if not sigma > 0:
            raise ParameterError("sigma must be positive")
        self.scale = float(sigma)

    def sample(self, summary, rng):
        summary = np.asarray(summary, dtype=float)
        return summary + self.scale * rng.standard_normal(summary.shape)

    def log_g(self, s_dp, total):
        r = (np.asarray(s_dp) - np.asarray(total)) / self.scale
        return float(-0.5 * np.sum(r * r) - r.size * math.log(self.scale * math.sqrt(2 * math.pi)))

    def to_dict(self):
        return {"kind": self.kind, "epsilon": None, "sensitivity": None, "scale": self.scale}


# -- released output ---------------------------------------------------------


@dataclass(frozen=True)
class PrivatizedOutput:
    """An immutable released vector plus everything the analyst needs to model it."""

    values: np.ndarray
    mechanism: str
    noise: dict
    public: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ShapeError("released values must be a vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.values.shape[0]

    @property
    def epsilon(self):
        return self.noise.get("epsilon")

    def to_json(self):
        # json writes floats with repr(), which round-trips bit-exactly.
        doc = {
            "format_version": FORMAT_VERSION,
            "mechanism": self.mechanism,
            "epsilon": self.noise.get("epsilon"),
            "sensitivity": self.noise.get("sensitivity"),
            "noise": self.noise,
            "d": self.dim,
            "values": [float(v) for v in self.values],
            "public": self.public,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
            values = doc["values"]
            if len(values) != doc["d"]:
                raise DataError("released vector length disagrees with d")
            return cls(values=np.asarray(values, dtype=float), mechanism=doc["mechanism"],
                       noise=doc["noise"], public=doc.get("public", {}))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DataError(f"malformed privatized output: {exc}") from None

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def laplace_mechanism(summary, sensitivity, epsilon, rng, mechanism="laplace", public=None):
    """Release ``summary`` with Laplace(0, sensitivity/epsilon) noise per entry."""
    noise = LaplaceNoise(sensitivity, epsilon)
    return PrivatizedOutput(noise.sample(summary, rng), mechanism, noise.to_dict(),
                            dict(public or {}))


# -- record additivity -------------------------------------------------------


@dataclass(frozen=True)
class RecordAdditiveMechanism:
    """Couples a per-record contribution map with an outer noise density.

    ``contributions(records)`` returns the dense ``(n, d)`` matrix of
    ``t_i``. Mechanisms whose contributions are 0/1 indicators may also set
    ``cells(records)``, returning the ``(n, c)`` integer positions of the
    ones; the sampler then uses a sparse kernel. Positions in different
    columns of ``cells`` must never coincide.
    """

    name: str
    dim: int
    contributions: Callable[[np.ndarray], np.ndarray]
    noise: object
    cells: Optional[Callable[[np.ndarray], np.ndarray]] = None
    public: dict = field(default_factory=dict)

    @property
    def pure(self):
        return bool(self.noise.pure)

    @property
    def epsilon(self):
        return self.noise.epsilon

    @property
    def scale(self):
        return self.noise.scale

    def summary(self, records):
        t = self.contributions(records)
        return t.sum(axis=0) if len(t) else np.zeros(self.dim)

    def release(self, records, rng, public=None):
        meta = {**self.public, **(public or {}), "n": int(len(records))}
        return PrivatizedOutput(self.noise.sample(self.summary(records), rng), self.name,
                                self.noise.to_dict(), meta)

    def log_g(self, s_dp, total):
        values = s_dp.values if isinstance(s_dp, PrivatizedOutput) else s_dp
        return self.noise.log_g(values, total)

    def check_output(self, s_dp):
        """Raise ConfigError unless ``s_dp`` was produced by a mechanism like this one."""
        if s_dp.mechanism != self.name:
            raise ConfigError(f"output was released by {s_dp.mechanism!r}, not {self.name!r}")
        if s_dp.dim != self.dim:
            raise ConfigError(f"output has {s_dp.dim} entries, mechanism releases {self.dim}")
        mine = self.noise.to_dict()
        for key in ("kind", "epsilon", "sensitivity"):
            a, b = mine.get(key), s_dp.noise.get(key)
            if isinstance(a, float) and isinstance(b, (int, float)):
                if not math.isclose(a, b, rel_tol=1e-12):
                    raise ConfigError(f"noise {key} mismatch: {a} vs {b}")
            elif a != b:
                raise ConfigError(f"noise {key} mismatch: {a} vs {b}")
        for key, value in self.public.items():
            if key in s_dp.public and s_dp.public[key] != value:
                raise ConfigError(f"public constant {key!r} mismatch")


@dataclass
class SummaryState:
    """Running ``sum_i t_i`` for one chain."""

    total: np.ndarray
    swaps: int = 0
    refreshes: int = 0
    max_drift: float = 0.0


def summary_init(records, mech):
    if len(records) == 0:
        raise DataError("summary of an empty database")
    return SummaryState(np.array(mech.summary(records), dtype=float))


def summary_swap(state, old_contrib, new_contrib):
    old_contrib = np.asarray(old_contrib, dtype=float)
    new_contrib = np.asarray(new_contrib, dtype=float)
    if old_contrib.shape != state.total.shape or new_contrib.shape != state.total.shape:
        raise ShapeError("contribution shape does not match the summary")
    state.total = state.total - old_contrib + new_contrib
    state.swaps += 1
    return state


def summary_refresh(state, recomputed):
    """Replace the running total by a from-scratch sum and record the drift."""
    recomputed = np.asarray(recomputed, dtype=float)
    scale = max(1.0, float(np.max(np.abs(recomputed))))
    drift = float(np.max(np.abs(state.total - recomputed))) / scale
    state.max_drift = max(state.max_drift, drift)
    state.total = recomputed.copy()
    state.refreshes += 1
    return drift


def log_eta(s_dp, state, mech):
    return mech.log_g(s_dp, state.total)


def l1_sensitivity_check(mech, database, swaps, rng, draw_record=None):
    """Largest observed ``||t(x_i) - t(x')||_1`` over random one-record replacements.

    By default the replacement is another record of ``database``; pass
    ``draw_record(rng)`` to draw replacements from elsewhere.
    """
    if swaps < 1:
        raise ParameterError("need at least one swap")
    database = np.asarray(database)
    n = len(database)
    t = mech.contributions(database)
    idx = rng.generator.integers(0, n, size=swaps)
    if draw_record is None:
        other = t[rng.generator.integers(0, n, size=swaps)]
    else:
        other = mech.contributions(np.stack([draw_record(rng) for _ in range(swaps)]))
    return float(np.max(np.abs(t[idx] - other).sum(axis=1)))
