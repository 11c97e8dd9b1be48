"""Command-line entry point: ``privgibbs {generate,privatize,sample,experiment}``.

All commands read one YAML run configuration. Relative paths in its ``io``
section resolve against ``--out``, so a run directory holds the database,
the release, the trace and the experiment outputs side by side.

Exit codes: 0 success, 1 I/O failure, 2 config error, 3 data error,
4 invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import yaml

from . import __version__
from .distributions import RngStream
from .errors import ConfigError, DataError, InvariantViolation, ShapeError
from .experiments import (DATA, KINDS, PARAMS, PRESETS, RELEASE, ExperimentSpec,
                          environment, run_experiment, true_parameters)
from .mechanisms import PrivatizedOutput
from .models import model_from_config
from .sampler import ChainConfig, run_chain

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3, 4

SECTIONS = {"seed", "model", "data", "mechanism", "sampler", "experiment", "io"}
DATA_KEYS = {"n", "truth"}
MECHANISM_KEYS = {"kind", "epsilon", "bounds"}
SAMPLER_KEYS = {"iterations", "burn_in", "order", "refresh_every", "assert_acceptance_bound",
                "thin", "snapshot_every", "backend"}
EXPERIMENT_KEYS = {"kind", "mode", "epsilons", "replicates", "iterations", "burn_in", "level",
                   "workers", "timing_n", "timing_sweeps", "n", "truth"}
IO_KEYS = {"database", "release", "trace", "sidecar", "parameters"}
IO_DEFAULTS = {"database": "database.csv", "release": "release.json", "trace": "trace.csv",
               "sidecar": "trace.json", "parameters": "parameters.json"}


class RunConfig:
    """A validated run configuration.

    Construction checks every section against its schema and builds the
    model, mechanism and chain settings, so errors surface before any work.
    """

    def __init__(self, raw, seed=None, assert_bound=False, preset=None):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping of sections")
        self.raw = raw
        _check_keys(raw, SECTIONS, "top level")
        self.seed = int(raw.get("seed", 0) if seed is None else seed)
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

        mech_cfg = _section(raw, "mechanism", MECHANISM_KEYS)
        if mech_cfg.get("kind", "laplace") != "laplace":
            raise ConfigError("only the 'laplace' mechanism is supported")
        model_cfg = dict(_section(raw, "model", None))
        if "model" not in raw:
            raise ConfigError("missing model section")
        if "bounds" in mech_cfg:
            if model_cfg.get("kind") != "regression":
                raise ConfigError("clamp bounds apply to the regression model only")
            model_cfg["bounds"] = mech_cfg["bounds"]
        self.model = model_from_config(model_cfg)
        self.model_config = model_cfg
        self.epsilon = _positive(mech_cfg.get("epsilon", 1.0), "mechanism.epsilon")

        data_cfg = _section(raw, "data", DATA_KEYS)
        self.n = int(data_cfg.get("n", 100))
        if self.n < 1:
            raise ConfigError("data.n must be positive")
        self.truth = data_cfg.get("truth", "fixture")
        if self.truth not in ("fixture", "prior"):
            raise ConfigError("data.truth must be 'fixture' or 'prior'")

        samp = dict(_section(raw, "sampler", SAMPLER_KEYS))
        if assert_bound:
            samp["assert_acceptance_bound"] = True
        try:
            self.chain = ChainConfig(seed=self.seed, **samp)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"sampler section: {exc}") from None

        self.io = {**IO_DEFAULTS, **_section(raw, "io", IO_KEYS)}
        self.experiment_kind = None
        self.experiment = None
        if "experiment" in raw:
            self.experiment_kind, self.experiment = self._experiment(raw["experiment"], preset)

    def _experiment(self, section, preset):
        if not isinstance(section, dict):
            raise ConfigError("experiment section must be a mapping")
        _check_keys(section, EXPERIMENT_KEYS, "experiment")
        kind = section.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"experiment.kind must be one of {KINDS}")
        args = dict(PRESETS[preset]) if preset else {}
        args.update({k: v for k, v in section.items() if k != "kind"})
        args.setdefault("n", self.n)
        args.setdefault("truth", self.truth)
        args.setdefault("order", self.chain.order)
        if "mode" not in args:
            args["mode"] = "fixed-parameters" if kind == "coverage" else "fixed-data"
        args["assert_acceptance_bound"] = True
        try:
            spec = ExperimentSpec(model=self.model_config, seed=self.seed, **args)
        except TypeError as exc:
            raise ConfigError(f"experiment section: {exc}") from None
        if kind == "coverage" and spec.mode != "fixed-parameters":
            raise ConfigError("coverage needs mode 'fixed-parameters'")
        if kind == "means" and spec.mode != "fixed-data":
            raise ConfigError("means needs mode 'fixed-data'")
        return kind, spec

    def path(self, out_dir, key, override=None):
        p = override or self.io[key]
        return p if os.path.isabs(p) else os.path.join(out_dir, p)

    def mechanism(self):
        return self.model.mechanism(self.epsilon)


def _check_keys(mapping, allowed, where):
    extra = set(mapping) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _section(raw, name, allowed):
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name} section must be a mapping")
    if allowed is not None:
        _check_keys(sec, allowed, name)
    return sec


def _positive(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number") from None
    if not value > 0:
        raise ConfigError(f"{name} must be positive")
    return value


def load_config(path, **kwargs):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    return RunConfig(raw if raw is not None else {}, **kwargs)


def _require_file(path, what):
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


# -- database IO --------------------------------------------------------------


def write_database(path, model, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(model.csv_header())
        w.writerows(model.records_to_rows(records))


def read_database(path, model):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    if rows[0] != model.csv_header():
        raise DataError(f"header {rows[0]} does not match the model schema {model.csv_header()}")
    body = rows[1:]
    if any(len(r) != len(rows[0]) for r in body):
        raise DataError("every row needs one value per header column")
    return model.rows_to_records(body)


# -- commands -----------------------------------------------------------------


def cmd_generate(cfg, out_dir, args):
    """Draw a confidential database from fixture or prior parameters."""
    model = cfg.model
    theta = true_parameters(model, cfg.truth, cfg.seed)
    records = model.sample_records(theta, cfg.n, RngStream(cfg.seed, (DATA,)))
    db_path = cfg.path(out_dir, "database", args.database)
    write_database(db_path, model, records)
    _write_json(cfg.path(out_dir, "parameters"),
                {"model": model.to_config(), "truth": cfg.truth, "seed": cfg.seed,
                 "stream_id": [PARAMS], "parameters": model.params_to_dict(theta)})
    return db_path


def cmd_privatize(cfg, out_dir, args):
    """Release the database's summary with Laplace noise."""
    db_path = _require_file(cfg.path(out_dir, "database", args.database), "database")
    records = read_database(db_path, cfg.model)
    s_dp = cfg.mechanism().release(records, RngStream(cfg.seed, (RELEASE,)))
    out = cfg.path(out_dir, "release", args.release)
    s_dp.save(out)
    return out


def cmd_sample(cfg, out_dir, args):
    """Run the sampler on a released output and write the trace."""
    path = _require_file(cfg.path(out_dir, "release", args.release), "released output")
    s_dp = PrivatizedOutput.load(path)
    mech = cfg.mechanism()
    mech.check_output(s_dp)
    if "n" not in s_dp.public:
        raise DataError("released output does not record the public database size n")
    trace = run_chain(cfg.chain, cfg.model, mech, s_dp)
    trace.meta["run_config"] = cfg.raw
    trace.meta["environment"] = environment()
    csv_path = cfg.path(out_dir, "trace")
    trace.write(csv_path, cfg.path(out_dir, "sidecar"))
    return csv_path


def cmd_experiment(cfg, out_dir, args):
    """Run the configured experiment and write its CSV outputs."""
    if cfg.experiment is None:
        raise ConfigError("config has no experiment section")
    run_experiment(cfg.experiment, cfg.experiment_kind, out_dir,
                   extra_manifest={"run_config": cfg.raw})
    return out_dir


COMMANDS = {
    "generate": cmd_generate,
    "privatize": cmd_privatize,
    "sample": cmd_sample,
    "experiment": cmd_experiment,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="privgibbs", description="Bayesian inference from privatized data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=func.__doc__.splitlines()[0])
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default=".", help="run directory (default: current)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                       help="experiment scale preset")
        p.add_argument("--assert-acceptance-bound", action="store_true",
                       help="abort if any acceptance probability falls below exp(-epsilon)")
        p.add_argument("--database", default=None, help="override io.database")
        p.add_argument("--release", default=None, help="override io.release")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed,
                          assert_bound=args.assert_acceptance_bound, preset=args.preset)
        if args.command == "experiment" and cfg.experiment is None:
            raise ConfigError("config has no experiment section")
        os.makedirs(args.out, exist_ok=True)
        result = COMMANDS[args.command](cfg, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
