import csv
import json
import math

import numpy as np
import pytest

from privgibbs.errors import AcceptanceBoundViolation, ConfigError
from privgibbs.experiments import (LOGLINEAR_CLASS_PROBS, REGRESSION_BETA, ExperimentSpec,
                                   acceptance_experiment, check_acceptance, coverage_experiment,
                                   focus_names, posterior_mean_experiment, prior_focus_mean,
                                   run_experiment, runtime_benchmark, true_parameters)
from privgibbs.models import GridModel, LogLinearModel, RegressionModel

REG = {"kind": "regression"}
SMALL = dict(replicates=2, iterations=60, epsilons=(0.5, 5.0), n=30)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_spec_defaults_and_presets():
    spec = ExperimentSpec()
    assert spec.replicates == 100 and spec.iterations == 10000 and spec.burn_in == 5000
    assert spec.epsilons == (0.1, 0.3, 1.0, 3.0, 10.0) and spec.level == 0.9
    desk = ExperimentSpec.preset("desk")
    assert desk.replicates == 25 and desk.iterations == 4000 and desk.burn_in == 2000
    assert ExperimentSpec.preset("desk", replicates=3).replicates == 3


@pytest.mark.parametrize("kwargs", [{"replicates": 0}, {"level": 1.0}, {"epsilons": ()},
                                    {"epsilons": (1.0, -1.0)}, {"mode": "both"},
                                    {"truth": "oracle"}, {"timing_n": (1000, 1000)},
                                    {"iterations": 10, "burn_in": 20},
                                    {"model": {"kind": "probit"}}])
def test_spec_rejects(kwargs):
    with pytest.raises(ConfigError):
        ExperimentSpec(**kwargs)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        ExperimentSpec.preset("huge")


def test_truth_fixtures():
    ll = LogLinearModel(5, [3] * 5)
    theta = true_parameters(ll, "fixture", 0)
    assert abs(theta.class_probs.sum() - 1) < 1e-15
    np.testing.assert_allclose(theta.class_probs, np.array(LOGLINEAR_CLASS_PROBS) / 0.999)
    # feature probabilities are reproducible prior draws
    again = true_parameters(ll, "fixture", 0)
    assert np.array_equal(theta.feature_probs, again.feature_probs)
    reg = RegressionModel()
    assert np.array_equal(true_parameters(reg, "fixture", 0), REGRESSION_BETA)
    assert not np.array_equal(true_parameters(reg, "prior", 0), true_parameters(reg, "prior", 1))


def test_focus_names_and_prior_mean():
    ll = LogLinearModel(5, [3] * 5)
    assert focus_names(ll) == ["p_1", "p_2", "p_3", "p_4", "p_5"]
    np.testing.assert_allclose(prior_focus_mean(ll), 0.2)
    assert focus_names(RegressionModel()) == ["beta_0", "beta_1", "beta_2"]
    np.testing.assert_allclose(prior_focus_mean(RegressionModel()), 0.0)


def test_posterior_mean_experiment_shape_and_determinism():
    spec = ExperimentSpec(**SMALL)
    a = posterior_mean_experiment(spec)
    b = posterior_mean_experiment(spec)
    assert len(a.rows) == 4
    assert [(r["epsilon"], r["replicate"]) for r in a.rows] == \
        [(0.5, 0), (0.5, 1), (5.0, 0), (5.0, 1)]
    for ra, rb in zip(a.rows, b.rows):
        assert ra["mean"].tobytes() == rb["mean"].tobytes()
    assert a.by_epsilon("mean")[0.5].shape == (2, 5)
    assert a.confidential_mean.shape == (5,) and abs(a.confidential_mean.sum() - 1) < 1e-12


def test_fixed_data_shared_across_epsilons():
    spec = ExperimentSpec(**SMALL)
    full = posterior_mean_experiment(spec)
    one = posterior_mean_experiment(spec, epsilon_indices=[1])
    assert full.data_digest == one.data_digest
    # replicates at one epsilon do not depend on which other epsilons ran
    assert [r["mean"].tobytes() for r in full.rows[2:]] == [r["mean"].tobytes() for r in one.rows]
    # distinct replicates get distinct releases
    assert full.rows[0]["mean"].tobytes() != full.rows[1]["mean"].tobytes()


def test_workers_do_not_change_results():
    spec = ExperimentSpec(**SMALL)
    par = ExperimentSpec(**SMALL, workers=2)
    a, b = posterior_mean_experiment(spec), posterior_mean_experiment(par)
    assert [r["mean"].tobytes() for r in a.rows] == [r["mean"].tobytes() for r in b.rows]


def test_means_require_fixed_data():
    with pytest.raises(ConfigError):
        posterior_mean_experiment(ExperimentSpec(**SMALL, mode="fixed-parameters"))
    with pytest.raises(ConfigError):
        coverage_experiment(ExperimentSpec(**SMALL))


def test_acceptance_rows_respect_bound():
    for mode in ("fixed-data", "fixed-parameters"):
        result = acceptance_experiment(ExperimentSpec(**SMALL, mode=mode))
        for row in result.rows:
            assert row["acceptance_min"] >= math.exp(-row["epsilon"]) - 1e-12
            assert row["acceptance_mean"] >= row["acceptance_min"]


def test_check_acceptance_raises():
    row = {"epsilon": 1.0, "replicate": 0, "acceptance_min": 0.36, "acceptance_mean": 0.9}
    with pytest.raises(AcceptanceBoundViolation):
        check_acceptance([row])
    check_acceptance([dict(row, acceptance_min=math.exp(-1.0) - 1e-13)])


def test_coverage_table():
    spec = ExperimentSpec(**dict(SMALL, replicates=4), model=REG, mode="fixed-parameters")
    table, result = coverage_experiment(spec)
    assert table.hits.shape == (2, 3)
    assert np.all((table.coverage >= 0) & (table.coverage <= 1))
    assert table.names == ["beta_0", "beta_1", "beta_2"]
    # recount one cell by hand
    rows = [r for r in result.rows if r["epsilon"] == 5.0]
    hits = sum(r["lower"][1] <= REGRESSION_BETA[1] <= r["upper"][1] for r in rows)
    assert table.get(5.0, "beta_1") == hits / 4
    # the confidential database changes per replicate
    assert rows[0]["confidential_mean"].tobytes() != rows[1]["confidential_mean"].tobytes()


def test_runtime_benchmark_validation():
    model = RegressionModel()
    with pytest.raises(ConfigError):
        runtime_benchmark(model, [100, 100])
    with pytest.raises(ConfigError):
        runtime_benchmark(model, [100, 200], sweeps=10)


def test_runtime_benchmark_small():
    res = runtime_benchmark(RegressionModel(), [50, 100], sweeps=50, warmup=1)
    assert [r.n for r in res] == [50, 100]
    assert all(r.median_seconds > 0 and r.sweeps == 50 for r in res)


def test_run_experiment_outputs(tmp_path):
    spec = ExperimentSpec(**SMALL)
    manifest = run_experiment(spec, "acceptance", tmp_path)
    assert sorted(manifest["outputs"]) == ["acceptance.csv", "means.csv"]
    means = read_csv(tmp_path / "means.csv")
    assert means[0] == ["epsilon", "replicate", "p_1", "p_2", "p_3", "p_4", "p_5"]
    assert len(means) == 5
    acc = read_csv(tmp_path / "acceptance.csv")
    for row in acc[1:]:
        assert float(row[3]) >= float(row[5]) - 1e-12
    saved = json.loads((tmp_path / "manifest.json").read_text())
    assert saved["spec"]["replicates"] == 2 and saved["seed"] == 0
    assert "data_sha256" in saved["reference"]
    assert saved["environment"]["backend"] in ("cython", "python")


def test_run_experiment_coverage_and_timing(tmp_path):
    spec = ExperimentSpec(**SMALL, model=REG, mode="fixed-parameters",
                          timing_n=(40, 80), timing_sweeps=50)
    run_experiment(spec, "coverage", tmp_path / "cov")
    cov = read_csv(tmp_path / "cov" / "coverage.csv")
    assert cov[0] == ["epsilon", "replicates", "level", "beta_0", "beta_1", "beta_2"]
    assert cov[1][0] == "truth" and len(cov) == 4
    run_experiment(spec, "timing", tmp_path / "time")
    timing = read_csv(tmp_path / "time" / "timing.csv")
    assert [row[0] for row in timing[1:]] == ["40", "80"]
    assert float(timing[1][4]) == 1.0


def test_run_experiment_rejects_bad_kind(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment(ExperimentSpec(**SMALL), "histogram", tmp_path)
    with pytest.raises(ConfigError):
        run_experiment(ExperimentSpec(**SMALL), "coverage", tmp_path)


def test_grid_model_experiment():
    spec = ExperimentSpec(**SMALL, model={"kind": "grid", "grid_size": 21})
    result = posterior_mean_experiment(spec)
    assert result.names == focus_names(GridModel(21)) and len(result.rows) == 4
