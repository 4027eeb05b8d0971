import json

import pytest

from consensus_nids.consensus import FREEZE, ConvergenceError
from consensus_nids.dataset import ConfigError, SyntheticSpec, generate_synthetic, split
from consensus_nids.simulator import (
    CSV_COLUMNS,
    ConfusionCounts,
    DataSpec,
    SimulationConfig,
    TopologySpec,
    compare_consensus_vs_hierarchical,
    convergence_study,
    run_grid,
    run_simulation,
)

SMALL_DATA = DataSpec(n_records=400, generator=SyntheticSpec(2, 3, 4, 1.0))


def cfg(**kw):
    base = dict(topology=TopologySpec("torus", side=3), rounds=40, seed=3, data=SMALL_DATA)
    base.update(kw)
    return SimulationConfig(**base)


@pytest.fixture(scope="module")
def corpora():
    return split(generate_synthetic(1, 600, 0.5, SyntheticSpec(2, 3, 4, 1.0)), 0.7, 1)


def test_accuracy_formula():
    c = ConfusionCounts(tp=50, tn=30, fp=10, fn=10)
    assert c.accuracy == 0.8 and c.total == 100


def test_accuracy_empty():
    with pytest.raises(ZeroDivisionError):
        ConfusionCounts().accuracy


def test_confusion_record():
    c = ConfusionCounts()
    for truth, alert in [(True, True), (True, False), (False, True), (False, False), (True, True)]:
        c.record(truth, alert)
    assert (c.tp, c.fn, c.fp, c.tn) == (2, 1, 1, 1)


def test_petersen_ratio_06(corpora):
    report = run_simulation(cfg(topology=TopologySpec("petersen"), rounds=900), *corpora)
    assert all(it.anomalous_modules == 6 for it in report.iterations)
    assert len(report.iterations) * report.topology["n"] == 9000
    assert all(it.truth for it in report.iterations)


def test_ratio_zero_is_control(corpora):
    report = run_simulation(cfg(ratio=0.0), *corpora)
    assert not any(it.truth for it in report.iterations)
    c = report.confusion["hierarchical"]
    assert c.tp == c.fn == 0 and c.tn + c.fp == 40


def test_ratio_rounding(corpora):
    report = run_simulation(cfg(ratio=0.5, rounds=3), *corpora)
    assert report.iterations[0].anomalous_modules == 5  # 4.5 rounds half up


def test_invariants(corpora):
    report = run_simulation(cfg(rounds=60), *corpora)
    e = report.topology["edges"]
    n = report.topology["n"]
    for it in report.iterations:
        assert it.consensus_hops == it.rounds_used * 2 * e
        assert it.h_co == it.h_ce * (n - 1)
        assert it.h_ce == 12
    for c in report.confusion.values():
        assert c.total == 60


def test_deterministic(corpora):
    a = run_simulation(cfg(), *corpora)
    b = run_simulation(cfg(), *corpora)
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()


def test_deterministic_from_config():
    a = run_simulation(cfg(rounds=10))
    b = run_simulation(cfg(rounds=10))
    assert a.to_json() == b.to_json()


def test_seed_changes_draws(corpora):
    a = run_simulation(cfg(seed=1), *corpora)
    b = run_simulation(cfg(seed=2), *corpora)
    assert a.to_csv() != b.to_csv()


def test_tight_epsilon_matches_hierarchical(corpora):
    report = run_simulation(cfg(epsilon=1e-8, rounds=50, ratio=0.3), *corpora)
    assert report.summary()["max_joint_error"] <= 1e-4
    assert report.summary()["disagreement_iterations"] == 0
    assert report.confusion["consensus"] == report.confusion["hierarchical"]
    assert compare_consensus_vs_hierarchical(report) == {
        "accuracy_delta": 0.0, "disagreement_iterations": 0}


def test_freeze_mode_runs(corpora):
    report = run_simulation(cfg(mode=FREEZE, epsilon=1e-6), *corpora)
    assert report.summary()["disagreement_iterations"] == 0


def test_nonconvergence_raises(corpora):
    with pytest.raises(ConvergenceError, match="did not converge"):
        run_simulation(cfg(topology=TopologySpec("ring", n=49), max_consensus_rounds=5), *corpora)


def test_invalid_weights_rejected(corpora):
    with pytest.raises(ConfigError, match="contraction"):
        run_simulation(cfg(topology=TopologySpec("torus", side=4), scheme="max_degree"), *corpora)


@pytest.mark.parametrize("bad", [
    dict(epsilon=0.0), dict(tau=-1.0), dict(ratio=1.5), dict(rounds=0), dict(mode="lazy"),
    dict(data=DataSpec(synthetic=False)),
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        cfg(**bad).validate()


def test_report_serialisation(tmp_path, corpora):
    report = run_simulation(cfg(rounds=5), *corpora)
    paths = report.write(tmp_path)
    payload = json.loads(paths["report"].read_text())
    assert payload["summary"]["iterations"] == 5
    assert list(payload) == sorted(payload)
    lines = paths["iterations"].read_text().splitlines()
    assert lines[0].split(",") == CSV_COLUMNS and len(lines) == 6


def test_trace_callback(corpora):
    rows = []
    run_simulation(cfg(rounds=2), *corpora, trace=lambda *r: rows.append(r))
    assert {r[0] for r in rows} == {0, 1}
    assert {r[2] for r in rows} == set(range(9))


def test_convergence_study_ordering(corpora):
    rows = convergence_study(
        [TopologySpec("ring", n=25), TopologySpec("torus", side=5)],
        ["best_constant", "local_degree"], cfg(rounds=30), *corpora)
    mean = {(r["topology"], r["scheme"]): r["mean_rounds"] for r in rows}
    assert mean[("ring25", "best_constant")] > mean[("torus25", "best_constant")]
    assert mean[("torus25", "best_constant")] < mean[("torus25", "local_degree")]


def test_run_grid_parallel_matches_serial(corpora):
    cells = [(TopologySpec("petersen"), "metropolis"), (TopologySpec("ring", n=9), "best-constant")]
    assert run_grid(cells, cfg(rounds=10), *corpora, workers=2) == run_grid(
        cells, cfg(rounds=10), *corpora, workers=1)


def test_run_grid_empty():
    with pytest.raises(ConfigError):
        run_grid([], cfg())


def test_topology_spec_labels():
    assert TopologySpec("torus", side=11).label == "torus121"
    assert TopologySpec("random", n=10, edges=15, seed=4).build().num_edges == 15
    with pytest.raises(ConfigError):
        TopologySpec("file").build()
