import dataclasses
import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.pipeline.report import (
    PipelineStageError,
    RunConfig,
    RunSummary,
    emit_outputs,
    execute,
    load_summary,
    run_experiment,
    run_sweep,
)
from src.pipeline.tracking import PermutationResult, cycle_decomposition

OUTPUT_FILES = ("phases.csv", "crowding.csv", "histogram.csv", "permutation.json", "summary.json")


@pytest.fixture
def k2_config(tmp_path):
    return RunConfig(preset="k2", k=160, t=50.0, mixer_scale=5.0, out=tmp_path / "k2")


def test_config_requires_one_graph_source(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig()
    with pytest.raises(ValidationError):
        RunConfig(preset="k2", graph_text="n 2\n0 1")


@pytest.mark.parametrize("field, value", [("k", 0), ("t", 0.0), ("stride", 0), ("shots", 0),
                                          ("assignment", "random"), ("sweep", "0,5")])
def test_config_bounds(field, value):
    with pytest.raises(ValidationError):
        RunConfig(preset="k2", **{field: value})


def test_config_parses_sweep_string():
    assert RunConfig(preset="k2", sweep="160, 240,500").sweep == [160, 240, 500]


def test_single_edge_experiment(k2_config):
    summary = run_experiment(k2_config)
    assert (summary.c_star, summary.degeneracy) == (1, 2)
    assert summary.p_succ >= 0.95
    assert summary.median_dtheta_min <= summary.max_dtheta_min
    assert summary.snapshot_count == 160
    for name in OUTPUT_FILES:
        assert (k2_config.out / name).exists()


def test_outputs_are_consistent(k2_config):
    artifacts = execute(k2_config)
    out = k2_config.out
    assert load_summary(out / "summary.json") == artifacts.summary

    crowding = pd.read_csv(out / "crowding.csv", float_precision="round_trip")
    assert len(crowding) == artifacts.summary.snapshot_count
    assert crowding["dtheta_min"].max() == artifacts.summary.max_dtheta_min

    histogram = pd.read_csv(out / "histogram.csv", dtype={"bitstring": str},
                            float_precision="round_trip")
    assert list(histogram.columns) == ["bitstring", "probability", "cut_value", "is_optimal"]
    assert histogram["probability"].sum() == pytest.approx(1.0, abs=1e-9)
    optimal_mass = histogram.loc[histogram["is_optimal"], "probability"].sum()
    assert optimal_mass == pytest.approx(artifacts.summary.p_succ, abs=1e-12)

    phases = pd.read_csv(out / "phases.csv")
    assert list(phases.columns) == ["s", "band_index", "theta"]
    assert len(phases) == 4 * artifacts.summary.snapshot_count

    payload = json.loads((out / "permutation.json").read_text())
    assert payload["pi"] == artifacts.permutation.pi.tolist()
    assert len(payload["step_confidences"]) == artifacts.summary.snapshot_count - 1


def test_fixed_permutation_serialization(k2_config, tmp_path):
    artifacts = execute(k2_config, write=False)
    pi = np.array([1, 0, 2, 3])
    fixed = PermutationResult(pi=pi, cycles=cycle_decomposition(pi), nontrivial_cycle_count=1)
    emit_outputs(dataclasses.replace(artifacts, permutation=fixed), tmp_path / "fixed")
    payload = json.loads((tmp_path / "fixed" / "permutation.json").read_text())
    assert payload["pi"] == [1, 0, 2, 3]
    assert payload["cycles"] == [[0, 1], [2], [3]]
    assert payload["nontrivial_cycle_count"] == 1


def test_empty_graph_experiment(tmp_path):
    artifacts = execute(RunConfig(preset="empty2", k=40, t=10.0, out=tmp_path / "empty"))
    assert artifacts.summary.p_succ == pytest.approx(1.0, abs=1e-12)
    payload = json.loads((tmp_path / "empty" / "permutation.json").read_text())
    assert set(payload["manifold"]) == {"final_slots", "initial_slots", "slot_pairs", "band_count"}


def test_single_step_run(tmp_path):
    summary = run_experiment(RunConfig(preset="k3", k=1, t=1.0, out=tmp_path / "one"))
    assert summary.snapshot_count == 1
    assert summary.nontrivial_cycle_count == 0


def test_reproducible_bytes(tmp_path):
    first = RunConfig(preset="k3", k=50, t=20.0, shots=500, seed=3, out=tmp_path / "a")
    second = first.model_copy(update={"out": tmp_path / "b"})
    run_experiment(first)
    run_experiment(second)
    for name in OUTPUT_FILES + ("samples.csv",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_samples_written(tmp_path):
    run_experiment(RunConfig(preset="k2", k=20, t=5.0, shots=300, seed=1, out=tmp_path))
    samples = pd.read_csv(tmp_path / "samples.csv", dtype={"bitstring": str})
    assert samples["count"].sum() == 300


def test_graph_errors_are_stage_tagged(tmp_path):
    with pytest.raises(PipelineStageError) as excinfo:
        run_experiment(RunConfig(graph_text="n 3\n0 0", out=tmp_path))
    assert excinfo.value.stage == "graph"
    assert "line 2" in str(excinfo.value)


def test_oracle_size_errors_are_stage_tagged(tmp_path):
    with pytest.raises(PipelineStageError) as excinfo:
        run_experiment(RunConfig(graph_text="n 4\n0 1", max_qubits=3, out=tmp_path))
    assert excinfo.value.stage == "oracle"


def test_inline_graph_with_escaped_newlines(tmp_path):
    summary = run_experiment(RunConfig(graph_text="n 2\\n0 1", k=10, t=5.0, out=tmp_path))
    assert summary.c_star == 1


def test_sweep(tmp_path):
    cfg = RunConfig(preset="k3", t=20.0, sweep=[20, 40], out=tmp_path, workers=2)
    summaries = run_sweep(cfg)
    assert [s.k for s in summaries] == [20, 40]
    assert (tmp_path / "K20" / "summary.json").exists()
    assert (tmp_path / "K40" / "summary.json").exists()
    table = pd.read_csv(tmp_path / "sweep_summary.csv")
    assert table["k"].tolist() == [20, 40]


def test_summary_rejects_inverted_crowding_stats():
    with pytest.raises(ValidationError):
        RunSummary(n=2, num_edges=1, k=1, t=1.0, mixer_scale=5.0, c_star=1, degeneracy=2,
                   p_succ=0.5, median_dtheta_min=0.2, max_dtheta_min=0.1,
                   nontrivial_cycle_count=0, snapshot_count=1, min_tracking_confidence=1.0)


def test_refinement_check_is_reported(tmp_path):
    cfg = RunConfig(preset="k3", k=200, t=20.0, check_refinement=True, out=tmp_path / "refine")
    artifacts = execute(cfg)
    assert artifacts.schedule.snapshot_stride == 2
    refinement = artifacts.refinement
    np.testing.assert_array_equal(refinement.coarse_pi, artifacts.permutation.pi)
    payload = json.loads((tmp_path / "refine" / "permutation.json").read_text())
    assert payload["refinement"]["agree"] == refinement.agree
    assert payload["refinement"]["fine_pi"] == refinement.fine_pi.tolist()


def test_refinement_check_off_by_default(k2_config):
    artifacts = execute(k2_config, write=False)
    assert artifacts.refinement is None
