import math

import numpy as np
import pandas as pd
import pytest

from tactile_ec.core.config import load_scenario
from tactile_ec.core.exceptions import NonPositiveStiffnessError
from tactile_ec.services import experiments
from tactile_ec.services.experiments import (
    FORCE_VARIANTS,
    ExperimentOutcome,
    TrialResult,
    TrialRunner,
    energy_minimizer_gap,
    misalignment_table,
)
from tactile_ec.services.metrics import MetricsRow

STEP_KEYS = {
    "trial", "t", "phase", "formation_true", "formation_est", "gripper", "tactile_true", "tactile_measured",
    "wrench_est", "stiffness_est", "command_rotvec", "achieved_rotvec", "torque_residual", "threshold",
    "offset_est", "offset_true", "contact_est", "contact_true", "tan_norm", "slip_mm", "slip_deg", "ft",
    "force_est", "misalignment", "iterations", "cost", "event",
}


def short_scenario(**overrides):
    """A few steps per phase so the closed loop runs in seconds"""
    base = {
        "trials": 1,
        "seed": 3,
        "controller": {"spiral_steps": 3, "cone_steps": 3, "spiral_turns": 0.5},
        "solver": {"horizon": 2, "max_iterations": 20},
    }
    base.update(overrides)
    return load_scenario(None, **base)


def _force_row(trial, phase, angle, obj="rectangle"):
    return MetricsRow(trial, obj, 0.5, "force-eval", "proposed", phase, misalignment_deg=angle)


def test_runner_is_seeded_per_trial():
    scenario = short_scenario()
    a, b = TrialRunner(scenario, 2), TrialRunner(scenario, 2)
    assert a.seed == scenario.seed + 2
    assert np.array_equal(a.model.vertices_in_grasp, b.model.vertices_in_grasp)
    assert np.allclose(a.truth.stiffness.stiffness, b.truth.stiffness.stiffness)
    assert not np.allclose(a.truth.stiffness.stiffness, TrialRunner(scenario, 3).truth.stiffness.stiffness)


def test_start_presses_the_object_onto_the_surface():
    runner = TrialRunner(short_scenario(), 0)
    state = runner.start(experiments.POINT_TILT_DEG)
    assert state.in_contact
    assert state.extrinsic_wrench[5] > 0


def test_point_trial_produces_both_phases():
    result = experiments.point_trial(short_scenario(), 0)
    assert [row.phase for row in result.rows] == ["small", "large"]
    if result.failure is None:
        assert len(result.steps) == 6
        assert STEP_KEYS <= set(result.steps[0])
        assert all(row.steps == 3 for row in result.rows)
        assert all(row.localization_error_mm is not None for row in result.rows)
    else:
        assert all(row.failure for row in result.rows if row.steps == 0)


def test_force_trial_rows_per_estimate_variant():
    result = experiments.force_trial(short_scenario(protocol="force-eval"), 0)
    assert [row.phase for row in result.rows] == list(FORCE_VARIANTS)
    for row in result.rows:
        assert row.misalignment_deg is None or 0.0 <= row.misalignment_deg <= 180.0


def test_runs_are_reproducible_and_thread_count_independent():
    scenario = short_scenario(trials=2)
    sequential = experiments.run_point_experiment(scenario, workers=1)
    threaded = experiments.run_point_experiment(scenario, workers=2)
    assert [t.trial for t in threaded.trials] == [0, 1]
    pd.testing.assert_frame_equal(
        pd.DataFrame([r.to_dict() for r in sequential.rows]),
        pd.DataFrame([r.to_dict() for r in threaded.rows]),
    )


def test_experiment_outcome_flattens_trials():
    rows = [_force_row(0, "full", 10.0)]
    outcome = ExperimentOutcome(short_scenario(), [TrialResult(0, 3, rows, [{"t": 1}]), TrialResult(1, 4, rows)])
    assert len(outcome.rows) == 2
    assert outcome.steps == [{"t": 1}]


def test_misalignment_table_orders_variants():
    rows = [
        _force_row(0, "no-K", 30.0),
        _force_row(0, "full", 10.0),
        _force_row(1, "full", 20.0),
        _force_row(0, "no-delta", None),
        MetricsRow(0, "rectangle", 0.5, "point", "proposed", "small"),
    ]
    table = misalignment_table(rows)
    assert list(table["variant"]) == ["full", "no-delta", "no-K"]
    full = table.iloc[0]
    assert full["mean_misalignment_deg"] == pytest.approx(15.0)
    assert full["trials"] == 2
    assert math.isnan(table.iloc[1]["mean_misalignment_deg"])
    assert misalignment_table([]).empty


def test_energy_minimizer_gap():
    grid = pd.DataFrame({"energy": [3.0, 1.0, 2.0], "ratio": [0.05, 0.06, 0.01]})
    assert energy_minimizer_gap(grid) == pytest.approx(0.05)
    assert math.isnan(energy_minimizer_gap(grid.iloc[0:0]))


def test_energy_minimizer_gap_is_scaled_by_the_normal_force():
    # a near-zero tangential minimum must not inflate the gap
    grid = pd.DataFrame({"energy": [2.0, 1.0], "ratio": [1e-6, 3e-3]})
    assert energy_minimizer_gap(grid) == pytest.approx(3e-3 - 1e-6)
    assert energy_minimizer_gap(grid) <= 0.05


def test_energy_grid_columns():
    frame = experiments.energy_tangential_grid(short_scenario(), span_deg=2.0, points=3)
    assert list(frame.columns) == ["rx_deg", "ry_deg", "energy", "normal", "tangential", "ratio"]
    assert (frame["normal"] > 0).all()
    assert len(frame) <= 9


def _solver_breaks(monkeypatch):
    def build_graph(self, *args, **kwargs):
        raise NonPositiveStiffnessError("stiffness must be positive and finite")

    monkeypatch.setattr(TrialRunner, "build_graph", build_graph)


def test_solver_errors_become_failure_rows(monkeypatch):
    _solver_breaks(monkeypatch)
    outcome = experiments.run_point_experiment(short_scenario(trials=2), workers=1)
    assert len(outcome.trials) == 2
    assert all("stiffness" in t.failure for t in outcome.trials)
    assert {(r.trial, r.phase) for r in outcome.rows} == {(0, "small"), (0, "large"), (1, "small"), (1, "large")}
    assert all(r.failure for r in outcome.rows)

    multi = experiments.multi_trial(short_scenario(), 0)
    assert [r.phase for r in multi.rows] == ["point", "line", "patch"]
    assert "stiffness" in multi.failure


def test_disabled_transition_detection_leaves_line_metrics_absent():
    controller = {"spiral_steps": 3, "cone_steps": 3, "spiral_turns": 0.5, "tilt_max_steps": 3,
                  "detection_threshold": 1e9}
    result = experiments.multi_trial(short_scenario(controller=controller), 0)
    line = next(r for r in result.rows if r.phase == "line")
    assert line.transition_success is False
    assert line.line_angle_deg is None
    assert line.line_distance_mm is None
    assert result.failure
