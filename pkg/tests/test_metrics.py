import math

import numpy as np
import pytest

from tactile_ec.services.metrics import (
    METRIC_COLUMNS,
    MetricsRow,
    angle_between,
    line_angle,
    point_line_distance,
    ratio_stats,
    rows_frame,
    summarize,
    tangential_ratio,
)


def _row(trial=0, phase="small", **kw):
    return MetricsRow(trial=trial, object="rectangle", mu=0.5, protocol="point", variant="proposed", phase=phase, **kw)


def test_angles():
    assert angle_between([1, 0, 0], [0, 1, 0]) == pytest.approx(90.0)
    assert angle_between([1, 0, 0], [-2, 0, 0]) == pytest.approx(180.0)
    assert math.isnan(angle_between([0, 0, 0], [1, 0, 0]))
    assert line_angle([1, 0, 0], [-1, 0.0, 0]) == pytest.approx(0.0)
    assert line_angle([1, 0, 0], [1, 1, 0]) == pytest.approx(45.0)
    assert line_angle([1, 0, 0], [-1, 1, 0]) == pytest.approx(45.0)


def test_point_line_distance_and_ratios():
    assert point_line_distance([0.0, 0.003, 0.0], [-1, 0, 0], [1, 0, 0]) == pytest.approx(0.003)
    assert tangential_ratio([3.0, 4.0, 10.0]) == pytest.approx(0.5)
    assert tangential_ratio([1.0, 0.0, -1.0]) == 0.0
    assert ratio_stats([]) == (None, None)
    assert ratio_stats([0.1, 0.3]) == (pytest.approx(0.2), pytest.approx(0.3))


def test_row_validation():
    with pytest.raises(ValueError):
        _row(tan_norm_mean=-0.1)
    with pytest.raises(ValueError):
        _row(misalignment_deg=200.0)
    assert set(_row().to_dict()) == set(METRIC_COLUMNS)


def test_summarize_groups_and_counts_failures():
    rows = [
        _row(0, tan_norm_mean=0.1, localization_error_mm=1.0),
        _row(1, tan_norm_mean=0.3, localization_error_mm=3.0),
        _row(2, failure="lost contact"),
        _row(0, phase="large", tan_norm_mean=0.2),
    ]
    table = summarize(rows)
    assert list(table["phase"]) == ["large", "small"]
    small = table[table["phase"] == "small"].iloc[0]
    assert small["trials"] == 3
    assert small["failures"] == 1
    assert small["tan_norm_mean_mean"] == pytest.approx(0.2)
    assert small["tan_norm_mean_std"] == pytest.approx(0.1)
    assert small["localization_error_mm_mean"] == pytest.approx(2.0)
    assert np.isnan(small["success_rate"])
    assert np.isnan(small["line_angle_deg_mean"])


def test_summarize_success_rate():
    rows = [_row(i, phase="line", transition_success=s) for i, s in enumerate([True, True, False, None])]
    table = summarize(rows)
    assert table.iloc[0]["success_rate"] == pytest.approx(2 / 3)


def test_empty_summary_keeps_columns():
    table = summarize([])
    assert table.empty
    assert "tan_norm_max_mean" in table.columns
    assert list(rows_frame([]).columns) == METRIC_COLUMNS
