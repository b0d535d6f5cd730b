import pytest
import yaml

from tactile_ec.cli import build_parser, main
from tactile_ec.core.exceptions import NonPositiveStiffnessError
from tactile_ec.services.experiments import TrialRunner
from tactile_ec.services.metrics import MetricsRow
from tactile_ec.services.results import emit_results


def _short_config(tmp_path):
    path = tmp_path / "short.yaml"
    path.write_text(yaml.safe_dump({
        "trials": 1,
        "controller": {"spiral_steps": 2, "cone_steps": 2, "spiral_turns": 0.5},
        "solver": {"horizon": 2, "max_iterations": 20},
    }))
    return str(path)


def test_parser_accepts_the_documented_flags():
    args = build_parser().parse_args([
        "run", "multi", "--object", "hexagon", "--mu", "0.3", "--trials", "2", "--seed", "9",
        "--variant", "constant-tactile", "--format", "csv", "--emit-plots-data", "--workers", "1",
    ])
    assert (args.command, args.protocol, args.object, args.mu, args.trials, args.seed) == (
        "run", "multi", "hexagon", 0.3, 2, 9)
    assert args.variant == "constant-tactile"
    assert args.fmt == "csv"
    assert args.emit_plots_data


def test_parser_rejects_unknown_choices():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "sideways"])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "point", "--format", "xml"])


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "point", "--config", _short_config(tmp_path), "--out", str(out), "--emit-plots-data"])
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"trials.csv", "summary.csv", "timeseries.csv", "log.jsonl"}


def test_replay_writes_summary(tmp_path):
    rows = [MetricsRow(0, "rectangle", 0.5, "point", "proposed", "small", tan_norm_mean=0.2)]
    log = emit_results(rows, tmp_path, fmt="jsonl")["log"]
    target = tmp_path / "replayed" / "summary.csv"
    assert main(["replay", str(log), "--out", str(target)]) == 0
    assert target.read_text().startswith("object,mu,protocol,variant,phase,trials")


def test_package_errors_return_exit_code_2(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format": "other"}\n')
    assert main(["replay", str(bad)]) == 2
    assert main(["run", "point", "--mu", "-1", "--out", str(tmp_path / "x")]) == 2


def test_run_records_trial_errors_and_succeeds(tmp_path, monkeypatch):
    def build_graph(self, *args, **kwargs):
        raise NonPositiveStiffnessError("stiffness must be positive and finite")

    monkeypatch.setattr(TrialRunner, "build_graph", build_graph)
    out = tmp_path / "out"
    assert main(["run", "point", "--config", _short_config(tmp_path), "--out", str(out), "--format", "csv"]) == 0
    assert "stiffness must be positive" in (out / "trials.csv").read_text()
