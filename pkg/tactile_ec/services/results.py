import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import pandas as pd

from tactile_ec.core.config import Scenario
from tactile_ec.core.exceptions import ResultsIOError
from tactile_ec.services.metrics import METRIC_COLUMNS, MetricsRow, rows_frame, summarize, summarize_frame

logger = logging.getLogger(__name__)

LOG_FORMAT = "tactile-ec-log"
LOG_VERSION = 1
FLOAT_FORMAT = "%.6f"
FORMATS = ("csv", "jsonl", "both")

TIMESERIES_VECTORS = {
    "tactile_true": 6,
    "tactile_measured": 6,
    "wrench_est": 6,
    "command_rotvec": 3,
    "achieved_rotvec": 3,
}
TIMESERIES_SCALARS = [
    "trial", "t", "phase", "formation_true", "formation_est", "torque_residual", "threshold",
    "offset_est", "offset_true", "tan_norm", "slip_mm", "slip_deg",
]


def json_safe(value):
    """JSON-safe copy: non-finite floats become strings or null"""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def _dumps(record: dict) -> str:
    return json.dumps(json_safe(record), sort_keys=True, separators=(",", ":"))


def header(scenario: Optional[Scenario] = None) -> dict:
    out = {"format": LOG_FORMAT, "version": LOG_VERSION}
    if scenario is not None:
        out["scenario"] = scenario.model_dump()
    return out


def timeseries_frame(steps: Iterable[dict]) -> pd.DataFrame:
    """Flattened per-step panels: tactile displacement, wrench, commanded vs achieved rotation, residual, offset"""
    columns = list(TIMESERIES_SCALARS)
    for name, size in TIMESERIES_VECTORS.items():
        columns += [f"{name}_{i}" for i in range(size)]
    records = []
    for step in steps:
        record = {k: step.get(k) for k in TIMESERIES_SCALARS}
        for name, size in TIMESERIES_VECTORS.items():
            values = step.get(name) or [None] * size
            record.update({f"{name}_{i}": values[i] for i in range(size)})
        records.append(record)
    return pd.DataFrame(records, columns=columns)


def _write_csv(frame: pd.DataFrame, path: Path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def emit_results(rows: List[MetricsRow], out_dir, fmt: str = "both", steps: Optional[List[dict]] = None,
                 scenario: Optional[Scenario] = None, table: Optional[pd.DataFrame] = None,
                 emit_plots_data: bool = False) -> Dict[str, Path]:
    """Write trial metrics, aggregated tables and the line-delimited log; returns the written paths"""
    if fmt not in FORMATS:
        raise ValueError(f"unknown results format '{fmt}', expected one of {FORMATS}")
    out_dir = Path(out_dir)
    written: Dict[str, Path] = {}
    current = out_dir
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt in ("csv", "both"):
            current = out_dir / "trials.csv"
            _write_csv(rows_frame(rows), current)
            written["trials"] = current
            current = out_dir / "summary.csv"
            _write_csv(summarize(rows), current)
            written["summary"] = current
            if table is not None:
                current = out_dir / "misalignment.csv"
                _write_csv(table, current)
                written["misalignment"] = current
            if emit_plots_data:
                current = out_dir / "timeseries.csv"
                _write_csv(timeseries_frame(steps or []), current)
                written["timeseries"] = current
        if fmt in ("jsonl", "both"):
            current = out_dir / "log.jsonl"
            write_log(current, rows, steps or [], scenario)
            written["log"] = current
    except OSError as e:
        logger.error(f"Error writing results: {str(e)}")
        raise ResultsIOError(current, e)

    for name, path in written.items():
        logger.info(f"Wrote {name} to {path}")
    return written


def write_log(path, rows: List[MetricsRow], steps: List[dict], scenario: Optional[Scenario] = None):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(_dumps(header(scenario)) + "\n")
        for row in rows:
            handle.write(_dumps({"type": "row", **row.to_dict()}) + "\n")
        for step in steps:
            handle.write(_dumps({"type": "step", **step}) + "\n")


def read_log(path) -> Tuple[dict, List[dict], List[dict]]:
    """Header, metric rows and step records of a line-delimited log"""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            lines = [line for line in handle if line.strip()]
    except OSError as e:
        raise ResultsIOError(path, e)
    if not lines:
        raise ResultsIOError(path, ValueError("empty log"))
    try:
        records = [json.loads(line) for line in lines]
    except json.JSONDecodeError as e:
        raise ResultsIOError(path, e)
    head = records[0]
    if head.get("format") != LOG_FORMAT:
        raise ResultsIOError(path, ValueError(f"not a {LOG_FORMAT} file"))
    if head.get("version") != LOG_VERSION:
        raise ResultsIOError(path, ValueError(f"unsupported log version {head.get('version')}"))
    rows = [r for r in records[1:] if r.get("type") == "row"]
    steps = [r for r in records[1:] if r.get("type") == "step"]
    return head, rows, steps


def replay(path) -> pd.DataFrame:
    """Summary table recomputed from a line-delimited log"""
    _, rows, _ = read_log(path)
    frame = pd.DataFrame([{k: r.get(k) for k in METRIC_COLUMNS} for r in rows], columns=METRIC_COLUMNS)
    return summarize_frame(frame)
