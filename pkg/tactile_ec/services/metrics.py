import math
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd


@dataclass
class MetricsRow:
    trial: int
    object: str
    mu: float
    protocol: str
    variant: str
    phase: str
    localization_error_mm: Optional[float] = None
    line_angle_deg: Optional[float] = None
    line_distance_mm: Optional[float] = None
    tan_norm_mean: Optional[float] = None
    tan_norm_max: Optional[float] = None
    slip_mm: Optional[float] = None
    slip_deg: Optional[float] = None
    transition_success: Optional[bool] = None
    detection_latency: Optional[int] = None
    misalignment_deg: Optional[float] = None
    steps: int = 0
    failure: Optional[str] = None

    def __post_init__(self):
        for name in ("tan_norm_mean", "tan_norm_max"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.misalignment_deg is not None and not (0.0 <= self.misalignment_deg <= 180.0):
            raise ValueError("misalignment angle must lie in [0, 180]")

    def to_dict(self) -> dict:
        return asdict(self)


METRIC_COLUMNS = [f.name for f in fields(MetricsRow)]
NUMERIC_METRICS = [
    "localization_error_mm",
    "line_angle_deg",
    "line_distance_mm",
    "tan_norm_mean",
    "tan_norm_max",
    "slip_mm",
    "slip_deg",
    "misalignment_deg",
]
GROUP_COLUMNS = ["object", "mu", "protocol", "variant", "phase"]


def angle_between(a, b) -> float:
    """Angle in degrees between two vectors, nan when either vanishes"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return math.nan
    cos = float(np.clip(a @ b / (na * nb), -1.0, 1.0))
    return math.degrees(math.acos(cos))


def line_angle(direction_a, direction_b) -> float:
    """Angle between two undirected lines, in [0, 90] degrees"""
    angle = angle_between(direction_a, direction_b)
    return angle if math.isnan(angle) else min(angle, 180.0 - angle)


def point_line_distance(point, p1, p2) -> float:
    p, a, b = (np.asarray(x, dtype=float) for x in (point, p1, p2))
    u = (b - a) / np.linalg.norm(b - a)
    d = (p - a) - ((p - a) @ u) * u
    return float(np.linalg.norm(d))


def tangential_ratio(force) -> float:
    force = np.asarray(force, dtype=float)
    if force[2] <= 1e-12:
        return 0.0
    return float(np.linalg.norm(force[:2]) / force[2])


def ratio_stats(ratios: Sequence[float]):
    if not len(ratios):
        return None, None
    return float(np.mean(ratios)), float(np.max(ratios))


def rows_frame(rows: List[MetricsRow]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in rows], columns=METRIC_COLUMNS)


def summarize(rows: List[MetricsRow]) -> pd.DataFrame:
    """Mean and standard deviation of every metric per object / surface / protocol / variant / phase"""
    frame = rows_frame(rows)
    return summarize_frame(frame)


def summarize_frame(frame: pd.DataFrame) -> pd.DataFrame:
    columns = GROUP_COLUMNS + ["trials", "failures", "success_rate"]
    for metric in NUMERIC_METRICS:
        columns += [f"{metric}_mean", f"{metric}_std"]
    if frame.empty:
        return pd.DataFrame(columns=columns)

    out = []
    for keys, group in frame.groupby(GROUP_COLUMNS, sort=True, dropna=False):
        record = dict(zip(GROUP_COLUMNS, keys))
        record["trials"] = int(len(group))
        record["failures"] = int(group["failure"].notna().sum())
        success = group["transition_success"].dropna()
        record["success_rate"] = float(success.astype(bool).mean()) if len(success) else math.nan
        for metric in NUMERIC_METRICS:
            values = pd.to_numeric(group[metric], errors="coerce").dropna()
            record[f"{metric}_mean"] = float(values.mean()) if len(values) else math.nan
            record[f"{metric}_std"] = float(values.std(ddof=0)) if len(values) else math.nan
        out.append(record)
    return pd.DataFrame(out, columns=columns)
