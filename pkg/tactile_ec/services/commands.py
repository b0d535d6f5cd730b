"""Desired-rotation command generators.

Generators return nominal orientations as world-frame rotation offsets
``G(t)`` from the orientation at the start of the motion, ``G(0) = I``. The
gripper follows ``R(t) = G(t) @ R_start`` and the graph consumes the body
increments ``R(t-1)^T R(t)``.
"""
from typing import List, Optional, Sequence

import numpy as np

from tactile_ec.estimation.state import E_Z
from tactile_ec.geometry.lie import so3_exp

SINUSOID_PROGRESS = 0.5


def _horizontal_unit(v) -> np.ndarray:
    v = np.array(v, dtype=float).reshape(3)
    v[2] = 0.0
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("direction has no horizontal component")
    return v / n


def _tilt(angle: float, heading: float) -> np.ndarray:
    axis = np.array([np.cos(heading), np.sin(heading), 0.0])
    return so3_exp(angle * axis)


def conical_spiral(angle_deg: float, steps: int, turns: float = 2.0) -> List[np.ndarray]:
    """Tilt growing linearly to ``angle_deg`` while its heading sweeps ``turns`` revolutions"""
    angle = np.deg2rad(angle_deg)
    out = []
    for t in range(1, steps + 1):
        s = t / steps
        out.append(_tilt(angle * s, 2 * np.pi * turns * s))
    return out


def cone(angle_deg: float, steps: int, start_deg: float = 0.0, ramp: float = 0.25) -> List[np.ndarray]:
    """One revolution of a tilt cone, ramping from ``start_deg`` to ``angle_deg`` over the first ``ramp`` fraction"""
    angle, start = np.deg2rad(angle_deg), np.deg2rad(start_deg)
    out = []
    for t in range(1, steps + 1):
        s = t / steps
        tilt = start + (angle - start) * min(1.0, s / ramp) if ramp > 0 else angle
        out.append(_tilt(tilt, 2 * np.pi * s))
    return out


def tilt_axis(direction) -> np.ndarray:
    """Horizontal axis whose positive rotation lowers points lying along ``direction``"""
    return np.cross(E_Z, _horizontal_unit(direction))


def tilt_towards(direction, step_deg: float, steps: int) -> List[np.ndarray]:
    axis = tilt_axis(direction)
    step = np.deg2rad(step_deg)
    return [so3_exp(step * t * axis) for t in range(1, steps + 1)]


def sinusoid_about(progress_axis, sine_axis, amplitude_deg: float, periods: float, steps: int,
                   progress: float = SINUSOID_PROGRESS) -> List[np.ndarray]:
    """Progress about ``progress_axis`` with a sinusoid of rotation about ``sine_axis``.

    The progress reaches ``progress * amplitude`` by the last step.
    """
    u = _horizontal_unit(progress_axis)
    v = _horizontal_unit(sine_axis)
    amplitude = np.deg2rad(amplitude_deg)
    out = []
    for t in range(1, steps + 1):
        s = t / steps
        rotvec = progress * amplitude * s * u + amplitude * np.sin(2 * np.pi * periods * s) * v
        out.append(so3_exp(rotvec))
    return out


def rotate_about(axis, step_deg: float, steps: int) -> List[np.ndarray]:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    step = np.deg2rad(step_deg)
    return [so3_exp(step * t * a) for t in range(1, steps + 1)]


def body_increments(nominal: Sequence[np.ndarray], start_rotation: np.ndarray,
                    current_rotation: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """Gripper-frame increments realizing the nominal world offsets from ``start_rotation``.

    ``current_rotation`` is where the gripper is now when a phase continues
    an earlier one that shares its start orientation.
    """
    out = []
    previous = np.asarray(start_rotation if current_rotation is None else current_rotation, dtype=float)
    for G in nominal:
        current = G @ start_rotation
        out.append(previous.T @ current)
        previous = current
    return out


def rotation_angle(R: np.ndarray) -> float:
    """Rotation angle of a 3x3 rotation matrix in radians"""
    return float(np.arccos(np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)))
