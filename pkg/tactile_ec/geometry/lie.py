"""Rigid-transform algebra on SE(3) and SO(3).

Conventions used everywhere in the package:
    - twists are ordered [rotation; translation] (radians, meters)
    - perturbations act on the right, P (+) xi = P * exp(xi)
    - the adjoint maps right twists to left twists, P exp(xi) P^-1 = exp(Ad(P) xi)
"""
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.transform import Rotation

from tactile_ec.core.exceptions import DegenerateRotationError

SMALL_ANGLE = 1e-7
SERIES_ANGLE = 1e-2
PI_MARGIN = 1e-6
FD_STEP = 1e-6

_I3 = np.eye(3)


def hat(v) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def vee(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _rodrigues_coefficients(theta: float) -> Tuple[float, float, float]:
    """sin(t)/t, (1-cos(t))/t^2 and (t-sin(t))/t^3 with series below SERIES_ANGLE"""
    if theta < SERIES_ANGLE:
        t2 = theta * theta
        t4 = t2 * t2
        return (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
        )
    s, c = np.sin(theta), np.cos(theta)
    return s / theta, (1.0 - c) / theta ** 2, (theta - s) / theta ** 3


def so3_exp(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    a, b, _ = _rodrigues_coefficients(float(np.linalg.norm(phi)))
    P = hat(phi)
    return _I3 + a * P + b * (P @ P)


def so3_log(R: np.ndarray) -> np.ndarray:
    w = 0.5 * vee(R - R.T)
    s = float(np.linalg.norm(w))
    c = 0.5 * (float(np.trace(R)) - 1.0)
    theta = float(np.arctan2(s, c))
    if theta > np.pi - PI_MARGIN:
        raise DegenerateRotationError(theta)
    if theta < SMALL_ANGLE:
        return w * (1.0 + theta * theta / 6.0)
    return w * (theta / s)


def so3_left_jacobian(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    _, b, c = _rodrigues_coefficients(float(np.linalg.norm(phi)))
    P = hat(phi)
    return _I3 + b * P + c * (P @ P)


def so3_right_jacobian(phi) -> np.ndarray:
    return so3_left_jacobian(-np.asarray(phi, dtype=float))


def so3_left_jacobian_inverse(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    if theta < SERIES_ANGLE:
        t2 = theta * theta
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        d = 1.0 / theta ** 2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    P = hat(phi)
    return _I3 - 0.5 * P + d * (P @ P)


def so3_right_jacobian_inverse(phi) -> np.ndarray:
    return so3_left_jacobian_inverse(-np.asarray(phi, dtype=float))


def _se3_q(rho: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Coupling block of the SE(3) left Jacobian"""
    theta = float(np.linalg.norm(phi))
    if theta < SERIES_ANGLE:
        t2 = theta * theta
        c1 = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
        c2 = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0
        c3 = 1.0 / 120.0 - t2 / 2520.0
    else:
        s, c = np.sin(theta), np.cos(theta)
        c1 = (theta - s) / theta ** 3
        c2 = (theta ** 2 + 2.0 * c - 2.0) / (2.0 * theta ** 4)
        c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * theta ** 5)
    P = hat(phi)
    Rh = hat(rho)
    PR = P @ Rh
    RP = Rh @ P
    PRP = PR @ P
    return (
        0.5 * Rh
        + c1 * (PR + RP + PRP)
        + c2 * (P @ PR + RP @ P - 3.0 * PRP)
        + c3 * (PRP @ P + P @ PRP)
    )


def se3_left_jacobian(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    J = so3_left_jacobian(xi[:3])
    out = np.zeros((6, 6))
    out[:3, :3] = J
    out[3:, 3:] = J
    out[3:, :3] = _se3_q(xi[3:], xi[:3])
    return out


def se3_right_jacobian(xi) -> np.ndarray:
    return se3_left_jacobian(-np.asarray(xi, dtype=float))


def se3_left_jacobian_inverse(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    Jinv = so3_left_jacobian_inverse(xi[:3])
    out = np.zeros((6, 6))
    out[:3, :3] = Jinv
    out[3:, 3:] = Jinv
    out[3:, :3] = -Jinv @ _se3_q(xi[3:], xi[:3]) @ Jinv
    return out


def se3_right_jacobian_inverse(xi) -> np.ndarray:
    return se3_left_jacobian_inverse(-np.asarray(xi, dtype=float))


@dataclass(frozen=True, eq=False)
class Pose:
    """Element of SE(3); arrays are copied and frozen on construction"""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(_I3, np.zeros(3))

    @classmethod
    def from_rotvec(cls, rotvec=(0.0, 0.0, 0.0), translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(so3_exp(rotvec), translation)

    @classmethod
    def from_translation(cls, translation) -> "Pose":
        return cls(_I3, translation)

    @classmethod
    def from_matrix(cls, matrix) -> "Pose":
        matrix = np.asarray(matrix, dtype=float)
        R = matrix[:3, :3]
        if not np.allclose(R @ R.T, _I3, atol=1e-9) or np.linalg.det(R) < 0:
            raise ValueError("upper-left block is not a proper rotation")
        return cls(R, matrix[:3, 3])

    @classmethod
    def exp(cls, xi) -> "Pose":
        xi = np.asarray(xi, dtype=float)
        return cls(so3_exp(xi[:3]), so3_left_jacobian(xi[:3]) @ xi[3:])

    @classmethod
    def random(cls, rng: np.random.Generator, translation_scale: float = 1.0) -> "Pose":
        R = Rotation.random(random_state=rng).as_matrix()
        return cls(R, rng.normal(scale=translation_scale, size=3))

    def log(self) -> np.ndarray:
        phi = so3_log(self.rotation)
        return np.concatenate([phi, so3_left_jacobian_inverse(phi) @ self.translation])

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    __matmul__ = compose

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def retract(self, xi) -> "Pose":
        return self.compose(Pose.exp(xi))

    def local(self, other: "Pose") -> np.ndarray:
        """log(self^-1 * other)"""
        return self.inverse().compose(other).log()

    def adjoint(self) -> np.ndarray:
        out = np.zeros((6, 6))
        out[:3, :3] = self.rotation
        out[3:, 3:] = self.rotation
        out[3:, :3] = hat(self.translation) @ self.rotation
        return out

    def transform_point(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def as_matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def rotvec(self) -> np.ndarray:
        return Rotation.from_matrix(np.array(self.rotation)).as_rotvec()

    def is_valid(self, tol: float = 1e-9) -> bool:
        R = self.rotation
        return bool(np.allclose(R @ R.T, _I3, atol=tol) and abs(np.linalg.det(R) - 1.0) < tol)

    def allclose(self, other: "Pose", tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(self.local(other))) <= tol

    def to_list(self) -> List[float]:
        """[rotvec, translation] for line-delimited records"""
        return [float(x) for x in np.concatenate([self.rotvec(), self.translation])]

    def __repr__(self):
        r = np.array2string(self.rotvec(), precision=5)
        t = np.array2string(self.translation, precision=5)
        return f"Pose(rotvec={r}, translation={t})"


def compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def inverse(p: Pose) -> Pose:
    return p.inverse()


def exp(xi) -> Pose:
    return Pose.exp(xi)


def log(p: Pose) -> np.ndarray:
    return p.log()


def adjoint(p: Pose) -> np.ndarray:
    return p.adjoint()


def interpolate(a: Pose, b: Pose, s: float) -> Pose:
    return a.retract(s * a.local(b))


# A chain term is (pose, key, inverted). key None marks a constant factor.
ChainTerm = Tuple[Pose, Optional[Hashable], bool]


def chain_jacobians(terms: Sequence[ChainTerm]) -> Tuple[Pose, Dict[Hashable, np.ndarray]]:
    """Product X = F1...Fn and, per key, the 6x6 map M with X(V (+) d) ~ X exp(M d)"""
    factors = [pose.inverse() if inverted else pose for pose, _, inverted in terms]
    suffix = [Pose.identity()] * (len(factors) + 1)
    for k in range(len(factors) - 1, -1, -1):
        suffix[k] = factors[k].compose(suffix[k + 1])
    maps: Dict[Hashable, np.ndarray] = {}
    for k, (_, key, inverted) in enumerate(terms):
        if key is None:
            continue
        if inverted:
            M = -suffix[k].inverse().adjoint()
        else:
            M = suffix[k + 1].inverse().adjoint()
        maps[key] = maps[key] + M if key in maps else M
    return suffix[0], maps


def log_chain(terms: Sequence[ChainTerm]) -> Tuple[np.ndarray, Dict[Hashable, np.ndarray]]:
    X, maps = chain_jacobians(terms)
    xi = X.log()
    Jr_inv = se3_right_jacobian_inverse(xi)
    return xi, {key: Jr_inv @ M for key, M in maps.items()}


def translation_chain(terms: Sequence[ChainTerm]) -> Tuple[Pose, Dict[Hashable, np.ndarray]]:
    """Product X and the 3x6 Jacobians of its translation"""
    X, maps = chain_jacobians(terms)
    return X, {key: X.rotation @ M[3:, :] for key, M in maps.items()}


def rotation_log_chain(terms: Sequence[ChainTerm]) -> Tuple[np.ndarray, Dict[Hashable, np.ndarray]]:
    X, maps = chain_jacobians(terms)
    phi = so3_log(X.rotation)
    Jr_inv = so3_right_jacobian_inverse(phi)
    return phi, {key: Jr_inv @ M[:3, :] for key, M in maps.items()}


Variable = Union[Pose, np.ndarray]


def _perturb(value: Variable, index: int, step: float) -> Variable:
    if isinstance(value, Pose):
        d = np.zeros(6)
        d[index] = step
        return value.retract(d)
    out = np.array(value, dtype=float)
    out[index] += step
    return out


def _dimension(value: Variable) -> int:
    return 6 if isinstance(value, Pose) else int(np.size(value))


def numerical_jacobian(f: Callable[..., Variable], at: Sequence[Variable], step: float = FD_STEP) -> np.ndarray:
    """Central differences of f on the retraction of every argument, columns stacked in argument order"""
    at = list(at)
    f0 = f(*at)
    columns = []
    for i, value in enumerate(at):
        for j in range(_dimension(value)):
            plus = list(at)
            minus = list(at)
            plus[i] = _perturb(value, j, step)
            minus[i] = _perturb(value, j, -step)
            fp, fm = f(*plus), f(*minus)
            if isinstance(f0, Pose):
                diff = f0.local(fp) - f0.local(fm)
            else:
                diff = np.asarray(fp, dtype=float) - np.asarray(fm, dtype=float)
            columns.append(np.atleast_1d(diff) / (2.0 * step))
    return np.column_stack(columns)
