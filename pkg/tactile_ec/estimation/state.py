from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from tactile_ec.core.exceptions import NonPositiveStiffnessError
from tactile_ec.geometry.lie import Pose

E_Z = np.array([0.0, 0.0, 1.0])


class ContactFormation(str, Enum):
    POINT = "point"
    LINE = "line"
    PATCH = "patch"

    def next(self) -> Optional["ContactFormation"]:
        order = [ContactFormation.POINT, ContactFormation.LINE, ContactFormation.PATCH]
        i = order.index(self)
        return order[i + 1] if i + 1 < len(order) else None

    @property
    def rank(self) -> int:
        return {"point": 0, "line": 1, "patch": 2}[self.value]


@dataclass(frozen=True)
class GripperPose:
    pose: Pose


@dataclass(frozen=True)
class ObjectPosePair:
    resting: Pose
    equilibrium: Pose


@dataclass(frozen=True, eq=False)
class IntrinsicWrench:
    moment: np.ndarray
    force: np.ndarray

    @classmethod
    def from_vector(cls, w) -> "IntrinsicWrench":
        w = np.asarray(w, dtype=float)
        return cls(w[:3].copy(), w[3:].copy())

    @classmethod
    def zero(cls) -> "IntrinsicWrench":
        return cls(np.zeros(3), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.moment, self.force])


@dataclass(frozen=True)
class ContactPose:
    pose: Pose
    formation: ContactFormation


@dataclass(frozen=True, eq=False)
class GraspParams:
    """Decoupled grasp stiffness (kappa, k) about the compliance center eta"""

    kappa: np.ndarray
    k: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        for name in ("kappa", "k", "eta"):
            value = np.array(getattr(self, name), dtype=float).reshape(3)
            object.__setattr__(self, name, value)
        if np.any(self.kappa <= 0) or np.any(self.k <= 0):
            raise NonPositiveStiffnessError(f"stiffness must be positive, got kappa={self.kappa}, k={self.k}")

    @property
    def stiffness(self) -> np.ndarray:
        return np.concatenate([self.kappa, self.k])

    def to_vector(self) -> np.ndarray:
        """Graph parametrization [log kappa, log k, eta]"""
        return np.concatenate([np.log(self.kappa), np.log(self.k), self.eta])

    @classmethod
    def from_vector(cls, x) -> "GraspParams":
        x = np.asarray(x, dtype=float)
        return cls(np.exp(x[:3]), np.exp(x[3:6]), x[6:9])

    def scaled(self, factors) -> "GraspParams":
        factors = np.asarray(factors, dtype=float)
        return GraspParams(self.kappa * factors[:3], self.k * factors[3:6], self.eta)


@dataclass(frozen=True)
class StateNode:
    index: int
    gripper: GripperPose
    object: ObjectPosePair
    wrench: IntrinsicWrench
    contact: ContactPose


def displacement(gripper: Pose, resting: Pose, equilibrium: Pose) -> np.ndarray:
    return gripper.inverse().compose(resting).compose(equilibrium.inverse()).compose(gripper).log()


def tactile_displacement(node: StateNode) -> np.ndarray:
    return displacement(node.gripper.pose, node.object.resting, node.object.equilibrium)


def offset(resting: Pose, equilibrium: Pose, contact: Pose) -> float:
    X = contact.inverse().compose(resting).compose(equilibrium.inverse()).compose(contact)
    return -float(X.translation[2])


def offset_distance(node: StateNode) -> float:
    return offset(node.object.resting, node.object.equilibrium, node.contact.pose)


def project_contact_rotation(pose: Pose, formation: ContactFormation) -> Pose:
    """Snap the redundant rotation components of a contact pose onto the environment conventions"""
    if formation == ContactFormation.POINT:
        return Pose(np.eye(3), pose.translation)
    x = pose.rotation[:, 0].copy()
    x[2] = 0.0
    n = np.linalg.norm(x)
    if n < 1e-12:
        # x-axis was vertical; fall back to the y-axis projection
        y = pose.rotation[:, 1].copy()
        y[2] = 0.0
        x = np.cross(y / np.linalg.norm(y), E_Z)
    else:
        x = x / n
    y = np.cross(E_Z, x)
    return Pose(np.column_stack([x, y, E_Z]), pose.translation)


def node_record(node: StateNode) -> dict:
    return {
        "t": node.index,
        "gripper": node.gripper.pose.to_list(),
        "resting": node.object.resting.to_list(),
        "equilibrium": node.object.equilibrium.to_list(),
        "wrench": [float(x) for x in node.wrench.as_vector()],
        "contact": node.contact.pose.to_list(),
        "formation": node.contact.formation.value,
        "tactile": [float(x) for x in tactile_displacement(node)],
        "offset": offset_distance(node),
    }
