"""Residuals of the joint estimation-control least squares.

Every residual function is pure. Called with ``jacobians=True`` it also
returns one analytic Jacobian per positional variable argument, taken
with respect to the right perturbation of poses and the additive
perturbation of vectors. Grasp parameters enter as the 9-vector
[log kappa, log k, eta].
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np

from tactile_ec.core.config import NoiseProfile
from tactile_ec.core.exceptions import NonPositiveStiffnessError
from tactile_ec.estimation.state import E_Z, ContactFormation, GraspParams, StateNode
from tactile_ec.geometry.lie import (
    Pose,
    chain_jacobians,
    hat,
    log_chain,
    rotation_log_chain,
    so3_log,
    so3_right_jacobian_inverse,
    translation_chain,
)

E_X = np.array([1.0, 0.0, 0.0])
_Z36 = np.zeros((3, 6))


class FactorKind(str, Enum):
    PRIOR_GRASP = "prior_grasp"
    PRIOR_OBJECT = "prior_object"
    PRIOR_CONTACT = "prior_contact"
    GRIPPER_POSE = "gripper_pose"
    TACTILE_TOTAL = "tactile_total"
    TACTILE_INCREMENTAL = "tactile_incremental"
    GRASP_RIGIDITY = "grasp_rigidity"
    CONTACT_IN_OBJECT = "contact_in_object"
    CONTACT_ON_ENVIRONMENT = "contact_on_environment"
    CONTACT_CONVENTION = "contact_convention"
    TORQUE = "torque"
    WRENCH_TOTAL = "wrench_total"
    WRENCH_INCREMENTAL = "wrench_incremental"
    DESIRED_ROTATION = "desired_rotation"
    MOTION_EFFORT = "motion_effort"
    TACTILE_ENERGY = "tactile_energy"
    CONTACT_MAINTENANCE = "contact_maintenance"


GraspLike = Union[GraspParams, np.ndarray]


def _grasp_vector(K: GraspLike) -> np.ndarray:
    if isinstance(K, GraspParams):
        return K.to_vector()
    return np.asarray(K, dtype=float)


def _stiffness(K: GraspLike) -> np.ndarray:
    if isinstance(K, GraspParams):
        s = K.stiffness
    else:
        s = np.exp(np.asarray(K, dtype=float)[:6])
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise NonPositiveStiffnessError(f"stiffness must be positive and finite, got {s}")
    return s


def _ordered(maps: Dict[int, np.ndarray], count: int, rows: int) -> List[np.ndarray]:
    return [maps.get(i, np.zeros((rows, 6))) for i in range(count)]


def _finish(residual, jacobian_list, jacobians: bool):
    return (residual, jacobian_list) if jacobians else residual


# --- priors -----------------------------------------------------------------

def prior_grasp(K: GraspLike, K_prior: GraspLike, jacobians: bool = False):
    r = _grasp_vector(K) - _grasp_vector(K_prior)
    return _finish(r, [np.eye(9)], jacobians)


def prior_object(resting: Pose, prior: Pose, jacobians: bool = False):
    r, maps = log_chain([(prior, None, True), (resting, 0, False)])
    return _finish(r, [maps[0]], jacobians)


def prior_contact(contact: Pose, prior: Pose, jacobians: bool = False):
    r, maps = log_chain([(prior, None, True), (contact, 0, False)])
    return _finish(r, [maps[0]], jacobians)


def contact_convention(contact: Pose, formation: ContactFormation = ContactFormation.POINT, jacobians: bool = False):
    """Redundant contact rotation components: full rotation for point, z-axis tilt otherwise"""
    if formation == ContactFormation.POINT:
        phi = so3_log(contact.rotation)
        J = np.hstack([so3_right_jacobian_inverse(phi), np.zeros((3, 3))])
        return _finish(phi, [J], jacobians)
    z = contact.rotation @ E_Z
    J = np.hstack([-(contact.rotation @ hat(E_Z))[:2], np.zeros((2, 3))])
    return _finish(z[:2].copy(), [J], jacobians)


# --- measurement factors ----------------------------------------------------

def gripper_pose(gripper: Pose, measured: Pose, jacobians: bool = False):
    r, maps = log_chain([(measured, None, True), (gripper, 0, False)])
    return _finish(r, [maps[0]], jacobians)


def tactile_total(gripper: Pose, resting: Pose, equilibrium: Pose, delta, jacobians: bool = False):
    D = Pose.exp(delta)
    r, maps = log_chain([
        (D, None, True),
        (gripper, 0, True),
        (resting, 1, False),
        (equilibrium, 2, True),
        (gripper, 0, False),
    ])
    return _finish(r, _ordered(maps, 3, 6), jacobians)


def tactile_incremental(gripper_prev: Pose, equilibrium_prev: Pose, gripper: Pose, equilibrium: Pose,
                        delta_prev, delta, jacobians: bool = False):
    r, maps = log_chain([
        (Pose.exp(delta), None, True),
        (Pose.exp(delta_prev), None, False),
        (gripper_prev, 0, True),
        (equilibrium_prev, 1, False),
        (equilibrium, 3, True),
        (gripper, 2, False),
    ])
    return _finish(r, _ordered(maps, 4, 6), jacobians)


def grasp_rigidity(gripper_prev: Pose, resting_prev: Pose, gripper: Pose, resting: Pose, jacobians: bool = False):
    r, maps = log_chain([
        (resting_prev, 1, True),
        (gripper_prev, 0, False),
        (gripper, 2, True),
        (resting, 3, False),
    ])
    return _finish(r, _ordered(maps, 4, 6), jacobians)


def contact_in_object(equilibrium_prev: Pose, contact_prev: Pose, equilibrium: Pose, contact: Pose,
                      jacobians: bool = False):
    r, maps = log_chain([
        (contact_prev, 1, True),
        (equilibrium_prev, 0, False),
        (equilibrium, 2, True),
        (contact, 3, False),
    ])
    return _finish(r, _ordered(maps, 4, 6), jacobians)


def contact_on_environment(contact_prev: Pose, contact: Pose, jacobians: bool = False):
    r, maps = log_chain([(contact_prev, 0, True), (contact, 1, False)])
    return _finish(r, _ordered(maps, 2, 6), jacobians)


def _torque(gripper: Pose, w, contact: Pose, K: GraspLike):
    w = np.asarray(w, dtype=float)
    x = _grasp_vector(K)
    X, maps = chain_jacobians([(gripper, 0, True), (contact, 2, False)])
    lever = X.translation - x[6:9]
    M, F = w[:3], w[3:]
    r = M - np.cross(lever, F)
    return r, lever, F, X, maps


def torque_point(gripper: Pose, w, contact: Pose, K: GraspLike, jacobians: bool = False):
    r, lever, F, X, maps = _torque(gripper, w, contact, K)
    if not jacobians:
        return r
    Fx = hat(F)
    J_g = Fx @ X.rotation @ maps[0][3:, :]
    J_c = Fx @ X.rotation @ maps[2][3:, :]
    J_w = np.hstack([np.eye(3), -hat(lever)])
    J_K = np.hstack([np.zeros((3, 6)), -Fx])
    return r, [J_g, J_w, J_c, J_K]


def torque_line(gripper: Pose, w, contact: Pose, K: GraspLike, jacobians: bool = False):
    """Torque residual projected on the contact line direction seen from the gripper"""
    r_point, lever, F, X, maps = _torque(gripper, w, contact, K)
    axis = X.rotation @ E_X
    r = np.array([float(r_point @ axis)])
    if not jacobians:
        return r
    _, (J_g, J_w, J_c, J_K) = torque_point(gripper, w, contact, K, jacobians=True)
    d_axis = -X.rotation @ hat(E_X)
    J_g = axis @ J_g + r_point @ d_axis @ maps[0][:3, :]
    J_c = axis @ J_c + r_point @ d_axis @ maps[2][:3, :]
    return r, [J_g[None, :], (axis @ J_w)[None, :], J_c[None, :], (axis @ J_K)[None, :]]


def wrench_total(gripper: Pose, resting: Pose, equilibrium: Pose, w, K: GraspLike, jacobians: bool = False):
    delta, maps = log_chain([
        (gripper, 0, True),
        (resting, 1, False),
        (equilibrium, 2, True),
        (gripper, 0, False),
    ])
    s = _stiffness(K)
    r = np.asarray(w, dtype=float) - s * delta
    if not jacobians:
        return r
    poses = [-s[:, None] * J for J in _ordered(maps, 3, 6)]
    J_K = np.hstack([-np.diag(s * delta), np.zeros((6, 3))])
    return r, poses + [np.eye(6), J_K]


def wrench_incremental(gripper_prev: Pose, equilibrium_prev: Pose, w_prev, gripper: Pose, equilibrium: Pose, w,
                       K: GraspLike, jacobians: bool = False):
    xi, maps = log_chain([
        (gripper_prev, 0, True),
        (equilibrium_prev, 1, False),
        (equilibrium, 4, True),
        (gripper, 3, False),
    ])
    s = _stiffness(K)
    r = (np.asarray(w, dtype=float) - np.asarray(w_prev, dtype=float)) - s * xi
    if not jacobians:
        return r
    J_K = np.hstack([-np.diag(s * xi), np.zeros((6, 3))])
    return r, [
        -s[:, None] * maps[0],
        -s[:, None] * maps[1],
        -np.eye(6),
        -s[:, None] * maps[3],
        -s[:, None] * maps[4],
        np.eye(6),
        J_K,
    ]


# --- control factors ----------------------------------------------------------

def desired_rotation(gripper_prev: Pose, gripper: Pose, command, jacobians: bool = False):
    """command is the 3x3 commanded rotation increment in the gripper frame"""
    R_cmd = Pose(np.asarray(command, dtype=float), np.zeros(3))
    r, maps = rotation_log_chain([(R_cmd, None, True), (gripper_prev, 0, True), (gripper, 1, False)])
    return _finish(r, _ordered({k: v for k, v in maps.items()}, 2, 3), jacobians)


def motion_effort(gripper_prev: Pose, gripper: Pose, contact_prev: Pose, jacobians: bool = False):
    r, maps = log_chain([
        (contact_prev, 2, True),
        (gripper, 1, False),
        (gripper_prev, 0, True),
        (contact_prev, 2, False),
    ])
    return _finish(r, _ordered(maps, 3, 6), jacobians)


def tactile_energy(w, K: GraspLike, jacobians: bool = False):
    s = _stiffness(K)
    r = np.asarray(w, dtype=float) / np.sqrt(s)
    if not jacobians:
        return r
    J_K = np.hstack([np.diag(-0.5 * r), np.zeros((6, 3))])
    return r, [np.diag(1.0 / np.sqrt(s)), J_K]


def contact_maintenance(resting: Pose, equilibrium: Pose, contact: Pose, epsilon: float, jacobians: bool = False):
    """Hinge max(0, epsilon - zeta) on the offset distance zeta"""
    X, maps = translation_chain([
        (contact, 2, True),
        (resting, 0, False),
        (equilibrium, 1, True),
        (contact, 2, False),
    ])
    zeta = -float(X.translation[2])
    gap = epsilon - zeta
    r = np.array([max(0.0, gap)])
    if not jacobians:
        return r
    if gap <= 0.0:
        return r, [np.zeros((1, 6))] * 3
    return r, [J[2:3, :].copy() for J in _ordered(maps, 3, 3)]


# --- transition detection -----------------------------------------------------

def whitened_torque_residual(node: StateNode, K: GraspParams, noise: Optional[NoiseProfile] = None,
                             formation: Optional[ContactFormation] = None) -> float:
    """Relative torque violation of the formation's torque constraint, whitened by its noise"""
    formation = formation or node.contact.formation
    if formation == ContactFormation.PATCH:
        return 0.0
    noise = noise or NoiseProfile.default()
    sigma = np.asarray(noise.sigmas(FactorKind.TORQUE.value, formation.value), dtype=float)
    g, c = node.gripper.pose, node.contact.pose
    w = node.wrench.as_vector()
    fn = torque_point if formation == ContactFormation.POINT else torque_line
    r = fn(g, w, c, K)
    lever = float(np.linalg.norm(g.inverse().compose(c).translation - K.eta))
    scale = lever * float(np.linalg.norm(w[3:]))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(r / sigma) / np.linalg.norm(scale / sigma))


# --- factor container ---------------------------------------------------------

Key = Tuple[str, int]


def _weights(sigmas: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(sigmas), 0.0, 1.0 / sigmas)


@dataclass(frozen=True, eq=False)
class Factor:
    kind: FactorKind
    keys: Tuple[Key, ...]
    sigmas: np.ndarray
    function: Callable
    params: Dict[str, object] = field(default_factory=dict)
    formation: ContactFormation = ContactFormation.POINT

    def __post_init__(self):
        sigmas = np.asarray(self.sigmas, dtype=float).reshape(-1)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "_weights", _weights(sigmas))

    @property
    def dimension(self) -> int:
        return len(self.sigmas)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def residual(self, values: Dict[Hashable, object]) -> np.ndarray:
        return np.atleast_1d(self.function(*[values[k] for k in self.keys], **self.params))

    def whitened(self, values: Dict[Hashable, object]) -> np.ndarray:
        return self.residual(values) * self._weights

    def linearize(self, values: Dict[Hashable, object]) -> Tuple[np.ndarray, List[np.ndarray]]:
        r, Js = self.function(*[values[k] for k in self.keys], jacobians=True, **self.params)
        w = self._weights
        return np.atleast_1d(r) * w, [np.atleast_2d(J) * w[:, None] for J in Js]

    def cost(self, values: Dict[Hashable, object]) -> float:
        rw = self.whitened(values)
        return 0.5 * float(rw @ rw)


TORQUE_FUNCTIONS = {
    ContactFormation.POINT: torque_point,
    ContactFormation.LINE: torque_line,
}
