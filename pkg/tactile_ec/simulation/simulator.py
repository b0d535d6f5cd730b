"""Quasi-static rigid object in a compliant grasp against a flat frictional plane.

The object frame is the gripper frame at rest, so the resting object pose
always equals the gripper pose and the equilibrium pose ``eo`` is the only
unknown. Elastic energy of the grasp is

    E = sum(s * d**2 / 2 + s * c * d**4 / 4),   d = log(eo^-1 g)

with stiffness ``s = [kappa, k]`` and cubic stiffening ``c``. Active contacts
stick: a point contact leaves the rotation about the vertex free, a line
contact the rotation about the edge, a patch nothing.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares

from tactile_ec.core.config import SimulationConfig
from tactile_ec.core.exceptions import InfeasibleGeometryError
from tactile_ec.estimation.state import E_Z, ContactFormation, GraspParams
from tactile_ec.geometry.lie import (
    Pose,
    hat,
    interpolate,
    se3_right_jacobian,
    se3_right_jacobian_inverse,
    so3_exp,
    so3_right_jacobian,
)
from tactile_ec.simulation.objects import ObjectModel

logger = logging.getLogger(__name__)

GRAVITY = 9.81
PENETRATION_TOL = 1e-10
COPLANAR_TOL = 1e-6
TENSION_TOL = 1e-9
# numerical penetration a vertex may keep at the pose where it was released
RELEASE_TOL = 1e-7
POLISH_ITERATIONS = 8
POLISH_STEP = 1e-7
POLISH_TOL = 1e-14
MAX_EVENTS = 12
# keeps the gravity residual argument positive for any height within a metre
GRAVITY_OFFSET = 1.0


@dataclass(frozen=True, eq=False)
class GroundTruth:
    stiffness: GraspParams
    mu: float
    stiffening: np.ndarray = field(default_factory=lambda: np.zeros(6))
    gravity: bool = False
    mass: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "stiffening", np.array(self.stiffening, dtype=float).reshape(6))

    @classmethod
    def sample(cls, config: SimulationConfig, mu: float, rng: np.random.Generator) -> "GroundTruth":
        """True stiffness drawn uniformly within the configured spread around the grasp prior"""
        prior = GraspParams(config.grasp_prior.kappa, config.grasp_prior.k, np.zeros(3))
        spread = config.stiffness_spread
        factors = rng.uniform(1 - spread, 1 + spread, size=6)
        return cls(prior.scaled(factors), mu, np.array(config.stiffening), config.gravity, config.object_mass)

    @property
    def linear(self) -> bool:
        return not np.any(self.stiffening)


@dataclass(frozen=True, eq=False)
class ContactSet:
    active: Tuple[int, ...]
    anchors: np.ndarray
    reference: Optional[Pose] = None

    def __post_init__(self):
        object.__setattr__(self, "anchors", np.array(self.anchors, dtype=float).reshape(-1, 3))

    @classmethod
    def free(cls) -> "ContactSet":
        return cls((), np.zeros((0, 3)), None)

    @property
    def formation(self) -> Optional[ContactFormation]:
        n = len(self.active)
        if n == 0:
            return None
        if n == 1:
            return ContactFormation.POINT
        if n == 2:
            return ContactFormation.LINE
        return ContactFormation.PATCH


@dataclass(frozen=True, eq=False)
class Equilibrium:
    gripper: Pose
    pose: Pose
    contacts: ContactSet
    params: np.ndarray
    tactile: np.ndarray
    grasp_wrench: np.ndarray
    forces: np.ndarray
    balance_residual: float

    @property
    def formation(self) -> Optional[ContactFormation]:
        return self.contacts.formation

    @property
    def extrinsic_wrench(self) -> np.ndarray:
        """Environment reaction on the object, [moment about world origin; force] in the world frame"""
        force = self.forces.sum(axis=0) if len(self.forces) else np.zeros(3)
        moment = np.zeros(3)
        for p, f in zip(self.contacts.anchors, self.forces):
            moment += np.cross(p, f)
        return np.concatenate([moment, force])


@dataclass(frozen=True, eq=False)
class SimulatorState:
    step: int
    gripper: Pose
    equilibrium: Pose
    formation: Optional[ContactFormation]
    active: Tuple[int, ...]
    anchors: np.ndarray
    forces: np.ndarray
    tactile: np.ndarray
    grasp_wrench: np.ndarray
    extrinsic_wrench: np.ndarray
    balance_residual: float
    initial_contact: Optional[np.ndarray] = None
    slip_distance: float = 0.0
    slip_rotation: float = 0.0

    @property
    def in_contact(self) -> bool:
        return self.formation is not None

    @property
    def tangential_ratio(self) -> float:
        force = self.extrinsic_wrench[3:]
        if force[2] <= TENSION_TOL:
            return 0.0
        return float(np.linalg.norm(force[:2]) / force[2])

    @property
    def contact_point(self) -> Optional[np.ndarray]:
        if not len(self.anchors):
            return None
        return self.anchors.mean(axis=0)


@dataclass(frozen=True, eq=False)
class MeasurementSample:
    gripper: Pose
    tactile: np.ndarray
    timestamp: int


class ContactSimulator:
    """Ground-truth oracle: one instance per trial"""

    def __init__(self, model: ObjectModel, truth: GroundTruth, gripper_sigma=(0.0, 0.0),
                 tactile_sigma: float = 0.0, seed: Optional[int] = None, slip: bool = True):
        self.model = model
        self.truth = truth
        self.vertices = model.vertices_in_grasp
        self.com = model.com_in_grasp
        self.gripper_sigma = np.concatenate([np.full(3, gripper_sigma[0]), np.full(3, gripper_sigma[1])])
        self.tactile_sigma = float(tactile_sigma)
        self.slip = slip
        self.rng = np.random.default_rng(seed)
        s = truth.stiffness.stiffness
        self._sqrt_s = np.sqrt(s)
        self._sqrt_sc = np.sqrt(s * truth.stiffening / 2.0)
        self._weight = truth.mass * GRAVITY if truth.gravity else 0.0
        self.contacts = ContactSet.free()
        self.state: Optional[SimulatorState] = None
        self.history: List[SimulatorState] = []

    @classmethod
    def from_config(cls, model: ObjectModel, truth: GroundTruth, config: SimulationConfig,
                    seed: Optional[int] = None) -> "ContactSimulator":
        return cls(model, truth, (config.gripper_sigma_rot, config.gripper_sigma_trn), config.tactile_sigma, seed)

    # ------------------------------------------------------------------ geometry

    def world_vertices(self, pose: Pose) -> np.ndarray:
        return self.vertices @ pose.rotation.T + pose.translation

    def lowest_vertex(self, pose: Pose) -> int:
        return int(np.argmin(self.world_vertices(pose)[:, 2]))

    def touching_pose(self, gripper: Pose) -> Pose:
        """Gripper pose shifted vertically so the lowest vertex of the resting object touches the plane"""
        lowest = self.world_vertices(gripper)[:, 2].min()
        return Pose(gripper.rotation, gripper.translation - lowest * E_Z)

    # ------------------------------------------------------------------ energy

    def _pose(self, params: np.ndarray, contacts: ContactSet, gripper: Pose) -> Tuple[Pose, np.ndarray]:
        """Object pose for the reduced coordinates and its body-twist basis (6 x n)"""
        formation = contacts.formation
        if formation is None:
            base = contacts.reference or gripper
            return base.retract(params), se3_right_jacobian(params)
        if formation == ContactFormation.POINT:
            v = self.vertices[contacts.active[0]]
            p = contacts.anchors[0]
            R = contacts.reference.rotation @ so3_exp(params)
            basis = np.vstack([np.eye(3), hat(v)]) @ so3_right_jacobian(params)
            return Pose(R, p - R @ v), basis
        if formation == ContactFormation.LINE:
            p1, p2 = contacts.anchors[0], contacts.anchors[1]
            u = (p2 - p1) / np.linalg.norm(p2 - p1)
            Rt = so3_exp(params[0] * u)
            ref = contacts.reference
            pose = Pose(Rt @ ref.rotation, p1 + Rt @ (ref.translation - p1))
            spatial = np.concatenate([u, np.cross(p1, u)])
            return pose, (pose.inverse().adjoint() @ spatial)[:, None]
        return contacts.reference, np.zeros((6, 0))

    def _residuals(self, pose: Pose, gripper: Pose) -> np.ndarray:
        d = pose.local(gripper)
        parts = [self._sqrt_s * d, self._sqrt_sc * d ** 2]
        if self._weight:
            height = pose.transform_point(self.com)[2]
            parts.append([np.sqrt(2.0 * self._weight * (height + GRAVITY_OFFSET))])
        return np.concatenate(parts)

    def _residual_jacobian(self, pose: Pose, gripper: Pose, basis: np.ndarray) -> np.ndarray:
        d = pose.local(gripper)
        M = -gripper.inverse().compose(pose).adjoint()
        D = se3_right_jacobian_inverse(d) @ M @ basis
        rows = [self._sqrt_s[:, None] * D, (2.0 * self._sqrt_sc * d)[:, None] * D]
        if self._weight:
            height = pose.transform_point(self.com)[2]
            rho = np.sqrt(2.0 * self._weight * (height + GRAVITY_OFFSET))
            dz = E_Z @ pose.rotation @ np.hstack([-hat(self.com), np.eye(3)])
            rows.append((self._weight * dz @ basis / rho)[None, :])
        return np.vstack(rows)

    def energy(self, pose: Pose, gripper: Pose) -> float:
        d = pose.local(gripper)
        s = self.truth.stiffness.stiffness
        value = float(np.sum(0.5 * s * d ** 2 + 0.25 * s * self.truth.stiffening * d ** 4))
        if self._weight:
            value += self._weight * float(pose.transform_point(self.com)[2])
        return value

    def _grasp_wrench(self, pose: Pose, gripper: Pose) -> np.ndarray:
        """Generalized force on the object body twist, gravity included"""
        d = pose.local(gripper)
        s = self.truth.stiffness.stiffness
        w_model = s * d + s * self.truth.stiffening * d ** 3
        M = -gripper.inverse().compose(pose).adjoint()
        wrench = -M.T @ se3_right_jacobian_inverse(d).T @ w_model
        if self._weight:
            f_body = pose.rotation.T @ (-self._weight * E_Z)
            wrench = wrench + np.concatenate([np.cross(self.com, f_body), f_body])
        return wrench

    # ------------------------------------------------------------------ equilibrium

    def _solve(self, gripper: Pose, contacts: ContactSet) -> Equilibrium:
        formation = contacts.formation
        if formation is None and not self._weight:
            params = np.zeros(6)
            pose = gripper
        elif formation == ContactFormation.PATCH:
            params = np.zeros(0)
            pose = contacts.reference
        else:
            n = {None: 6, ContactFormation.POINT: 3, ContactFormation.LINE: 1}[formation]
            if formation is None:
                contacts = replace(contacts, reference=gripper)

            def fun(x):
                return self._residuals(self._pose(x, contacts, gripper)[0], gripper)

            def jac(x):
                pose_x, basis = self._pose(x, contacts, gripper)
                return self._residual_jacobian(pose_x, gripper, basis)

            result = least_squares(fun, np.zeros(n), jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
            params = self._polish(result.x, fun, jac)
            pose = self._pose(params, contacts, gripper)[0]

        tactile = pose.local(gripper)
        wrench = self._grasp_wrench(pose, gripper)
        forces, balance = self._contact_forces(pose, contacts, wrench)
        return Equilibrium(gripper, pose, contacts, params, tactile, wrench, forces, balance)

    @staticmethod
    def _polish(x: np.ndarray, fun, jac) -> np.ndarray:
        """Newton refinement of the stationarity condition J^T r = 0, Hessian by central differences"""
        def gradient(y):
            return jac(y).T @ fun(y)

        g = gradient(x)
        for _ in range(POLISH_ITERATIONS):
            if np.linalg.norm(g) <= POLISH_TOL:
                break
            H = np.column_stack([(gradient(x + e) - gradient(x - e)) / (2.0 * POLISH_STEP)
                                 for e in POLISH_STEP * np.eye(len(x))])
            step, *_ = np.linalg.lstsq(0.5 * (H + H.T), -g, rcond=None)
            g_new = gradient(x + step)
            if not np.linalg.norm(g_new) < np.linalg.norm(g):
                break
            x, g = x + step, g_new
        return x

    def _contact_forces(self, pose: Pose, contacts: ContactSet, wrench: np.ndarray) -> Tuple[np.ndarray, float]:
        """World-frame contact forces balancing the body wrench, minimum norm among the balancing set"""
        if not contacts.active:
            return np.zeros((0, 3)), float(np.linalg.norm(wrench))
        Rt = pose.rotation.T
        blocks = [np.vstack([hat(self.vertices[i]) @ Rt, Rt]) for i in contacts.active]
        A = np.hstack(blocks)
        f, *_ = np.linalg.lstsq(A, -wrench, rcond=None)
        balance = float(np.linalg.norm(A @ f + wrench))
        return f.reshape(-1, 3), balance

    def equilibrium(self, gripper: Pose, contacts: Optional[ContactSet] = None) -> Equilibrium:
        """Energy minimum for the given (default: current) active contact set; does not advance the state"""
        return self._solve(gripper, self.contacts if contacts is None else contacts)

    def _inactive_depth(self, result: Equilibrium, slack: Optional[Dict[int, float]] = None) -> Tuple[float, int]:
        """Lowest inactive vertex height, measured from its release height for vertices in ``slack``"""
        z = self.world_vertices(result.pose)[:, 2]
        slack = slack or {}
        inactive = [i for i in range(len(z)) if i not in result.contacts.active]
        if not inactive:
            return np.inf, -1
        i = min(inactive, key=lambda j: z[j] - slack.get(j, 0.0))
        return float(z[i] - slack.get(i, 0.0)), i

    def _add_contact(self, result: Equilibrium, vertex: int) -> ContactSet:
        pose = result.pose
        z = self.world_vertices(pose)[:, 2]
        active = list(result.contacts.active) + [vertex]
        anchors = [a for a in result.contacts.anchors]
        anchors.append(self._anchor(pose, vertex))
        if len(active) >= 2:
            # coplanar vertices touch together once the bottom lies flat
            flat = [i for i in range(len(z)) if i not in active and z[i] < COPLANAR_TOL]
            for i in flat:
                active.append(i)
                anchors.append(self._anchor(pose, i))
        if len(active) == 2 and np.linalg.norm(anchors[1] - anchors[0]) < 1e-9:
            raise InfeasibleGeometryError("line contact between coincident vertices")
        return ContactSet(tuple(active), np.array(anchors), pose)

    def _anchor(self, pose: Pose, vertex: int) -> np.ndarray:
        p = pose.transform_point(self.vertices[vertex])
        return np.array([p[0], p[1], 0.0])

    @staticmethod
    def _tension(result: Equilibrium) -> float:
        """Smallest normal force of the active set (total normal force for a patch), +inf when free"""
        if not result.contacts.active:
            return np.inf
        normals = result.forces[:, 2]
        if result.formation == ContactFormation.PATCH:
            return float(normals.sum())
        return float(normals.min())

    def _release(self, result: Equilibrium) -> Tuple[ContactSet, Tuple[int, ...]]:
        """Drop the weakest contact (the whole patch when its total normal force is tensile)"""
        contacts = result.contacts
        if contacts.formation == ContactFormation.PATCH:
            return ContactSet.free(), contacts.active
        drop = int(np.argmin(result.forces[:, 2]))
        keep = [k for k in range(len(contacts.active)) if k != drop]
        return (ContactSet(tuple(contacts.active[k] for k in keep), contacts.anchors[keep], result.pose),
                (contacts.active[drop],))

    def _violation(self, result: Equilibrium, slack: Dict[int, float]) -> float:
        depth, _ = self._inactive_depth(result, slack)
        return max(0.0, -self._tension(result), -depth)

    def _settle(self, gripper: Pose, contacts: ContactSet, slack: Dict[int, float]) -> ContactSet:
        """Active set at a fixed gripper pose that is both compressive and non-penetrating.

        Adds penetrating vertices and drops tensile ones; on a cycle the least violating set seen wins.
        """
        seen = {}
        for _ in range(MAX_EVENTS):
            key = frozenset(contacts.active)
            if key in seen:
                break
            result = self._solve(gripper, contacts)
            seen[key] = (self._violation(result, slack), contacts)
            if self._tension(result) < -TENSION_TOL:
                contacts, dropped = self._release(result)
                self._mark_released(contacts, gripper, dropped, slack)
                continue
            depth, vertex = self._inactive_depth(result, slack)
            if depth < -PENETRATION_TOL:
                contacts = self._add_contact(result, vertex)
                for i in contacts.active:
                    slack.pop(i, None)
                continue
            return contacts
        logger.debug(f"Active set cycles at a fixed pose, keeping the least violating of {len(seen)}")
        return min(seen.values(), key=lambda item: item[0])[1]

    def _mark_released(self, contacts: ContactSet, gripper: Pose, dropped, slack: Dict[int, float]):
        """Record the numerical penetration a released vertex keeps at its release pose"""
        z = self.world_vertices(self._solve(gripper, contacts).pose)[:, 2]
        for i in dropped:
            if -RELEASE_TOL < z[i] < 0.0:
                slack[i] = float(z[i])

    def _advance(self, start: Pose, target: Pose, contacts: ContactSet) -> Equilibrium:
        """Follow the gripper path from start to target, switching the active set at the first contact event.

        Events are a vertex touching the plane and an active normal force crossing zero.
        """
        slack: Dict[int, float] = {}
        contacts = self._settle(start, contacts, slack)
        for _ in range(MAX_EVENTS):
            result = self._solve(target, contacts)
            tensile = self._tension(result) < -TENSION_TOL
            penetrating = self._inactive_depth(result, slack)[0] < -PENETRATION_TOL
            if not tensile and not penetrating:
                return result

            def tension(s, contacts=contacts):
                return self._tension(self._solve(interpolate(start, target, s), contacts))

            def gap(s, contacts=contacts):
                return self._inactive_depth(self._solve(interpolate(start, target, s), contacts), slack)[0]

            s_release = self._event_fraction(tension) if tensile else np.inf
            s_touch = self._event_fraction(gap) if penetrating else np.inf
            s_event = min(s_release, s_touch)
            start = interpolate(start, target, s_event)
            at = self._solve(start, contacts)
            if s_release <= s_touch:
                contacts, dropped = self._release(at)
                self._mark_released(contacts, start, dropped, slack)
                logger.debug(f"Released {dropped} at path fraction {s_event:.4f}, {len(contacts.active)} vertices remain")
            else:
                _, vertex = self._inactive_depth(at, slack)
                contacts = self._add_contact(at, vertex)
                for i in contacts.active:
                    slack.pop(i, None)
                logger.debug(f"Vertex {vertex} touched at path fraction {s_event:.4f}, formation {contacts.formation}")
            contacts = self._settle(start, contacts, slack)
        raise InfeasibleGeometryError(f"more than {MAX_EVENTS} contact events within one step")

    @staticmethod
    def _event_fraction(value) -> float:
        """First path fraction where ``value`` drops below zero, given it is negative at the target"""
        if value(0.0) <= 0.0:
            return 0.0
        return brentq(value, 0.0, 1.0, xtol=1e-14)

    # ------------------------------------------------------------------ friction

    def _ratio(self, result: Equilibrium) -> float:
        force = result.forces.sum(axis=0)
        if force[2] <= TENSION_TOL:
            return 0.0
        return float(np.linalg.norm(force[:2]) / force[2])

    def _torsion_ratio(self, result: Equilibrium) -> float:
        p1, p2 = result.contacts.anchors[:2]
        middle = (p1 + p2) / 2
        torque = sum(np.cross(p - middle, f)[2] for p, f in zip(result.contacts.anchors, result.forces))
        normal = result.forces[:, 2].sum()
        if normal <= TENSION_TOL:
            return 0.0
        return float(abs(torque) / (normal * np.linalg.norm(p2 - p1) / 2))

    def _shifted(self, contacts: ContactSet, shift: np.ndarray) -> ContactSet:
        ref = contacts.reference
        return ContactSet(contacts.active, contacts.anchors + shift, Pose(ref.rotation, ref.translation + shift))

    def _twisted(self, contacts: ContactSet, angle: float) -> ContactSet:
        middle = contacts.anchors[:2].mean(axis=0)
        Rz = so3_exp(angle * E_Z)
        anchors = (contacts.anchors - middle) @ Rz.T + middle
        ref = contacts.reference
        return ContactSet(contacts.active, anchors, Pose(Rz @ ref.rotation, Rz @ (ref.translation - middle) + middle))

    @staticmethod
    def _stick_limit(excess, start: float = 1e-5, limit: float = 0.5) -> float:
        """Smallest slip amount bringing the excess ratio to zero, bracketed by doubling up to ``limit``"""
        if excess(0.0) <= 0:
            return 0.0
        hi = start
        while excess(hi) > 0 and hi < limit:
            hi = min(2.0 * hi, limit)
        if excess(hi) > 0:
            logger.debug(f"Friction cone not reached within a slip of {limit}, capping the slip there")
            return limit
        return brentq(excess, 0.0, hi, xtol=1e-13)

    def step_friction(self, result: Equilibrium, mu: Optional[float] = None) -> Tuple[Equilibrium, float, float]:
        """Quasi-static Coulomb slip: move the sticking anchors until the force is back on the cone"""
        mu = self.truth.mu if mu is None else mu
        formation = result.formation
        if formation not in (ContactFormation.POINT, ContactFormation.LINE):
            return result, 0.0, 0.0

        distance = 0.0
        rotation = 0.0
        if self._ratio(result) > mu:
            force = result.forces.sum(axis=0)
            direction = -np.array([force[0], force[1], 0.0]) / np.linalg.norm(force[:2])
            contacts = result.contacts
            gripper = result.gripper

            def excess(s):
                return self._ratio(self._solve(gripper, self._shifted(contacts, s * direction))) - mu

            distance = self._stick_limit(excess)
            result = self._solve(gripper, self._shifted(contacts, distance * direction))

        if formation == ContactFormation.LINE and self._torsion_ratio(result) > mu:
            middle = result.contacts.anchors[:2].mean(axis=0)
            torque = sum(np.cross(p - middle, f)[2] for p, f in zip(result.contacts.anchors, result.forces))
            sign = -np.sign(torque)
            contacts = result.contacts
            gripper = result.gripper

            def excess_twist(a):
                return self._torsion_ratio(self._solve(gripper, self._twisted(contacts, sign * a))) - mu

            rotation = self._stick_limit(excess_twist, start=1e-4, limit=0.5)
            result = self._solve(gripper, self._twisted(contacts, sign * rotation))
        return result, float(distance), float(rotation)

    # ------------------------------------------------------------------ stepping

    def _snapshot(self, result: Equilibrium, step: int, initial, distance: float, rotation: float) -> SimulatorState:
        return SimulatorState(
            step=step,
            gripper=result.gripper,
            equilibrium=result.pose,
            formation=result.formation,
            active=result.contacts.active,
            anchors=result.contacts.anchors.copy(),
            forces=result.forces.copy(),
            tactile=result.tactile,
            grasp_wrench=result.grasp_wrench,
            extrinsic_wrench=result.extrinsic_wrench,
            balance_residual=result.balance_residual,
            initial_contact=initial,
            slip_distance=distance,
            slip_rotation=rotation,
        )

    def reset(self, gripper: Pose) -> SimulatorState:
        self.contacts = ContactSet.free()
        self.history = []
        self.state = None
        result = self._advance(gripper, gripper, self.contacts)
        return self._record(result, 0.0, 0.0)

    def _record(self, result: Equilibrium, distance: float, rotation: float) -> SimulatorState:
        previous = self.state
        step = 0 if previous is None else previous.step + 1
        initial = None if previous is None else previous.initial_contact
        if initial is None and result.formation is not None:
            initial = result.contacts.anchors.mean(axis=0)
        if previous is not None:
            distance += previous.slip_distance
            rotation += previous.slip_rotation
        self.contacts = replace(result.contacts, reference=result.pose) if result.formation else ContactSet.free()
        self.state = self._snapshot(result, step, initial, distance, rotation)
        self.history.append(self.state)
        return self.state

    def step(self, gripper: Pose) -> SimulatorState:
        """Move the gripper to a new pose and settle the object"""
        if self.state is None:
            return self.reset(gripper)
        result = self._advance(self.state.gripper, gripper, self.contacts)
        distance = rotation = 0.0
        if self.slip:
            result, distance, rotation = self.step_friction(result)
            if distance or rotation:
                logger.debug(f"Slip {distance * 1e3:.3f} mm / {np.rad2deg(rotation):.3f} deg at step {self.state.step + 1}")
        return self._record(result, distance, rotation)

    def measure(self, state: Optional[SimulatorState] = None, seed: Optional[int] = None) -> MeasurementSample:
        state = state or self.state
        rng = self.rng if seed is None else np.random.default_rng(seed)
        gripper_noise = rng.normal(size=6) * self.gripper_sigma
        tactile_noise = rng.normal(size=6) * self.tactile_sigma
        return MeasurementSample(state.gripper.retract(gripper_noise), state.tactile + tactile_noise, state.step)

    def ft_ground_truth(self, state: Optional[SimulatorState] = None) -> np.ndarray:
        state = state or self.state
        return state.extrinsic_wrench.copy()

    def grasp_wrench_world(self, state: Optional[SimulatorState] = None) -> np.ndarray:
        """Grasp (plus weight) wrench on the object in the world frame, [moment about origin; force]"""
        state = state or self.state
        pose = state.equilibrium
        force = pose.rotation @ state.grasp_wrench[3:]
        moment = pose.rotation @ state.grasp_wrench[:3] + np.cross(pose.translation, force)
        return np.concatenate([moment, force])

    def min_vertex_height(self, state: Optional[SimulatorState] = None) -> float:
        state = state or self.state
        return float(self.world_vertices(state.equilibrium)[:, 2].min())

    def kkt_check(self, n: int = 100, scale: float = 1e-3, state: Optional[SimulatorState] = None,
                  seed: int = 0) -> bool:
        """Sampled energy minimality over feasible perturbations of the constrained coordinates"""
        state = state or self.state
        contacts = ContactSet(state.active, state.anchors, state.equilibrium)
        formation = contacts.formation
        if formation in (None, ContactFormation.PATCH) and not self._weight:
            return True
        dims = {None: 6, ContactFormation.POINT: 3, ContactFormation.LINE: 1, ContactFormation.PATCH: 0}[formation]
        if dims == 0:
            return True
        rng = np.random.default_rng(seed)
        base = self.energy(state.equilibrium, state.gripper)
        tol = 1e-12 * max(1.0, abs(base))
        for _ in range(n):
            pose, _ = self._pose(rng.normal(scale=scale, size=dims), contacts, state.gripper)
            if self.world_vertices(pose)[:, 2].min() < -PENETRATION_TOL:
                continue
            if self.energy(pose, state.gripper) < base - tol:
                return False
        return True
