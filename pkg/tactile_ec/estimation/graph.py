"""Sliding-horizon factor graph for joint contact estimation and gripper motion planning.

Nodes 1..t (the boundary) carry measurement factors, nodes t+1..t+T carry
control factors. Every advance turns node t+1 into a measured node, appends
a new future node and re-solves the whole window, warm-started from the
previous solution.
"""
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from tactile_ec.core.config import NoiseProfile, SolverConfig
from tactile_ec.core.exceptions import (
    IllegalTransitionError,
    IndeterminateSystemError,
    NonPositiveStiffnessError,
    UnsolvedGraphError,
)
from tactile_ec.estimation import factors as F
from tactile_ec.estimation.factors import Factor, FactorKind, Key
from tactile_ec.estimation.state import (
    E_Z,
    ContactFormation,
    ContactPose,
    GraspParams,
    GripperPose,
    IntrinsicWrench,
    ObjectPosePair,
    StateNode,
    project_contact_rotation,
)
from tactile_ec.geometry.lie import Pose

logger = logging.getLogger(__name__)

GRASP_KEY: Key = ("K", 0)
TRANSITION_YAW_SIGMA = 0.3
# log-stiffness stays within this distance of the prior
STIFFNESS_LOG_RANGE = 3.0


@dataclass(frozen=True, eq=False)
class Measurement:
    gripper: Pose
    tactile: np.ndarray


@dataclass(frozen=True, eq=False)
class Command:
    """Commanded rotation increment in the gripper frame and the desired offset distance"""

    rotation: np.ndarray
    offset: float

    @classmethod
    def hold(cls, offset: float) -> "Command":
        return cls(np.eye(3), offset)


@dataclass
class SolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    cost_by_kind: Dict[str, float]
    converged: bool
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class SlideReport:
    boundary: int
    node_count: int
    future_length: int
    solve: SolveReport


def pivot(gripper: Pose, rotation: np.ndarray, point: np.ndarray) -> Tuple[Pose, Pose]:
    """Apply a body-frame rotation increment to the gripper about a world point.

    Returns the new gripper pose and the world transform that realizes it.
    """
    R_world = gripper.rotation @ rotation @ gripper.rotation.T
    motion = Pose(R_world, point - R_world @ point)
    return motion.compose(gripper), motion


def _dimension(value) -> int:
    return 6 if isinstance(value, Pose) else int(np.size(value))


def _retract(value, delta):
    if isinstance(value, Pose):
        return value.retract(delta)
    return value + delta


def levenberg_marquardt(factors: Sequence[Factor], values: Dict[Key, object], active: Sequence[Key],
                        config: SolverConfig, project: Callable[[Dict[Key, object]], Dict[Key, object]]):
    """Minimize the whitened cost over the active keys; other keys stay fixed"""
    start = time.perf_counter()
    index: Dict[Key, int] = {}
    size = 0
    for key in active:
        index[key] = size
        size += _dimension(values[key])

    live = [f for f in factors if any(k in index for k in f.keys)]
    fixed_cost = sum(f.cost(values) for f in factors if not any(k in index for k in f.keys))

    def total_cost(vals) -> float:
        return fixed_cost + sum(f.cost(vals) for f in live)

    def linearize(vals):
        rows, cols, data, residuals = [], [], [], []
        row = 0
        for f in live:
            r, Js = f.linearize(vals)
            m = len(r)
            for key, J in zip(f.keys, Js):
                if key not in index:
                    continue
                d = J.shape[1]
                rr, cc = np.meshgrid(np.arange(row, row + m), np.arange(index[key], index[key] + d), indexing="ij")
                rows.append(rr.ravel())
                cols.append(cc.ravel())
                data.append(J.ravel())
            residuals.append(r)
            row += m
        J = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(row, size)
        ).tocsr()
        return J, np.concatenate(residuals)

    def keys_of(dims: Iterable[int]) -> List[Key]:
        hits = []
        for key, start_at in index.items():
            span = range(start_at, start_at + _dimension(values[key]))
            if any(d in span for d in dims):
                hits.append(key)
        return hits

    cost = total_cost(values)
    initial_cost = cost
    lam = config.initial_lambda
    iterations = 0
    converged = cost < 1e-30 or not live

    while not converged and iterations < config.max_iterations:
        J, r = linearize(values)
        A = (J.T @ J).tocsc()
        g = J.T @ r
        diag = A.diagonal()
        zero = np.flatnonzero(diag <= 0.0)
        if zero.size:
            raise IndeterminateSystemError(keys_of(zero))

        accepted = False
        while iterations < config.max_iterations:
            iterations += 1
            H = (A + lam * sparse.diags(diag)).tocsc()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MatrixRankWarning)
                dx = spsolve(H, -g)
            dx = np.atleast_1d(dx)
            bad = np.flatnonzero(~np.isfinite(dx))
            if bad.size:
                raise IndeterminateSystemError(keys_of(bad), reason="non-finite step")

            candidate = dict(values)
            for key, at in index.items():
                candidate[key] = _retract(values[key], dx[at:at + _dimension(values[key])])
            candidate = project(candidate)
            try:
                new_cost = total_cost(candidate)
            except NonPositiveStiffnessError:
                new_cost = math.inf
            if not np.isfinite(new_cost):
                # rejected like a cost increase
                new_cost = math.inf
            logger.debug(f"LM iteration {iterations}: cost {cost:.6e} -> {new_cost:.6e}, lambda {lam:.1e}")

            if new_cost < cost:
                relative = (cost - new_cost) / max(cost, 1e-300)
                values = candidate
                cost = new_cost
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if relative < config.relative_tolerance or np.linalg.norm(dx) < 1e-14:
                    converged = True
                break
            lam *= 10.0
            if lam > 1e12 or np.linalg.norm(dx) < 1e-14:
                # no descent direction left at machine precision
                converged = True
                break
        if not accepted and not converged:
            break

    by_kind: Dict[str, float] = {}
    for f in factors:
        by_kind[f.kind.value] = by_kind.get(f.kind.value, 0.0) + f.cost(values)
    report = SolveReport(
        iterations=iterations,
        initial_cost=initial_cost,
        final_cost=cost,
        cost_by_kind=dict(sorted(by_kind.items())),
        converged=converged,
        wall_time=time.perf_counter() - start,
    )
    return values, report


class SlidingGraph:
    def __init__(self, noise: NoiseProfile, config: SolverConfig, grasp_prior: GraspParams, object_prior: Pose,
                 contact_prior: Pose):
        self.noise = noise
        self.config = config
        self.horizon = config.horizon
        self.grasp_prior = grasp_prior
        self.object_prior = object_prior
        self.contact_prior = contact_prior

        self.values: Dict[Key, object] = {}
        self.initial_values: Dict[Key, object] = {}
        self.formations: Dict[int, ContactFormation] = {}
        self.measurements: Dict[int, Measurement] = {}
        self.commands: Dict[int, Command] = {}
        self._node_factors: Dict[int, List[Factor]] = {}
        self._extra_factors: Dict[int, List[Factor]] = {}
        self._global_factors: List[Factor] = []

        self.boundary = 0
        self.formation = ContactFormation.POINT
        self.motion_frozen = False
        self.solved = False
        self.last_report: Optional[SolveReport] = None

    # --- construction ---------------------------------------------------------

    @classmethod
    def build_initial(cls, noise: NoiseProfile, config: SolverConfig, grasp_prior: GraspParams, object_prior: Pose,
                      measurement: Measurement, commands: Sequence[Command],
                      contact_prior: Optional[Pose] = None) -> "SlidingGraph":
        if len(commands) < config.horizon:
            raise UnsolvedGraphError(f"need {config.horizon} initial commands, got {len(commands)}")
        g = measurement.gripper
        if contact_prior is None:
            contact_prior = Pose(np.eye(3), [g.translation[0], g.translation[1], 0.0])
        graph = cls(noise, config, grasp_prior, object_prior, contact_prior)

        graph._set(GRASP_KEY, grasp_prior.to_vector())
        graph._add_measured_node(1, measurement)
        graph._global_factors = [
            graph._factor(FactorKind.PRIOR_GRASP, [GRASP_KEY], F.prior_grasp, ContactFormation.POINT,
                          K_prior=grasp_prior.to_vector()),
            graph._factor(FactorKind.PRIOR_OBJECT, [("ro", 1)], F.prior_object, ContactFormation.POINT,
                          prior=object_prior),
            graph._factor(FactorKind.PRIOR_CONTACT, [("c", 1)], F.prior_contact, ContactFormation.POINT,
                          prior=contact_prior),
        ]
        graph.boundary = 1
        graph._rebuild(1)
        for j, command in enumerate(commands[:config.horizon]):
            graph._append_future_node(2 + j, command)
        logger.debug(f"Initial graph built with {graph.node_count} nodes")
        return graph

    def _set(self, key: Key, value, initial: bool = True):
        self.values[key] = value
        if initial and key not in self.initial_values:
            self.initial_values[key] = value

    def _factor(self, kind: FactorKind, keys, function, noise_formation: ContactFormation, sigmas=None,
                **params) -> Factor:
        """Factor with the noise row of ``noise_formation``; ``params`` go to the residual function"""
        if sigmas is None:
            sigmas = self.noise.sigmas(kind.value, noise_formation.value)
        return Factor(kind, tuple(keys), np.asarray(sigmas, dtype=float), function, params, noise_formation)

    def _add_measured_node(self, i: int, measurement: Measurement):
        """Initialize node i from its measurement and the object prior"""
        g = measurement.gripper
        resting = self.object_prior
        equilibrium = g.compose(Pose.exp(-np.asarray(measurement.tactile))).compose(g.inverse()).compose(resting)
        self.formations[i] = self.formation
        self.measurements[i] = measurement
        self._set(("g", i), g)
        self._set(("ro", i), resting)
        self._set(("eo", i), equilibrium)
        self._set(("w", i), self.grasp_prior.stiffness * np.asarray(measurement.tactile, dtype=float))
        self._set(("c", i), project_contact_rotation(self.contact_prior, self.formation))

    def _append_future_node(self, j: int, command: Command):
        if self.motion_frozen:
            command = Command.hold(command.offset)
        prev = j - 1
        c_prev = self.values[("c", prev)]
        g_new, motion = pivot(self.values[("g", prev)], command.rotation, c_prev.translation)
        self.formations[j] = self.formation
        self.commands[j] = command
        self._set(("g", j), g_new)
        self._set(("ro", j), motion.compose(self.values[("ro", prev)]))
        self._set(("eo", j), motion.compose(self.values[("eo", prev)]))
        self._set(("w", j), np.array(self.values[("w", prev)], dtype=float))
        self._set(("c", j), c_prev)
        self._rebuild(j)

    def _rebuild(self, i: int):
        """(Re)create the factors owned by node i: unary factors on i and pairwise factors (i-1, i)"""
        form = self.formations[i]
        out: List[Factor] = []
        past = i <= self.boundary

        out.append(self._factor(FactorKind.CONTACT_CONVENTION, [("c", i)], F.contact_convention, form,
                                formation=form))
        if form != ContactFormation.PATCH:
            out.append(self._factor(FactorKind.TORQUE, [("g", i), ("w", i), ("c", i), GRASP_KEY],
                                    F.TORQUE_FUNCTIONS[form], form))

        if past:
            m = self.measurements[i]
            out.append(self._factor(FactorKind.GRIPPER_POSE, [("g", i)], F.gripper_pose, form, measured=m.gripper))
            out.append(self._factor(FactorKind.TACTILE_TOTAL, [("g", i), ("ro", i), ("eo", i)], F.tactile_total,
                                    form, delta=m.tactile))
            out.append(self._factor(FactorKind.WRENCH_TOTAL, [("g", i), ("ro", i), ("eo", i), ("w", i), GRASP_KEY],
                                    F.wrench_total, form))
        else:
            cmd = self.commands[i]
            # stiffness is a fixed weight here, refreshed from the grasp estimate before every solve
            out.append(self._factor(FactorKind.TACTILE_ENERGY, [("w", i)], F.tactile_energy, form,
                                    K=np.array(self.values[GRASP_KEY], dtype=float)))
            out.append(self._factor(FactorKind.CONTACT_MAINTENANCE, [("ro", i), ("eo", i), ("c", i)],
                                    F.contact_maintenance, form, epsilon=float(cmd.offset)))
            out.append(self._factor(FactorKind.DESIRED_ROTATION, [("g", i - 1), ("g", i)], F.desired_rotation,
                                    form, command=cmd.rotation))
            out.append(self._factor(FactorKind.MOTION_EFFORT, [("g", i - 1), ("g", i), ("c", i - 1)],
                                    F.motion_effort, form))

        if i > 1:
            prev_form = self.formations[i - 1]
            if past:
                m_prev = self.measurements[i - 1]
                out.append(self._factor(FactorKind.TACTILE_INCREMENTAL,
                                        [("g", i - 1), ("eo", i - 1), ("g", i), ("eo", i)],
                                        F.tactile_incremental, form,
                                        delta_prev=m_prev.tactile, delta=self.measurements[i].tactile))
            out.append(self._factor(FactorKind.GRASP_RIGIDITY, [("g", i - 1), ("ro", i - 1), ("g", i), ("ro", i)],
                                    F.grasp_rigidity, form))
            out.append(self._factor(FactorKind.CONTACT_IN_OBJECT, [("eo", i - 1), ("c", i - 1), ("eo", i), ("c", i)],
                                    F.contact_in_object, prev_form))
            out.append(self._factor(FactorKind.CONTACT_ON_ENVIRONMENT, [("c", i - 1), ("c", i)],
                                    F.contact_on_environment, prev_form))
            out.append(self._factor(FactorKind.WRENCH_INCREMENTAL,
                                    [("g", i - 1), ("eo", i - 1), ("w", i - 1), ("g", i), ("eo", i), ("w", i),
                                     GRASP_KEY],
                                    F.wrench_incremental, form))
        self._node_factors[i] = out + self._extra_factors.get(i, [])

    # --- protocol -------------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.formations)

    @property
    def future_length(self) -> int:
        return self.node_count - self.boundary

    @property
    def factors(self) -> List[Factor]:
        out = list(self._global_factors)
        for i in sorted(self._node_factors):
            out.extend(self._node_factors[i])
        return out

    def frozen_nodes(self) -> List[int]:
        cutoff = self.boundary - self.config.active_window
        return [i for i in sorted(self.formations) if i <= cutoff]

    def active_keys(self) -> List[Key]:
        frozen = set(self.frozen_nodes())
        return [key for key in self.values if key == GRASP_KEY or key[1] not in frozen]

    def _project(self, values: Dict[Key, object]) -> Dict[Key, object]:
        for i, form in self.formations.items():
            key = ("c", i)
            values[key] = project_contact_rotation(values[key], form)
        if GRASP_KEY in values:
            prior = self.grasp_prior.to_vector()
            x = np.array(values[GRASP_KEY], dtype=float)
            x[:6] = np.clip(x[:6], prior[:6] - STIFFNESS_LOG_RANGE, prior[:6] + STIFFNESS_LOG_RANGE)
            values[GRASP_KEY] = x
        return values

    def _refresh_energy(self):
        for j in range(self.boundary + 1, self.node_count + 1):
            self._rebuild(j)

    def solve(self) -> SolveReport:
        if self.boundary < 1:
            raise UnsolvedGraphError("graph has no measured node")
        self._refresh_energy()
        values, report = levenberg_marquardt(self.factors, dict(self.values), self.active_keys(), self.config,
                                             self._project)
        self.values = values
        self.solved = True
        self.last_report = report
        logger.debug(
            f"Solved t={self.boundary}: cost {report.initial_cost:.4e} -> {report.final_cost:.4e} "
            f"in {report.iterations} iterations"
        )
        return report

    def batch_solve(self) -> Dict[Key, object]:
        """Cold solve of the identical factor set from the recorded initial values"""
        values = dict(self.values)
        active = self.active_keys()
        for key in active:
            values[key] = self.initial_values[key]
        values = self._project(values)
        solved, _ = levenberg_marquardt(self.factors, values, active, self.config, self._project)
        return solved

    def advance(self, measurement: Measurement, command: Command) -> SlideReport:
        if not self.solved:
            raise UnsolvedGraphError("advance requires a solved graph")
        i = self.boundary + 1
        self.measurements[i] = measurement
        self.values[("g", i)] = measurement.gripper
        self.boundary = i
        self._rebuild(i)
        self._append_future_node(i + self.horizon, command)
        self.solved = False
        report = self.solve()
        return SlideReport(self.boundary, self.node_count, self.future_length, report)

    def planned_motion(self) -> List[GripperPose]:
        if not self.solved:
            raise UnsolvedGraphError("planned motion requested before a solve")
        return [GripperPose(self.values[("g", j)]) for j in range(self.boundary + 1, self.boundary + self.horizon + 1)]

    def replan(self, commands: Sequence[Command]):
        """Replace the commands of the future nodes, padding with holds of the last offset"""
        first = self.boundary + 1
        offset = self.commands[first].offset if first in self.commands else 0.0
        for n, j in enumerate(range(first, self.boundary + self.horizon + 1)):
            command = commands[n] if n < len(commands) else Command.hold(offset)
            if self.motion_frozen:
                command = Command.hold(command.offset)
            self.commands[j] = command
            self._rebuild(j)
        self.solved = False

    def set_formation(self, formation: ContactFormation, line_direction: Optional[np.ndarray] = None):
        if formation == self.formation:
            return
        if self.formation.next() != formation:
            raise IllegalTransitionError(self.formation, formation)
        logger.info(f"Contact formation {self.formation.value} -> {formation.value} at t={self.boundary}")
        self.formation = formation
        first = self.boundary + 1
        future = range(first, self.boundary + self.horizon + 1)

        if formation == ContactFormation.LINE:
            anchor = self.values[("c", self.boundary)].translation
            x = self._line_axis(line_direction)
            R = np.column_stack([x, np.cross(E_Z, x), E_Z])
            line_pose = Pose(R, anchor)
            for j in future:
                self.values[("c", j)] = Pose(R, self.values[("c", j)].translation)
            sigmas = [np.inf, np.inf, TRANSITION_YAW_SIGMA] + [np.inf] * 3
            self._extra_factors[first] = [
                self._factor(FactorKind.PRIOR_CONTACT, [("c", first)], F.prior_contact, formation, sigmas=sigmas,
                             prior=line_pose)
            ]
        elif formation == ContactFormation.PATCH:
            self.motion_frozen = True
            for j in future:
                self.commands[j] = Command.hold(self.commands[j].offset)

        for j in future:
            self.formations[j] = formation
        for j in future:
            self._rebuild(j)
        self._project(self.values)
        self.solved = False

    def _line_axis(self, line_direction: Optional[np.ndarray]) -> np.ndarray:
        if line_direction is not None:
            x = np.array(line_direction, dtype=float)
        else:
            x = np.array(self.values[("c", self.boundary)].rotation[:, 0])
        x[2] = 0.0
        n = np.linalg.norm(x)
        return x / n if n > 1e-12 else np.array([1.0, 0.0, 0.0])

    # --- read-out -------------------------------------------------------------

    def grasp_estimate(self) -> GraspParams:
        return GraspParams.from_vector(self.values[GRASP_KEY])

    def estimate(self, i: int) -> StateNode:
        return StateNode(
            index=i,
            gripper=GripperPose(self.values[("g", i)]),
            object=ObjectPosePair(self.values[("ro", i)], self.values[("eo", i)]),
            wrench=IntrinsicWrench.from_vector(self.values[("w", i)]),
            contact=ContactPose(self.values[("c", i)], self.formations[i]),
        )

    def current_node(self) -> StateNode:
        return self.estimate(self.boundary)

    def cost_breakdown(self) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for f in self.factors:
            out[f.kind.value] = out.get(f.kind.value, 0.0) + f.cost(self.values)
        return dict(sorted(out.items()))

    def whitened_torque_residual(self, i: Optional[int] = None) -> float:
        i = self.boundary if i is None else i
        return F.whitened_torque_residual(self.estimate(i), self.grasp_estimate(), self.noise)


def build_initial(noise: NoiseProfile, config: SolverConfig, grasp_prior: GraspParams, object_prior: Pose,
                  measurement: Measurement, commands: Sequence[Command], contact_prior: Optional[Pose] = None):
    return SlidingGraph.build_initial(noise, config, grasp_prior, object_prior, measurement, commands, contact_prior)
