"""Experiment protocols wiring the simulator to the estimator-controller.

Every trial owns its simulator, graph and detector and is seeded with
``scenario.seed + trial``; trials run in a thread pool and come back in
trial order.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from tactile_ec.core.config import Scenario, settings
from tactile_ec.core.exceptions import TactileECError
from tactile_ec.estimation.detector import TransitionDetector
from tactile_ec.estimation.graph import Command, Measurement, SlidingGraph
from tactile_ec.estimation.state import E_Z, ContactFormation, GraspParams, offset, offset_distance
from tactile_ec.geometry.lie import Pose, so3_exp
from tactile_ec.services import commands as cmd
from tactile_ec.services.controllers import baseline_constant_tactile, controller_noise
from tactile_ec.services.metrics import (
    MetricsRow,
    angle_between,
    line_angle,
    point_line_distance,
    ratio_stats,
    rows_frame,
)
from tactile_ec.simulation.objects import make_object
from tactile_ec.simulation.simulator import ContactSet, ContactSimulator, GroundTruth, SimulatorState

logger = logging.getLogger(__name__)

# initial tilt of the object bottom against the plane (deg)
POINT_TILT_DEG = (20.0, 30.0)
MULTI_TILT_DEG = (8.0, 15.0)
DETECTION_WINDOW = 5
FORCE_VARIANTS = ("full", "no-delta", "no-K")


class TrialFailure(Exception):
    pass


@dataclass
class TrialResult:
    trial: int
    seed: int
    rows: List[MetricsRow]
    steps: List[dict] = field(default_factory=list)
    failure: Optional[str] = None


@dataclass
class ExperimentOutcome:
    scenario: Scenario
    trials: List[TrialResult]
    table: Optional[pd.DataFrame] = None

    @property
    def rows(self) -> List[MetricsRow]:
        return [row for trial in self.trials for row in trial.rows]

    @property
    def steps(self) -> List[dict]:
        return [step for trial in self.trials for step in trial.steps]


def _vector(x) -> Optional[List[float]]:
    return None if x is None else [float(v) for v in np.asarray(x).ravel()]


def _number(x) -> Optional[float]:
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


def _formation(f: Optional[ContactFormation]) -> Optional[str]:
    return None if f is None else f.value


class TrialRunner:
    """One closed-loop trial: simulator in the loop with the sliding graph"""

    def __init__(self, scenario: Scenario, trial: int, variant: Optional[str] = None):
        self.scenario = scenario
        self.trial = trial
        self.seed = scenario.seed + trial
        self.variant = variant or scenario.variant
        self.rng = np.random.default_rng(self.seed)
        sim_cfg = scenario.simulation
        self.controller = scenario.controller
        self.model = make_object(scenario.object, self.rng, sim_cfg.max_tilt_deg, sim_cfg.max_height_offset)
        self.truth = GroundTruth.sample(sim_cfg, scenario.mu, self.rng)
        self.sim = ContactSimulator.from_config(self.model, self.truth, sim_cfg, seed=self.seed)
        prior = sim_cfg.grasp_prior
        self.grasp_prior = GraspParams(prior.kappa, prior.k, prior.eta)
        self.noise = controller_noise(scenario.model_copy(update={"variant": self.variant}))
        self.detector = TransitionDetector(self.controller.detection_threshold, self.controller.debounce)
        self.graph: Optional[SlidingGraph] = None
        self.steps: List[dict] = []
        self.schedule: List[np.ndarray] = []
        self.nominal: List[np.ndarray] = []
        self.cursor = 0
        self.phase = "setup"
        self.phase_start: Optional[Pose] = None
        self.phase_index = 0
        self.delta_ref: Optional[np.ndarray] = None
        self.t = 0

    # --- setup ----------------------------------------------------------------

    def initial_gripper(self, tilt_range) -> Pose:
        heading = self.rng.uniform(0, 2 * np.pi)
        tilt = np.deg2rad(self.rng.uniform(*tilt_range))
        body = Pose.from_rotvec(tilt * np.array([np.cos(heading), np.sin(heading), 0.0]))
        return self.sim.touching_pose(body.compose(self.model.grasp_frame))

    def start(self, tilt_range) -> SimulatorState:
        touch = self.initial_gripper(tilt_range)
        self.sim.reset(touch)
        pressed = Pose(touch.rotation, touch.translation - self.scenario.simulation.press_depth * E_Z)
        state = self.sim.step(pressed)
        if not state.in_contact:
            raise TrialFailure("object did not reach the surface")
        return state

    def _command(self, rotation: np.ndarray) -> Command:
        return Command(rotation, self.controller.offset_target)

    def load(self, phase: str, nominal: Sequence[np.ndarray], start: Optional[Pose] = None):
        """Start a motion phase; nominal offsets are taken from ``start`` (default: the current gripper)"""
        current = self.sim.state.gripper if self.graph is None else self.graph.values[("g", self.graph.boundary)]
        start = start or current
        self.phase = phase
        self.phase_start = start
        self.phase_index = 0
        self.nominal = list(nominal)
        self.schedule = cmd.body_increments(self.nominal, start.rotation, current.rotation)
        horizon = self.scenario.solver.horizon
        self.cursor = min(horizon, len(self.schedule))
        if self.graph is not None:
            self.graph.replan([self._command(R) for R in self.schedule[:horizon]])
            self.graph.solve()

    def build_graph(self, phase: str, nominal: Sequence[np.ndarray]):
        sample = self.sim.measure()
        self.delta_ref = np.array(sample.tactile)
        self.load(phase, nominal)
        horizon = self.scenario.solver.horizon
        initial = [self._command(R) for R in self.schedule[:horizon]]
        initial += [Command.hold(self.controller.offset_target)] * (horizon - len(initial))
        object_prior = Pose(np.eye(3), sample.gripper.translation)
        self.graph = SlidingGraph.build_initial(self.noise, self.scenario.solver, self.grasp_prior, object_prior,
                                                Measurement(sample.gripper, sample.tactile), initial)
        self.graph.solve()

    # --- stepping -------------------------------------------------------------

    def _next_command(self) -> Command:
        if self.cursor < len(self.schedule):
            command = self._command(self.schedule[self.cursor])
        else:
            command = Command.hold(self.controller.offset_target)
        self.cursor += 1
        return command

    def _target(self) -> Pose:
        graph = self.graph
        if self.variant != "constant-tactile":
            return graph.planned_motion()[0].pose
        measured = graph.measurements[graph.boundary]
        rotation = graph.commands[graph.boundary + 1].rotation
        contact = graph.current_node().contact.pose.translation
        return baseline_constant_tactile(measured.gripper, rotation, contact, measured.tactile, self.delta_ref,
                                         self.controller.baseline_gain)

    def step(self, arm: Optional[ContactFormation] = None) -> dict:
        """Execute one control step; ``arm`` observes the detector with that formation"""
        target = self._target()
        state = self.sim.step(target)
        sample = self.sim.measure()
        report = self.graph.advance(Measurement(sample.gripper, sample.tactile), self._next_command())
        self.t += 1
        nominal = self.nominal[self.phase_index] if self.phase_index < len(self.nominal) else None
        self.phase_index += 1

        residual = self.graph.whitened_torque_residual()
        event = self.detector.observe(residual, arm, self.t) if arm is not None else None
        record = self._record(state, residual, nominal, report.solve.iterations, report.solve.final_cost)
        record["event"] = None if event is None else event.target.value
        self.steps.append(record)
        return record

    def _record(self, state: SimulatorState, residual: float, nominal, iterations: int, cost: float) -> dict:
        node = self.graph.current_node()
        K = self.graph.grasp_estimate()
        forces = self.force_estimates(state)
        ft = self.sim.ft_ground_truth(state)
        true_contact = state.contact_point
        achieved = state.gripper.rotation @ self.phase_start.rotation.T
        true_offset = None
        if true_contact is not None:
            true_offset = offset(state.gripper, state.equilibrium, Pose(np.eye(3), true_contact))
        return {
            "trial": self.trial,
            "t": self.t,
            "phase": self.phase,
            "formation_true": _formation(state.formation),
            "formation_est": node.contact.formation.value,
            "gripper": state.gripper.to_list(),
            "tactile_true": _vector(state.tactile),
            "tactile_measured": _vector(self.graph.measurements[self.graph.boundary].tactile),
            "wrench_est": _vector(node.wrench.as_vector()),
            "stiffness_est": _vector(K.stiffness),
            "command_rotvec": None if nominal is None else _vector(Pose(nominal, np.zeros(3)).rotvec()),
            "achieved_rotvec": _vector(Pose(achieved, np.zeros(3)).rotvec()),
            "torque_residual": float(residual),
            "threshold": float(self.controller.detection_threshold),
            "offset_est": float(offset_distance(node)),
            "offset_true": _number(true_offset),
            "contact_est": _vector(node.contact.pose.translation),
            "contact_true": _vector(true_contact),
            "tan_norm": state.tangential_ratio if state.in_contact else None,
            "slip_mm": state.slip_distance * 1e3,
            "slip_deg": math.degrees(state.slip_rotation),
            "ft": _vector(ft),
            "force_est": _vector(forces["full"]),
            "misalignment": {name: _number(angle_between(f, ft[3:])) if state.in_contact else None
                             for name, f in forces.items()},
            "iterations": int(iterations),
            "cost": float(cost),
        }

    def force_estimates(self, state: SimulatorState) -> Dict[str, np.ndarray]:
        """Environment-frame force estimates: full wrench, linear model with estimated K, linear model with prior K"""
        graph = self.graph
        node = graph.current_node()
        R = node.gripper.pose.rotation
        delta = graph.measurements[graph.boundary].tactile[3:]
        return {
            "full": -R @ node.wrench.force,
            "no-delta": -R @ (graph.grasp_estimate().k * delta),
            "no-K": -R @ (self.grasp_prior.k * delta),
        }

    # --- helpers --------------------------------------------------------------

    def localization_error_mm(self) -> Optional[float]:
        true = self.sim.state.contact_point
        if true is None:
            return None
        est = self.graph.current_node().contact.pose.translation
        return float(np.linalg.norm(est - true) * 1e3)

    def phase_row(self, phase: str, steps: List[dict], slip_before: SimulatorState, **extra) -> MetricsRow:
        ratios = [s["tan_norm"] for s in steps if s["tan_norm"] is not None]
        mean, peak = ratio_stats(ratios)
        angles = [s["misalignment"]["full"] for s in steps if s["misalignment"]["full"] is not None]
        state = self.sim.state
        return MetricsRow(
            trial=self.trial,
            object=self.scenario.object,
            mu=self.scenario.mu,
            protocol=self.scenario.protocol,
            variant=self.variant,
            phase=phase,
            tan_norm_mean=mean,
            tan_norm_max=peak,
            slip_mm=(state.slip_distance - slip_before.slip_distance) * 1e3,
            slip_deg=math.degrees(state.slip_rotation - slip_before.slip_rotation),
            misalignment_deg=float(np.mean(angles)) if angles else None,
            steps=len(steps),
            **extra,
        )

    def failure_row(self, phase: str, reason: str, **extra) -> MetricsRow:
        return MetricsRow(trial=self.trial, object=self.scenario.object, mu=self.scenario.mu,
                          protocol=self.scenario.protocol, variant=self.variant, phase=phase, failure=reason, **extra)

    def run_phase(self, phase: str, nominal: Sequence[np.ndarray]) -> List[dict]:
        self.load(phase, nominal)
        out = []
        for _ in range(len(nominal)):
            out.append(self.step())
            if not self.sim.state.in_contact:
                raise TrialFailure(f"lost contact during {phase} phase")
        return out


# --- protocols ----------------------------------------------------------------

def point_trial(scenario: Scenario, trial: int, variant: Optional[str] = None) -> TrialResult:
    """Small conical spiral then a large cone, metrics per phase"""
    runner = TrialRunner(scenario, trial, variant)
    c = scenario.controller
    rows: List[MetricsRow] = []
    try:
        runner.start(POINT_TILT_DEG)
        small = cmd.conical_spiral(c.small_angle_deg, c.spiral_steps, c.spiral_turns)
        large = cmd.cone(c.large_angle_deg, c.cone_steps, start_deg=c.small_angle_deg)
        runner.build_graph("small", small)
        before = runner.sim.state
        steps = [runner.step() for _ in range(len(small))]
        rows.append(runner.phase_row("small", steps, before, localization_error_mm=runner.localization_error_mm()))

        # the large cone shares the spiral's start orientation
        before = runner.sim.state
        runner.load("large", large, start=runner.phase_start)
        steps = [runner.step() for _ in range(len(large))]
        rows.append(runner.phase_row("large", steps, before, localization_error_mm=runner.localization_error_mm()))
        return TrialResult(trial, runner.seed, rows, runner.steps)
    except (TrialFailure, TactileECError) as e:
        logger.warning(f"Point trial {trial} ({scenario.object}) failed: {str(e)}")
        done = {row.phase for row in rows}
        rows += [runner.failure_row(p, str(e)) for p in ("small", "large") if p not in done]
        return TrialResult(trial, runner.seed, rows, runner.steps, str(e))


def _edge_direction(runner: TrialRunner) -> np.ndarray:
    """Horizontal direction from the touching vertex along its lower neighbouring edge, with a random error"""
    sim = runner.sim
    state = sim.state
    vertex = state.active[0]
    world = sim.world_vertices(state.equilibrium)
    neighbours = [b if a == vertex else a for a, b in runner.model.edges if vertex in (a, b)]
    other = min(neighbours, key=lambda j: world[j, 2])
    direction = world[other] - world[vertex]
    direction[2] = 0.0
    error = np.deg2rad(runner.rng.uniform(-1, 1) * runner.controller.edge_direction_error_deg)
    return so3_exp(error * E_Z) @ (direction / np.linalg.norm(direction))


def _first_step(steps: List[dict], formation: ContactFormation) -> Optional[int]:
    ranks = {f.value: f.rank for f in ContactFormation}
    for s in steps:
        if s["formation_true"] is not None and ranks[s["formation_true"]] >= formation.rank:
            return s["t"]
    return None


def multi_trial(scenario: Scenario, trial: int, variant: Optional[str] = None) -> TrialResult:
    """Point localization, tilt toward an edge, line exploration, rotation into a patch"""
    runner = TrialRunner(scenario, trial, variant)
    c = scenario.controller
    rows: List[MetricsRow] = []
    phase = "point"
    try:
        runner.start(MULTI_TILT_DEG)
        small = cmd.conical_spiral(c.small_angle_deg, c.spiral_steps, c.spiral_turns)
        runner.build_graph("point", small)
        before = runner.sim.state
        steps = [runner.step() for _ in range(len(small))]
        rows.append(runner.phase_row("point", steps, before, localization_error_mm=runner.localization_error_mm()))

        phase = "line"
        before = runner.sim.state
        direction = _edge_direction(runner)
        axis = cmd.tilt_axis(direction)
        runner.load("tilt", cmd.tilt_towards(direction, c.tilt_step_deg, c.tilt_max_steps))
        tilt_steps, event = [], None
        for _ in range(c.tilt_max_steps):
            record = runner.step(arm=ContactFormation.POINT)
            tilt_steps.append(record)
            if record["event"] == ContactFormation.LINE.value:
                event = record["t"]
                break
        true_line = _first_step(tilt_steps, ContactFormation.LINE)
        if event is None:
            rows.append(runner.phase_row("line", tilt_steps, before, transition_success=False,
                                         failure="no point-line transition detected"))
            rows.append(runner.failure_row("patch", "line phase not reached", transition_success=False))
            return TrialResult(trial, runner.seed, rows, runner.steps, "no point-line transition detected")

        latency = None if true_line is None else event - true_line
        success = latency is not None and 0 <= latency <= DETECTION_WINDOW
        line_axis = np.cross(E_Z, axis)
        runner.graph.set_formation(ContactFormation.LINE, line_direction=line_axis)
        runner.graph.solve()
        transition_pose = runner.sim.state.gripper

        pause = [np.eye(3)] * c.pause_steps
        sinusoid = cmd.sinusoid_about(axis, line_axis, c.sinusoid_amplitude_deg, c.sinusoid_periods, c.sinusoid_steps)
        runner.load("line", pause + sinusoid)
        line_steps, evaluation = [], None
        for _ in range(len(runner.schedule)):
            record = runner.step()
            line_steps.append(record)
            if runner.sim.state.formation not in (ContactFormation.LINE, ContactFormation.PATCH):
                raise TrialFailure("lost line contact")
            rotated = cmd.rotation_angle(transition_pose.rotation.T @ runner.sim.state.gripper.rotation)
            if evaluation is None and rotated >= np.deg2rad(c.line_eval_deg):
                evaluation = _line_metrics(runner)
        if evaluation is None:
            evaluation = _line_metrics(runner)
        rows.append(runner.phase_row("line", tilt_steps + line_steps, before, transition_success=success,
                                     detection_latency=latency, **evaluation))

        phase = "patch"
        before = runner.sim.state
        runner.load("patch", _patch_rotation(runner, line_axis))
        patch_steps, patch_event = [], None
        for k in range(c.patch_max_steps):
            arm = ContactFormation.LINE if k >= c.patch_arm_steps else None
            record = runner.step(arm=arm)
            patch_steps.append(record)
            if record["event"] == ContactFormation.PATCH.value:
                patch_event = record["t"]
                break
        true_patch = _first_step(line_steps + patch_steps, ContactFormation.PATCH)
        patch_latency = None
        if patch_event is not None and true_patch is not None:
            patch_latency = patch_event - true_patch
        patch_success = patch_latency is not None and 0 <= patch_latency <= DETECTION_WINDOW
        if patch_event is not None:
            runner.graph.set_formation(ContactFormation.PATCH)
        rows.append(runner.phase_row("patch", patch_steps, before, transition_success=patch_success,
                                     detection_latency=patch_latency))
        return TrialResult(trial, runner.seed, rows, runner.steps)
    except (TrialFailure, TactileECError) as e:
        logger.warning(f"Multi-formation trial {trial} ({scenario.object}) failed in {phase} phase: {str(e)}")
        done = {row.phase for row in rows}
        for p in ("point", "line", "patch"):
            if p not in done:
                success = None if p == "point" else False
                rows.append(runner.failure_row(p, str(e), transition_success=success))
        return TrialResult(trial, runner.seed, rows, runner.steps, str(e))


def _line_metrics(runner: TrialRunner) -> dict:
    state = runner.sim.state
    if state.formation != ContactFormation.LINE or len(state.anchors) != 2:
        return {"line_angle_deg": None, "line_distance_mm": None}
    contact = runner.graph.current_node().contact.pose
    p1, p2 = state.anchors
    return {
        "line_angle_deg": line_angle(contact.rotation[:, 0], p2 - p1),
        "line_distance_mm": point_line_distance(contact.translation, p1, p2) * 1e3,
    }


def _patch_rotation(runner: TrialRunner, line_axis: np.ndarray) -> List[np.ndarray]:
    """Rotation about the line axis in the sense that lowers the gripper"""
    c = runner.controller
    g = runner.graph.values[("g", runner.graph.boundary)]
    contact = runner.graph.current_node().contact.pose.translation
    step = np.deg2rad(c.tilt_step_deg)
    heights = {}
    for sign in (1.0, -1.0):
        R = so3_exp(sign * step * line_axis)
        heights[sign] = float((R @ (g.translation - contact) + contact)[2])
    sign = min(heights, key=heights.get)
    return cmd.rotate_about(sign * line_axis, c.tilt_step_deg, c.patch_max_steps)


def force_trial(scenario: Scenario, trial: int) -> TrialResult:
    """Point protocol with the proposed controller; one row per force-estimate variant"""
    result = point_trial(scenario, trial, variant="proposed")
    rows = []
    for name in FORCE_VARIANTS:
        angles = [s["misalignment"][name] for s in result.steps if s["misalignment"][name] is not None]
        rows.append(MetricsRow(
            trial=trial,
            object=scenario.object,
            mu=scenario.mu,
            protocol="force-eval",
            variant="proposed",
            phase=name,
            misalignment_deg=float(np.mean(angles)) if angles else None,
            steps=len(angles),
            failure=result.failure,
        ))
    return TrialResult(trial, result.seed, rows, result.steps, result.failure)


PROTOCOLS = {
    "point": point_trial,
    "multi": multi_trial,
    "force-eval": force_trial,
}


def run_trial(scenario: Scenario, trial: int) -> TrialResult:
    logger.info(f"Trial {trial} start: {scenario.protocol} / {scenario.object} / {scenario.variant} (mu={scenario.mu})")
    result = PROTOCOLS[scenario.protocol](scenario, trial)
    status = "failed" if result.failure else "finished"
    logger.info(f"Trial {trial} {status} after {len(result.steps)} steps")
    return result


def run_trials(scenario: Scenario, workers: Optional[int] = None) -> List[TrialResult]:
    workers = max(1, min(workers or settings.WORKERS, scenario.trials))
    if workers == 1:
        return [run_trial(scenario, i) for i in range(scenario.trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: run_trial(scenario, i), range(scenario.trials)))


def run_point_experiment(scenario: Scenario, workers: Optional[int] = None) -> ExperimentOutcome:
    scenario = scenario.model_copy(update={"protocol": "point"})
    return ExperimentOutcome(scenario, run_trials(scenario, workers))


def run_multi_formation_experiment(scenario: Scenario, workers: Optional[int] = None) -> ExperimentOutcome:
    scenario = scenario.model_copy(update={"protocol": "multi"})
    return ExperimentOutcome(scenario, run_trials(scenario, workers))


def run_force_estimation_eval(scenario: Scenario, workers: Optional[int] = None) -> ExperimentOutcome:
    scenario = scenario.model_copy(update={"protocol": "force-eval", "variant": "proposed"})
    trials = run_trials(scenario, workers)
    return ExperimentOutcome(scenario, trials, misalignment_table([r for t in trials for r in t.rows]))


def misalignment_table(rows: List[MetricsRow]) -> pd.DataFrame:
    """Mean misalignment (deg) per object and force-estimate variant"""
    frame = rows_frame(rows)
    frame = frame[frame["phase"].isin(FORCE_VARIANTS)]
    columns = ["object", "variant", "mean_misalignment_deg", "std_misalignment_deg", "trials"]
    if frame.empty:
        return pd.DataFrame(columns=columns)
    out = []
    for (obj, name), group in frame.groupby(["object", "phase"], sort=False):
        values = pd.to_numeric(group["misalignment_deg"], errors="coerce").dropna()
        out.append({
            "object": obj,
            "variant": name,
            "mean_misalignment_deg": float(values.mean()) if len(values) else math.nan,
            "std_misalignment_deg": float(values.std(ddof=0)) if len(values) else math.nan,
            "trials": int(len(values)),
        })
    order = {name: i for i, name in enumerate(FORCE_VARIANTS)}
    out.sort(key=lambda r: (r["object"], order[r["variant"]]))
    return pd.DataFrame(out, columns=columns)


def run_experiment(scenario: Scenario, workers: Optional[int] = None) -> ExperimentOutcome:
    runners = {
        "point": run_point_experiment,
        "multi": run_multi_formation_experiment,
        "force-eval": run_force_estimation_eval,
    }
    return runners[scenario.protocol](scenario, workers)


# --- energy / tangential force study -------------------------------------------

def energy_tangential_grid(scenario: Scenario, offset_target: float = 1.5e-3, span_deg: float = 10.0,
                           points: int = 9, trial: int = 0) -> pd.DataFrame:
    """Grasp energy and tangential/normal ratio over gripper orientations pivoted about a fixed point contact.

    Each orientation is pressed vertically until the true offset distance equals ``offset_target``.
    """
    runner = TrialRunner(scenario, trial)
    state = runner.start(POINT_TILT_DEG)
    sim = runner.sim
    vertex = state.active[0]
    anchor = state.anchors[0]
    base = state.gripper
    contact = Pose(np.eye(3), anchor)
    angles = np.deg2rad(np.linspace(-span_deg, span_deg, points))

    out = []
    for ax in angles:
        for ay in angles:
            R = so3_exp([ax, ay, 0.0])
            pivoted = Pose(R @ base.rotation, R @ (base.translation - anchor) + anchor)
            contacts = ContactSet((vertex,), anchor[None, :], state.equilibrium)

            def pressed(depth):
                return Pose(pivoted.rotation, pivoted.translation - depth * E_Z)

            def excess(depth):
                eq = sim.equilibrium(pressed(depth), contacts)
                return offset(eq.gripper, eq.pose, contact) - offset_target

            try:
                depth = brentq(excess, -0.02, 0.02, xtol=1e-12)
            except ValueError:
                continue
            eq = sim.equilibrium(pressed(depth), contacts)
            force = eq.forces[0]
            if force[2] <= 0:
                continue
            out.append({
                "rx_deg": float(np.rad2deg(ax)),
                "ry_deg": float(np.rad2deg(ay)),
                "energy": sim.energy(eq.pose, eq.gripper),
                "normal": float(force[2]),
                "tangential": float(np.linalg.norm(force[:2])),
                "ratio": float(np.linalg.norm(force[:2]) / force[2]),
            })
    return pd.DataFrame(out, columns=["rx_deg", "ry_deg", "energy", "normal", "tangential", "ratio"])


def energy_minimizer_gap(grid: pd.DataFrame) -> float:
    """Excess tangential force at the minimum-energy pose over the grid minimum, as a fraction of the normal force.

    The tangential force vanishes near the optimum, so the excess is scaled by the normal force
    rather than by the smallest tangential force.
    """
    if grid.empty:
        return math.nan
    at_min_energy = float(grid.loc[grid["energy"].idxmin(), "ratio"])
    return at_min_energy - float(grid["ratio"].min())
