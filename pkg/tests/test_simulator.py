import logging

import numpy as np
import pytest

from tactile_ec.core.config import SimulationConfig
from tactile_ec.core.exceptions import InfeasibleGeometryError
from tactile_ec.estimation.state import ContactFormation, GraspParams
from tactile_ec.geometry.lie import Pose
from tactile_ec.simulation import objects
from tactile_ec.simulation.objects import ObjectModel, make_object
from tactile_ec.simulation.simulator import TENSION_TOL, ContactSimulator, GroundTruth

PRESS = 0.002
STIFFNESS = GraspParams(kappa=[2.0, 3.0, 1.0], k=[2000.0, 1500.0, 3000.0], eta=[0.0, 0.0, 0.0])


def _pin() -> ObjectModel:
    return ObjectModel("pin", [[0.0, 0.0, 0.0]], (), Pose.from_translation([0.0, 0.0, 0.08]), [0.0, 0.0, 0.04])


def _simulator(model, mu=0.5, **kwargs) -> ContactSimulator:
    return ContactSimulator(model, GroundTruth(STIFFNESS, mu), **kwargs)


def _pressed(sim, gripper, depth=PRESS):
    touch = sim.touching_pose(gripper)
    sim.reset(touch)
    return sim.step(Pose(touch.rotation, touch.translation - [0.0, 0.0, depth]))


def test_free_object_rests_in_the_grasp():
    sim = _simulator(objects.rectangle())
    state = sim.reset(Pose.from_translation([0.0, 0.0, 0.5]))
    assert state.formation is None
    assert not state.in_contact
    assert state.equilibrium.allclose(state.gripper)
    assert np.allclose(state.tactile, 0.0)
    assert np.allclose(state.grasp_wrench, 0.0)
    assert state.contact_point is None


def test_vertical_press_on_a_single_vertex():
    sim = _simulator(_pin())
    state = _pressed(sim, Pose.from_translation([0.01, -0.02, 0.3]))
    assert state.formation == ContactFormation.POINT
    assert state.forces[0, 2] == pytest.approx(PRESS * STIFFNESS.k[2], rel=1e-6)
    assert np.allclose(state.forces[0, :2], 0.0, atol=1e-9)
    assert np.allclose(state.tactile, [0.0, 0.0, 0.0, 0.0, 0.0, -PRESS], atol=1e-9)
    assert state.tangential_ratio == pytest.approx(0.0, abs=1e-9)
    assert state.slip_distance == 0.0
    assert np.allclose(state.contact_point, [0.01, -0.02, 0.0])


def test_symmetric_press_gives_a_patch_without_tangential_force():
    sim = _simulator(objects.rectangle())
    state = _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
    assert state.formation == ContactFormation.PATCH
    assert len(state.active) == 4
    assert state.forces[:, 2].sum() == pytest.approx(PRESS * STIFFNESS.k[2], rel=1e-6)
    assert np.allclose(state.extrinsic_wrench[3:5], 0.0, atol=1e-8)
    assert state.balance_residual < 1e-8


def test_extrinsic_wrench_balances_the_grasp():
    sim = _simulator(_pin())
    _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
    state = sim.step(Pose.from_rotvec([0.05, 0.0, 0.0], sim.state.gripper.translation))
    scale = max(1.0, float(np.linalg.norm(state.extrinsic_wrench)))
    assert np.allclose(sim.ft_ground_truth(), -sim.grasp_wrench_world(), atol=1e-6 * scale)


def test_measurements_are_exact_without_noise_and_reproducible_with_a_seed():
    sim = _simulator(_pin())
    state = _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
    exact = sim.measure()
    assert exact.gripper.allclose(state.gripper)
    assert np.allclose(exact.tactile, state.tactile)
    assert exact.timestamp == state.step

    noisy = _simulator(_pin(), gripper_sigma=(1e-4, 1e-4), tactile_sigma=1e-4)
    noisy_state = _pressed(noisy, Pose.from_translation([0.0, 0.0, 0.3]))
    a, b = noisy.measure(noisy_state, seed=7), noisy.measure(noisy_state, seed=7)
    assert a.gripper.allclose(b.gripper, tol=1e-12)
    assert np.array_equal(a.tactile, b.tactile)
    assert not np.allclose(a.tactile, noisy_state.tactile)


def test_equilibrium_is_an_energy_minimum():
    model = make_object("rectangle", np.random.default_rng(3), max_tilt_deg=20.0)
    sim = _simulator(model)
    _pressed(sim, Pose.from_rotvec([0.35, 0.0, 0.0], [0.0, 0.0, 0.3]))
    assert sim.state.in_contact
    assert sim.kkt_check(n=50)


def test_rolling_keeps_vertices_above_the_plane_and_friction_inside_the_cone():
    mu = 0.3
    sim = _simulator(objects.rectangle(), mu=mu)
    state = _pressed(sim, Pose.from_rotvec([0.4, 0.0, 0.0], [0.0, 0.0, 0.3]))
    for _ in range(12):
        g = state.gripper
        target = Pose(Pose.from_rotvec([-0.02, 0.01, 0.0]).rotation @ g.rotation, g.translation + [0.0, 5e-4, 0.0])
        state = sim.step(target)
        assert sim.min_vertex_height() >= -1e-8
        assert state.balance_residual < 1e-8
        if state.formation in (ContactFormation.POINT, ContactFormation.LINE):
            assert (state.forces[:, 2] >= -TENSION_TOL).all()
            assert state.tangential_ratio <= mu + 1e-6
        assert state.slip_distance >= 0.0
    assert state.step == 13
    assert len(sim.history) == 14


def test_equilibrium_does_not_advance_the_state():
    sim = _simulator(_pin())
    state = _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
    preview = sim.equilibrium(Pose.from_translation(state.gripper.translation - [0.0, 0.0, 0.001]))
    assert preview.formation == ContactFormation.POINT
    assert sim.state is state


def test_ground_truth_sampling_stays_within_spread():
    config = SimulationConfig(stiffness_spread=0.2)
    truth = GroundTruth.sample(config, 0.4, np.random.default_rng(0))
    prior = np.concatenate([config.grasp_prior.kappa, config.grasp_prior.k])
    ratio = truth.stiffness.stiffness / prior
    assert np.all((ratio >= 0.8) & (ratio <= 1.2))
    assert truth.mu == 0.4
    assert truth.linear


def test_object_catalogue():
    assert len(objects.rectangle().vertices) == 4
    assert len(objects.hexagon().vertices) == 6
    assert objects.hexagon().shortest_edge() == pytest.approx(objects.HEXAGON_EDGE)
    first, again = objects.irregular(2), objects.irregular(2)
    assert np.array_equal(first.vertices, again.vertices)
    assert 3 <= len(first.vertices) <= 7
    assert all(make_object(name).name == name for name in objects.object_names())
    with pytest.raises(InfeasibleGeometryError):
        make_object("sphere")
    with pytest.raises(InfeasibleGeometryError):
        ObjectModel("bad", [[0, 0, 0]], ((0, 3),), Pose.identity(), [0, 0, 0])


def test_rectangle_edges_connect_neighbours():
    model = objects.rectangle()
    assert model.edge_between(0, 1) == (0, 1)
    assert model.edge_between(3, 0) == (3, 0)
    assert model.edge_between(0, 2) is None
    # upright grasp: vertices sit the nominal height below the gripper
    assert np.allclose(model.vertices_in_grasp[:, 2], -objects.NOMINAL_HEIGHT)


def test_lifting_releases_the_contact_once():
    sim = _simulator(_pin())
    state = _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
    lifted = Pose.from_translation(state.gripper.translation + [0.0, 0.0, 2 * PRESS])
    state = sim.step(lifted)
    assert state.formation is None
    assert state.equilibrium.allclose(lifted)
    assert sim.min_vertex_height() == pytest.approx(PRESS, abs=1e-9)
    # pressing again finds the same vertex
    state = sim.step(Pose.from_translation(lifted.translation - [0.0, 0.0, 2 * PRESS]))
    assert state.formation == ContactFormation.POINT
    assert state.forces[0, 2] == pytest.approx(PRESS * STIFFNESS.k[2], rel=1e-6)


def test_balance_residual_after_a_rotated_press():
    model = make_object("hexagon", np.random.default_rng(5), max_tilt_deg=15.0)
    sim = _simulator(model)
    state = _pressed(sim, Pose.from_rotvec([0.2, -0.15, 0.0], [0.0, 0.0, 0.3]))
    for _ in range(5):
        g = state.gripper
        state = sim.step(Pose(Pose.from_rotvec([0.005, 0.01, 0.0]).rotation @ g.rotation, g.translation))
        assert state.balance_residual < 1e-8
    assert sim.kkt_check(n=50)


def _sticking_pin(mu=0.5):
    """Pin pressed and then rolled without slip so the contact force leaves the cone"""
    sim = _simulator(_pin(), mu=mu, slip=False)
    state = _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
    state = sim.step(Pose.from_rotvec([0.1, 0.0, 0.0], state.gripper.translation))
    return sim, sim.equilibrium(state.gripper)


def test_friction_boundary_does_not_slip():
    sim, result = _sticking_pin()
    ratio = sim._ratio(result)
    assert ratio > 0.2
    settled, distance, rotation = sim.step_friction(result, mu=ratio)
    assert distance == 0.0 and rotation == 0.0
    assert settled is result

    settled, distance, _ = sim.step_friction(result, mu=2.0 * ratio)
    assert distance == 0.0


def test_slip_brings_the_force_back_onto_the_cone():
    sim, result = _sticking_pin()
    settled, distance, _ = sim.step_friction(result, mu=0.2)
    assert distance > 0.0
    assert sim._ratio(settled) == pytest.approx(0.2, abs=1e-6)
    # the pin slides against the tangential force
    force = result.forces[0]
    moved = settled.contacts.anchors[0] - result.contacts.anchors[0]
    assert moved[:2] @ force[:2] < 0


def test_slip_matches_dense_stepping():
    def rolled(steps):
        sim = _simulator(_pin(), mu=0.2)
        state = _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
        start = state.gripper.translation
        for k in range(1, steps + 1):
            state = sim.step(Pose.from_rotvec([0.1 * k / steps, 0.0, 0.0], start))
        return state

    coarse, dense = rolled(1), rolled(40)
    assert dense.slip_distance > 0.0
    assert coarse.slip_distance == pytest.approx(dense.slip_distance, rel=0.05)
    assert coarse.tangential_ratio == pytest.approx(0.2, abs=1e-6)


def test_stick_limit_brackets_and_caps(caplog):
    assert ContactSimulator._stick_limit(lambda s: 0.3 - s) == pytest.approx(0.3, abs=1e-10)
    assert ContactSimulator._stick_limit(lambda s: -1.0) == 0.0
    with caplog.at_level(logging.DEBUG, logger="tactile_ec.simulation.simulator"):
        assert ContactSimulator._stick_limit(lambda s: 1.0, limit=0.5) == 0.5
    assert "Friction cone not reached" in caplog.text


def test_measurement_noise_matches_its_sigmas():
    sigma_rot, sigma_trn, sigma_tactile = 2e-4, 5e-4, 1e-4
    sim = _simulator(_pin(), gripper_sigma=(sigma_rot, sigma_trn), tactile_sigma=sigma_tactile, seed=11)
    state = _pressed(sim, Pose.from_translation([0.0, 0.0, 0.3]))
    samples = [sim.measure(state) for _ in range(10_000)]
    gripper = np.array([state.gripper.local(m.gripper) for m in samples])
    tactile = np.array([m.tactile - state.tactile for m in samples])
    expected = np.array([sigma_rot] * 3 + [sigma_trn] * 3)
    assert np.allclose(gripper.std(axis=0), expected, rtol=0.05)
    assert np.allclose(tactile.std(axis=0), sigma_tactile, rtol=0.05)
    assert np.allclose(tactile.mean(axis=0), 0.0, atol=5 * sigma_tactile / np.sqrt(len(samples)))
