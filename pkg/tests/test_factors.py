import numpy as np
import pytest

from tactile_ec.core.exceptions import NonPositiveStiffnessError
from tactile_ec.estimation import factors as F
from tactile_ec.estimation.factors import Factor, FactorKind
from tactile_ec.estimation.state import (
    ContactFormation,
    ContactPose,
    GraspParams,
    GripperPose,
    IntrinsicWrench,
    ObjectPosePair,
    StateNode,
)
from tactile_ec.geometry.lie import Pose, numerical_jacobian


def near(base: Pose, rng, scale=0.05) -> Pose:
    return base.retract(rng.normal(scale=scale, size=6))


def assert_jacobians(function, variables, **params):
    r, Js = function(*variables, jacobians=True, **params)
    assert len(Js) == len(variables)
    N = numerical_jacobian(lambda *v: np.atleast_1d(function(*v, **params)), variables)
    A = np.hstack([np.atleast_2d(J) for J in Js])
    assert A.shape == N.shape
    assert np.linalg.norm(A - N) <= 1e-5 * max(1.0, float(np.linalg.norm(N)))
    assert np.allclose(np.atleast_1d(r), np.atleast_1d(function(*variables, **params)))


LINEARIZATION_POINTS = 50


@pytest.fixture(params=range(LINEARIZATION_POINTS))
def scene(request, grasp):
    """Random linearization point: gripper above a contact, object states near the grasp"""
    rng = np.random.default_rng(request.param)
    g = Pose.from_rotvec(rng.normal(scale=0.3, size=3), rng.normal(scale=0.02, size=3) + [0.0, 0.0, 0.12])
    ro = near(g, rng, 0.02)
    eo = near(ro, rng, 0.01)
    c = Pose.from_rotvec(rng.normal(scale=0.3, size=3), np.append(rng.normal(scale=0.02, size=2), 0.0))
    return {
        "rng": rng,
        "g": g, "ro": ro, "eo": eo, "c": c,
        "g2": near(g, rng), "ro2": near(ro, rng), "eo2": near(eo, rng), "c2": near(c, rng, 0.02),
        "w": rng.normal(size=6), "w2": rng.normal(size=6),
        "K": grasp.to_vector() + rng.normal(scale=0.05, size=9),
        "delta": rng.normal(scale=0.01, size=6), "delta2": rng.normal(scale=0.01, size=6),
    }


def test_prior_jacobians(scene):
    rng = scene["rng"]
    assert_jacobians(F.prior_grasp, [scene["K"]], K_prior=np.zeros(9))
    assert_jacobians(F.prior_object, [scene["ro"]], prior=near(scene["ro"], rng))
    assert_jacobians(F.prior_contact, [scene["c"]], prior=near(scene["c"], rng))
    assert_jacobians(F.gripper_pose, [scene["g"]], measured=near(scene["g"], rng, 0.01))


@pytest.mark.parametrize("formation", list(ContactFormation))
def test_contact_convention_jacobian(scene, formation):
    assert_jacobians(F.contact_convention, [scene["c"]], formation=formation)


def test_contact_convention_dimensions(scene):
    assert F.contact_convention(scene["c"], ContactFormation.POINT).shape == (3,)
    assert F.contact_convention(scene["c"], ContactFormation.LINE).shape == (2,)
    assert np.allclose(F.contact_convention(Pose.from_rotvec([0, 0, 0.7]), ContactFormation.LINE), 0.0)


def test_tactile_factor_jacobians(scene):
    s = scene
    assert_jacobians(F.tactile_total, [s["g"], s["ro"], s["eo"]], delta=s["delta"])
    assert_jacobians(F.tactile_incremental, [s["g"], s["eo"], s["g2"], s["eo2"]],
                     delta_prev=s["delta"], delta=s["delta2"])


def test_rigid_body_factor_jacobians(scene):
    s = scene
    assert_jacobians(F.grasp_rigidity, [s["g"], s["ro"], s["g2"], s["ro2"]])
    assert_jacobians(F.contact_in_object, [s["eo"], s["c"], s["eo2"], s["c2"]])
    assert_jacobians(F.contact_on_environment, [s["c"], s["c2"]])


def test_torque_jacobians(scene):
    s = scene
    assert_jacobians(F.torque_point, [s["g"], s["w"], s["c"], s["K"]])
    assert_jacobians(F.torque_line, [s["g"], s["w"], s["c"], s["K"]])


def test_wrench_jacobians(scene):
    s = scene
    assert_jacobians(F.wrench_total, [s["g"], s["ro"], s["eo"], s["w"], s["K"]])
    assert_jacobians(F.wrench_incremental, [s["g"], s["eo"], s["w"], s["g2"], s["eo2"], s["w2"], s["K"]])


def test_control_factor_jacobians(scene):
    s = scene
    assert_jacobians(F.desired_rotation, [s["g"], s["g2"]], command=Pose.from_rotvec([0.01, 0.02, 0]).rotation)
    assert_jacobians(F.motion_effort, [s["g"], s["g2"], s["c"]])
    assert_jacobians(F.tactile_energy, [s["w"], s["K"]])


def test_contact_maintenance_active_and_inactive(scene):
    s = scene
    assert_jacobians(F.contact_maintenance, [s["ro"], s["eo"], s["c"]], epsilon=0.5)
    r, Js = F.contact_maintenance(s["ro"], s["eo"], s["c"], epsilon=-0.5, jacobians=True)
    assert r[0] == 0.0
    assert all(np.allclose(J, 0.0) for J in Js)


def test_contact_maintenance_hinge_values():
    contact = Pose.identity()
    equilibrium = Pose.identity()
    # resting 2 mm below equilibrium: pressed by 2 mm
    resting = Pose.from_translation([0.0, 0.0, -0.002])
    assert F.contact_maintenance(resting, equilibrium, contact, epsilon=0.0015)[0] == 0.0
    assert F.contact_maintenance(resting, equilibrium, contact, epsilon=0.003)[0] == pytest.approx(0.001)


def test_tactile_energy_whitens_by_stiffness(grasp):
    w = grasp.stiffness * 0.01
    r = F.tactile_energy(w, grasp)
    assert np.allclose(r, np.sqrt(grasp.stiffness) * 0.01)
    assert 0.5 * r @ r == pytest.approx(0.5 * np.sum(grasp.stiffness * 0.01 ** 2))


def test_nonpositive_stiffness_rejected():
    K = np.concatenate([np.full(6, -np.inf), np.zeros(3)])
    with pytest.raises(NonPositiveStiffnessError):
        F.tactile_energy(np.ones(6), K)


def test_torque_point_vanishes_for_consistent_wrench():
    K = GraspParams(kappa=[1, 1, 1], k=[1, 1, 1], eta=[0, 0, 0])
    contact = Pose.from_translation([0.0, 0.0, -0.1])
    w = np.array([0.0, -0.1, 0.0, 1.0, 0.0, 0.0])
    assert np.allclose(F.torque_point(Pose.identity(), w, contact, K), 0.0)
    # a line contact only constrains the moment about the line direction
    w_line = w + np.array([0.0, 0.3, 0.0, 0.0, 0.0, 0.0])
    assert np.allclose(F.torque_line(Pose.identity(), w_line, contact, K), 0.0)


def _node(w, contact, formation=ContactFormation.POINT):
    g = Pose.identity()
    return StateNode(1, GripperPose(g), ObjectPosePair(g, g), IntrinsicWrench.from_vector(w),
                     ContactPose(contact, formation))


def test_whitened_torque_residual(noise):
    K = GraspParams(kappa=[1, 1, 1], k=[1, 1, 1], eta=[0, 0, 0])
    contact = Pose.from_translation([0.0, 0.0, -0.1])
    consistent = np.array([0.0, -0.1, 0.0, 1.0, 0.0, 0.0])
    assert F.whitened_torque_residual(_node(consistent, contact), K, noise) == pytest.approx(0.0, abs=1e-12)
    violated = consistent + np.array([0.05, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert F.whitened_torque_residual(_node(violated, contact), K, noise) == pytest.approx(0.05 / (0.1 * np.sqrt(3.0)))
    assert F.whitened_torque_residual(_node(violated, contact), K, noise, ContactFormation.PATCH) == 0.0
    assert F.whitened_torque_residual(_node(np.zeros(6), contact), K, noise) == 0.0


def test_factor_weights_and_cost(grasp):
    factor = Factor(FactorKind.TACTILE_ENERGY, (("w", 1), ("K", 0)), [0.5, 1, 1, 1, 1, np.inf], F.tactile_energy)
    values = {("w", 1): grasp.stiffness * 0.01, ("K", 0): grasp.to_vector()}
    assert factor.dimension == 6
    assert factor.weights[-1] == 0.0
    rw = factor.whitened(values)
    assert rw[-1] == 0.0
    assert rw[0] == pytest.approx(2.0 * F.tactile_energy(values[("w", 1)], grasp)[0])
    assert factor.cost(values) == pytest.approx(0.5 * float(rw @ rw))
    r, Js = factor.linearize(values)
    assert np.allclose(r, rw)
    assert np.allclose(Js[0][-1], 0.0)
