import numpy as np

from tactile_ec.core.config import NoiseProfile, Scenario
from tactile_ec.estimation.factors import FactorKind
from tactile_ec.estimation.graph import pivot
from tactile_ec.geometry.lie import Pose


def baseline_constant_tactile(gripper: Pose, rotation: np.ndarray, contact_point: np.ndarray, delta, delta_ref,
                              gain: float) -> Pose:
    """Commanded pivot about the estimated contact plus a proportional pull back to the reference displacement"""
    moved, _ = pivot(gripper, rotation, np.asarray(contact_point, dtype=float))
    error = Pose.exp(delta).inverse().compose(Pose.exp(delta_ref)).log()
    return moved.retract(gain * error)


def ablation_no_tactile_energy(noise: NoiseProfile, scale: float = 1e4) -> NoiseProfile:
    return noise.scaled(FactorKind.TACTILE_ENERGY.value, scale)


def controller_noise(scenario: Scenario) -> NoiseProfile:
    """Noise profile the graph runs with for the scenario's controller variant"""
    if scenario.variant == "no-tactile-energy":
        return ablation_no_tactile_energy(scenario.noise_profile, scenario.controller.energy_sigma_scale)
    return scenario.noise_profile
