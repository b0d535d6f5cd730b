import math
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from tactile_ec.core.exceptions import InvalidConfigError


class Settings(BaseSettings):
    APP_NAME: str = "Tactile Estimator-Controller"
    HOST: str = "0.0.0.0"
    PORT: int = 8000
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    DATABASE_URL: str = "sqlite:///./tactile_ec.db"
    OUTPUT_DIR: str = "results"
    WORKERS: int = 4

    # Estimator-controller defaults
    HORIZON: int = 10
    ACTIVE_WINDOW: int = 400
    MAX_ITERATIONS: int = 100
    RELATIVE_TOLERANCE: float = 1e-8
    DETECTION_THRESHOLD: float = 0.1
    DEBOUNCE: int = 3

    # Harness defaults
    TRIALS: int = 10
    SEED: int = 0

    class Config:
        env_file = ".env"
        extra = "ignore"


settings = Settings()


FORMATIONS = ("point", "line", "patch")

# residual dimension per factor kind; None means the kind is absent for that formation
FACTOR_DIMENSIONS: Dict[str, Dict[str, Optional[int]]] = {
    "prior_grasp": {"point": 9, "line": 9, "patch": 9},
    "prior_object": {"point": 6, "line": 6, "patch": 6},
    "prior_contact": {"point": 6, "line": 6, "patch": 6},
    "gripper_pose": {"point": 6, "line": 6, "patch": 6},
    "tactile_total": {"point": 6, "line": 6, "patch": 6},
    "tactile_incremental": {"point": 6, "line": 6, "patch": 6},
    "grasp_rigidity": {"point": 6, "line": 6, "patch": 6},
    "contact_in_object": {"point": 6, "line": 6, "patch": 6},
    "contact_on_environment": {"point": 6, "line": 6, "patch": 6},
    "contact_convention": {"point": 3, "line": 2, "patch": 2},
    "torque": {"point": 3, "line": 1, "patch": None},
    "wrench_total": {"point": 6, "line": 6, "patch": 6},
    "wrench_incremental": {"point": 6, "line": 6, "patch": 6},
    "desired_rotation": {"point": 3, "line": 3, "patch": 3},
    "motion_effort": {"point": 6, "line": 6, "patch": 6},
    "tactile_energy": {"point": 6, "line": 6, "patch": 6},
    "contact_maintenance": {"point": 1, "line": 1, "patch": 1},
}

INF = math.inf


def _shared_sigmas() -> Dict[str, List[float]]:
    return {
        "prior_grasp": [0.3] * 6 + [0.01] * 3,
        "prior_object": [0.1] * 3 + [0.01] * 3,
        "prior_contact": [1.0] * 3 + [0.02, 0.02, 0.002],
        "gripper_pose": [1e-4] * 6,
        "tactile_total": [1e-4] * 6,
        "tactile_incremental": [5e-5] * 6,
        "grasp_rigidity": [1e-6] * 6,
        "wrench_total": [2e-3] * 3 + [0.2] * 3,
        "wrench_incremental": [2e-4] * 3 + [2e-2] * 3,
        "desired_rotation": [1e-2] * 3,
        "motion_effort": [0.1] * 3 + [1e-3] * 3,
        "tactile_energy": [0.05] * 6,
        "contact_maintenance": [1e-4],
    }


class NoiseProfile(BaseModel):
    """Per-formation standard deviations for every factor kind (inf = unconstrained component)"""

    name: str = "default"
    point: Dict[str, List[float]]
    line: Dict[str, List[float]]
    patch: Dict[str, List[float]]

    @model_validator(mode="after")
    def check_entries(self):
        for formation in FORMATIONS:
            table = getattr(self, formation)
            for kind, sigmas in table.items():
                if kind not in FACTOR_DIMENSIONS:
                    raise ValueError(f"unknown factor kind '{kind}' in {formation} table")
                expected = FACTOR_DIMENSIONS[kind][formation]
                if expected is None:
                    raise ValueError(f"factor kind '{kind}' does not exist for {formation} contact")
                if len(sigmas) != expected:
                    raise ValueError(f"{formation}.{kind} needs {expected} entries, got {len(sigmas)}")
                if any(not s > 0 for s in sigmas):
                    raise ValueError(f"{formation}.{kind} has a non-positive standard deviation")
            missing = [k for k, dims in FACTOR_DIMENSIONS.items() if dims[formation] is not None and k not in table]
            if missing:
                raise ValueError(f"{formation} table is missing {missing}")
        return self

    def sigmas(self, kind: str, formation: str) -> List[float]:
        return getattr(self, formation)[kind]

    def scaled(self, kind: str, factor: float) -> "NoiseProfile":
        """Copy with every formation's sigmas for one factor kind multiplied by a factor"""
        data = self.model_dump()
        for formation in FORMATIONS:
            data[formation][kind] = [s * factor for s in data[formation][kind]]
        data["name"] = f"{self.name}+{kind}x{factor:g}"
        return NoiseProfile.model_validate(data)

    @classmethod
    def default(cls) -> "NoiseProfile":
        point = _shared_sigmas()
        point.update({
            "contact_in_object": [INF] * 3 + [1e-5] * 3,
            "contact_on_environment": [INF] * 3 + [1e-3, 1e-3, 1e-5],
            "contact_convention": [1e-6] * 3,
            "torque": [1e-2] * 3,
        })
        line = _shared_sigmas()
        line.update({
            "contact_in_object": [INF, 1e-4, 1e-4] + [1e-5] * 3,
            "contact_on_environment": [INF, INF, 1e-2] + [1e-3, 1e-3, 1e-5],
            "contact_convention": [1e-6] * 2,
            "torque": [1e-2],
        })
        patch = _shared_sigmas()
        patch.update({
            "contact_in_object": [1e-4] * 3 + [1e-5] * 3,
            "contact_on_environment": [INF, INF, 1e-2] + [1e-3, 1e-3, 1e-5],
            "contact_convention": [1e-6] * 2,
        })
        return cls(name="default", point=point, line=line, patch=patch)


class SolverConfig(BaseModel):
    horizon: int = Field(default_factory=lambda: settings.HORIZON, ge=1)
    active_window: int = Field(default_factory=lambda: settings.ACTIVE_WINDOW, ge=2)
    max_iterations: int = Field(default_factory=lambda: settings.MAX_ITERATIONS, ge=1)
    relative_tolerance: float = Field(default_factory=lambda: settings.RELATIVE_TOLERANCE, gt=0)
    initial_lambda: float = Field(default=1e-4, gt=0)


class GraspPrior(BaseModel):
    kappa: List[float] = [2.0, 3.0, 1.0]
    k: List[float] = [2000.0, 1500.0, 3000.0]
    eta: List[float] = [0.0, 0.0, 0.0]

    @field_validator("kappa", "k", "eta")
    @classmethod
    def three_components(cls, value):
        if len(value) != 3:
            raise ValueError("expected 3 components")
        return value


class SimulationConfig(BaseModel):
    gripper_sigma_rot: float = Field(default=5e-5, ge=0)
    gripper_sigma_trn: float = Field(default=5e-5, ge=0)
    tactile_sigma: float = Field(default=1e-4, ge=0)
    grasp_prior: GraspPrior = GraspPrior()
    stiffness_spread: float = Field(default=0.3, ge=0, lt=1)
    # cubic stiffening coefficients per twist component (1/rad^2, 1/m^2)
    stiffening: List[float] = [0.0] * 6
    gravity: bool = False
    object_mass: float = Field(default=0.1, ge=0)
    max_tilt_deg: float = Field(default=10.0, ge=0)
    max_height_offset: float = Field(default=0.01, ge=0)
    press_depth: float = Field(default=2e-3, gt=0)

    @field_validator("stiffening")
    @classmethod
    def six_components(cls, value):
        if len(value) != 6 or any(c < 0 for c in value):
            raise ValueError("stiffening needs 6 non-negative components")
        return value


class ControllerConfig(BaseModel):
    offset_target: float = Field(default=1.5e-3, gt=0)
    spiral_steps: int = Field(default=120, ge=1)
    spiral_turns: float = Field(default=2.0, gt=0)
    small_angle_deg: float = Field(default=5.0, gt=0)
    large_angle_deg: float = Field(default=15.0, gt=0)
    cone_steps: int = Field(default=200, ge=1)
    edge_direction_error_deg: float = Field(default=20.0, ge=0)
    tilt_step_deg: float = Field(default=0.25, gt=0)
    tilt_max_steps: int = Field(default=120, ge=1)
    pause_steps: int = Field(default=10, ge=0)
    sinusoid_amplitude_deg: float = Field(default=5.0, ge=0)
    sinusoid_periods: float = Field(default=1.5, gt=0)
    sinusoid_steps: int = Field(default=120, ge=1)
    patch_max_steps: int = Field(default=150, ge=1)
    patch_arm_steps: int = Field(default=30, ge=0)
    line_eval_deg: float = Field(default=5.0, gt=0)
    baseline_gain: float = Field(default=0.5, gt=0)
    energy_sigma_scale: float = Field(default=1e4, gt=0)
    detection_threshold: float = Field(default_factory=lambda: settings.DETECTION_THRESHOLD, gt=0)
    debounce: int = Field(default_factory=lambda: settings.DEBOUNCE, ge=1)


# names the object library builds
OBJECT_NAME = re.compile(r"rectangle|hexagon|irregular(-\d+)?")


class Scenario(BaseModel):
    object: str = "rectangle"
    mu: float = Field(default=0.5, gt=0)
    protocol: Literal["point", "multi", "force-eval"] = "point"
    variant: Literal["proposed", "constant-tactile", "no-tactile-energy"] = "proposed"
    trials: int = Field(default_factory=lambda: settings.TRIALS, ge=1)
    seed: int = Field(default_factory=lambda: settings.SEED)
    noise_profile: NoiseProfile = Field(default_factory=NoiseProfile.default)
    simulation: SimulationConfig = SimulationConfig()
    controller: ControllerConfig = ControllerConfig()
    solver: SolverConfig = Field(default_factory=SolverConfig)

    @field_validator("object")
    @classmethod
    def known_object(cls, value):
        if not OBJECT_NAME.fullmatch(value):
            raise ValueError(f"unknown object '{value}', expected rectangle, hexagon or irregular-<n>")
        return value


def load_yaml(path) -> dict:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as e:
        raise InvalidConfigError(f"cannot read configuration: {str(e)}", path=path)
    if not isinstance(data, dict):
        raise InvalidConfigError("top level must be a mapping", path=path)
    return data


def load_noise_profile(path) -> NoiseProfile:
    data = load_yaml(path)
    data = data.get("noise_profile", data)
    try:
        return NoiseProfile.model_validate(data)
    except ValidationError as e:
        raise InvalidConfigError(str(e), path=path)


def load_scenario(path=None, **overrides) -> Scenario:
    """Scenario from an optional YAML file with CLI-style overrides applied on top"""
    data = load_yaml(path) if path else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise InvalidConfigError(str(e), path=path)
