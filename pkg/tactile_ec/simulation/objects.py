"""Parametric bottom geometries of the grasped test objects."""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import ConvexHull

from tactile_ec.core.exceptions import InfeasibleGeometryError
from tactile_ec.geometry.lie import Pose

NOMINAL_HEIGHT = 0.08
COM_HEIGHT = 0.04

RECTANGLE_SIZE = (0.050, 0.035)
HEXAGON_EDGE = 0.0175


@dataclass(frozen=True, eq=False)
class ObjectModel:
    """Bottom polygon in the object body frame (z = 0 plane) and the grasp frame in that body frame.

    The estimator's object frame is the gripper frame at rest, so the
    simulator works with ``vertices_in_grasp``.
    """

    name: str
    vertices: np.ndarray
    edges: Tuple[Tuple[int, int], ...]
    grasp_frame: Pose
    center_of_mass: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 3)
        if len(vertices) < 1:
            raise InfeasibleGeometryError(f"{self.name}: object needs at least one vertex")
        for a, b in self.edges:
            if not (0 <= a < len(vertices) and 0 <= b < len(vertices)) or a == b:
                raise InfeasibleGeometryError(f"{self.name}: edge ({a}, {b}) references an invalid vertex")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "center_of_mass", np.array(self.center_of_mass, dtype=float).reshape(3))

    @property
    def vertices_in_grasp(self) -> np.ndarray:
        to_grasp = self.grasp_frame.inverse()
        return np.array([to_grasp.transform_point(v) for v in self.vertices])

    @property
    def com_in_grasp(self) -> np.ndarray:
        return self.grasp_frame.inverse().transform_point(self.center_of_mass)

    def edge_between(self, a: int, b: int) -> Optional[Tuple[int, int]]:
        for edge in self.edges:
            if set(edge) == {a, b}:
                return edge
        return None

    def shortest_edge(self) -> float:
        return min(float(np.linalg.norm(self.vertices[a] - self.vertices[b])) for a, b in self.edges)


def _polygon(points_xy: np.ndarray) -> Tuple[np.ndarray, Tuple[Tuple[int, int], ...]]:
    n = len(points_xy)
    vertices = np.column_stack([points_xy, np.zeros(n)])
    edges = tuple((i, (i + 1) % n) for i in range(n))
    return vertices, edges


def _upright_grasp(height: float) -> Pose:
    return Pose.from_translation([0.0, 0.0, height])


def rectangle(height: float = NOMINAL_HEIGHT, grasp_frame: Optional[Pose] = None) -> ObjectModel:
    a, b = RECTANGLE_SIZE[0] / 2, RECTANGLE_SIZE[1] / 2
    vertices, edges = _polygon(np.array([[a, b], [-a, b], [-a, -b], [a, -b]]))
    return ObjectModel("rectangle", vertices, edges, grasp_frame or _upright_grasp(height), [0.0, 0.0, COM_HEIGHT])


def hexagon(height: float = NOMINAL_HEIGHT, grasp_frame: Optional[Pose] = None) -> ObjectModel:
    angles = np.arange(6) * np.pi / 3
    vertices, edges = _polygon(HEXAGON_EDGE * np.column_stack([np.cos(angles), np.sin(angles)]))
    return ObjectModel("hexagon", vertices, edges, grasp_frame or _upright_grasp(height), [0.0, 0.0, COM_HEIGHT])


def irregular(index: int, height: float = NOMINAL_HEIGHT, grasp_frame: Optional[Pose] = None) -> ObjectModel:
    """Random convex polygon, reproducible from its index"""
    rng = np.random.default_rng(1000 + index)
    count = int(rng.integers(5, 8))
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=count))
    radii = rng.uniform(0.018, 0.032, size=count)
    points = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    hull = ConvexHull(points)
    points = points[hull.vertices]
    points = points - points.mean(axis=0)
    vertices, edges = _polygon(points)
    return ObjectModel(f"irregular-{index}", vertices, edges, grasp_frame or _upright_grasp(height),
                       [0.0, 0.0, COM_HEIGHT])


def make_object(name: str, rng: Optional[np.random.Generator] = None, max_tilt_deg: float = 0.0,
                max_height_offset: float = 0.0) -> ObjectModel:
    """Object by name with a random grasp: tilt about a horizontal axis and a grasp-height offset"""
    height = NOMINAL_HEIGHT
    grasp = _upright_grasp(height)
    if rng is not None and (max_tilt_deg > 0 or max_height_offset > 0):
        heading = rng.uniform(0, 2 * np.pi)
        tilt = np.deg2rad(rng.uniform(0, max_tilt_deg))
        height = NOMINAL_HEIGHT + rng.uniform(-max_height_offset, max_height_offset)
        axis = np.array([np.cos(heading), np.sin(heading), 0.0])
        # grasp frame expressed in the body frame: tilted gripper above the bottom centroid
        grasp = Pose.from_rotvec(tilt * axis, [0.0, 0.0, height])

    if name == "rectangle":
        return rectangle(height, grasp)
    if name == "hexagon":
        return hexagon(height, grasp)
    if name.startswith("irregular"):
        _, _, suffix = name.partition("-")
        try:
            index = int(suffix) if suffix else 0
        except ValueError:
            raise InfeasibleGeometryError(f"unknown object '{name}'")
        return irregular(index, height, grasp)
    raise InfeasibleGeometryError(f"unknown object '{name}'")


def object_names() -> List[str]:
    return ["rectangle", "hexagon"] + [f"irregular-{i}" for i in range(1, 7)]
