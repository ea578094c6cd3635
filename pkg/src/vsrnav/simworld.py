"""Deterministic 2-D desk-scale world: objects on obstacle furniture, a robot
pose, a ray-cast side camera, and discrete pick/place state changes."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coverage import Tour, passability_grid
from .embed import EmbeddingProvider, ObjectDescriptor
from .errors import (
    HandEmpty,
    HandFull,
    NoSurface,
    NotGraspable,
    OutOfReach,
    Unreachable,
)
from .gridmap import BinaryGrid, OccupancyGrid, load_map, save_map
from .vsr import (
    CameraIntrinsics,
    ObservedInstance,
    RigidTransform,
    SceneRepresentation,
    ingest_observation,
)

__all__ = [
    "WorldObject",
    "WorldSpec",
    "RobotState",
    "CameraModel",
    "Detection",
    "observe",
    "run_coverage_scan",
    "navigate_to",
    "pick",
    "place",
    "load_world",
    "save_world",
    "DEFAULT_REACH",
    "DEFAULT_STANDOFF",
]

DEFAULT_REACH = 0.6
DEFAULT_STANDOFF = 0.4
DEFAULT_SCAN_STEP = 0.1
SURFACE_SNAP_RADIUS = 0.35


@dataclass
class WorldObject:
    id: int
    label: str
    position: np.ndarray  # (3,) meters, map frame
    graspable: bool = False
    surface: bool = False

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)


@dataclass
class WorldSpec:
    grid: OccupancyGrid
    objects: dict[int, WorldObject]
    seed: int = 0
    occupied_threshold: int = 128
    unknown_value: int | None = 205
    map_path: str | None = None  # provenance for re-serialization
    _passable: BinaryGrid | None = field(default=None, repr=False)

    def __post_init__(self):
        obstacle = self.grid.cells >= self.occupied_threshold
        for obj in self.objects.values():
            if not self._near_obstacle(obstacle, obj):
                raise ValueError(
                    f"object {obj.id} ({obj.label}) is not on or adjacent to an obstacle cell")

    def _near_obstacle(self, obstacle: np.ndarray, obj: WorldObject) -> bool:
        col, row = self.grid.world_to_cell(obj.position[0], obj.position[1])
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r, c = row + dr, col + dc
                if self.grid.in_bounds(c, r) and obstacle[r, c]:
                    return True
        return False

    def passable(self) -> BinaryGrid:
        if self._passable is None:
            self._passable = passability_grid(
                self.grid, self.occupied_threshold, self.unknown_value)
        return self._passable


@dataclass
class RobotState:
    pose: tuple[float, float, float]  # x, y, theta
    holding: WorldObject | None = None

    @property
    def holding_id(self) -> int | None:
        return self.holding.id if self.holding else None


@dataclass
class CameraModel:
    side: str = "right"  # mount side relative to the robot heading
    fov_deg: float = 60.0
    max_range: float = 3.5
    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(fx=525.0, fy=525.0, cx=320.0, cy=240.0,
                                                 width=640, height=480))
    height: float = 0.75

    def __post_init__(self):
        if not 0 < self.fov_deg < 180:
            raise ValueError("fov must be in (0, 180) degrees")
        if self.max_range <= 0:
            raise ValueError("max range must be positive")

    def yaw(self, robot_theta: float) -> float:
        offset = -math.pi / 2 if self.side == "right" else math.pi / 2
        return robot_theta + offset

    def pose(self, robot_pose: tuple[float, float, float]) -> RigidTransform:
        """camera->map transform: +z optical axis, +x image-right, +y image-down."""
        x, y, theta = robot_pose
        phi = self.yaw(theta)
        forward = np.array([math.cos(phi), math.sin(phi), 0.0])
        right = np.array([math.sin(phi), -math.cos(phi), 0.0])
        down = np.array([0.0, 0.0, -1.0])
        rotation = np.column_stack([right, down, forward])
        return RigidTransform(rotation, np.array([x, y, self.height]))


@dataclass
class Detection:
    pixel: tuple[float, float]
    depth: float
    label: str
    source_id: int  # ground-truth provenance, test only


def _ray_clear(grid: BinaryGrid, start_xy, end_xy, terminal_cell) -> bool:
    """True when every grid cell along the ray is passable, except the
    terminal cell the object sits on."""
    p = np.asarray(start_xy, dtype=float)
    q = np.asarray(end_xy, dtype=float)
    dist = float(np.hypot(*(q - p)))
    n = max(2, int(math.ceil(dist / (grid.resolution * 0.25))) + 1)
    for t in np.linspace(0.0, 1.0, n):
        x, y = p + t * (q - p)
        col, row = grid.world_to_cell(x, y)
        if (col, row) == terminal_cell:
            continue
        if not grid.in_bounds(col, row) or grid.cells[row, col]:
            return False
    return True


def observe(world: WorldSpec, robot: RobotState, camera: CameraModel) -> list[Detection]:
    """Objects detected iff within range, inside the camera frustum, and with
    an obstacle-free grid ray (except the terminal cell)."""
    cam_pose = camera.pose(robot.pose)
    inv = cam_pose.inverse()
    intr = camera.intrinsics
    half_fov = math.radians(camera.fov_deg) / 2
    passable = world.passable()
    detections = []
    for oid in sorted(world.objects):
        obj = world.objects[oid]
        local = inv.apply(obj.position)
        x_cam, y_cam, z_cam = local
        if z_cam <= 0 or z_cam > camera.max_range:
            continue
        if abs(math.atan2(x_cam, z_cam)) > half_fov:
            continue
        u = intr.cx + intr.fx * x_cam / z_cam
        v = intr.cy + intr.fy * y_cam / z_cam
        if not (0 <= u < intr.width and 0 <= v < intr.height):
            continue
        terminal = world.grid.world_to_cell(obj.position[0], obj.position[1])
        if not _ray_clear(passable, robot.pose[:2], obj.position[:2], terminal):
            continue
        detections.append(Detection(pixel=(float(u), float(v)), depth=float(z_cam),
                                    label=obj.label, source_id=oid))
    return detections


def _walk_tour(tour: Tour, step: float):
    """Yield (x, y, heading) samples spaced `step` meters along the tour."""
    for segment in tour.segment_paths:
        seg = np.asarray(segment, dtype=float)
        for a, b in zip(seg[:-1], seg[1:]):
            length = float(np.hypot(*(b - a)))
            if length < 1e-12:
                continue
            heading = math.atan2(b[1] - a[1], b[0] - a[0])
            s = 0.0
            while s < length:
                p = a + (s / length) * (b - a)
                yield float(p[0]), float(p[1]), heading
                s += step


def _sighting_seed(world_seed: int, frame: int, object_id: int) -> int:
    return (world_seed * 1_000_003 + frame * 1_009 + object_id) & 0x7FFFFFFF


def run_coverage_scan(world: WorldSpec, tour: Tour, camera: CameraModel,
                      provider: EmbeddingProvider,
                      scene: SceneRepresentation | None = None,
                      step: float = DEFAULT_SCAN_STEP,
                      on_step=None) -> SceneRepresentation:
    """Step the robot along the tour, heading tangent to the path so the side
    camera faces the encircled obstacle; embed and ingest every detection."""
    if scene is None:
        scene = SceneRepresentation(dimension=provider.dimension)
    frame = 0
    for x, y, heading in _walk_tour(tour, step):
        robot = RobotState(pose=(x, y, heading))
        detections = observe(world, robot, camera)
        if detections:
            cam_pose = camera.pose(robot.pose)
            instances = [
                ObservedInstance(
                    pixel=det.pixel, depth=det.depth,
                    embedding=provider.embed_object(ObjectDescriptor(
                        det.label, seed=_sighting_seed(world.seed, frame, det.source_id))),
                    label=det.label, frame_id=frame)
                for det in detections
            ]
            ingest_observation(scene, instances, camera.intrinsics, cam_pose)
        if on_step is not None:
            on_step(robot.pose, detections)
        frame += 1
    return scene


def _dijkstra_field(grid: BinaryGrid, start_cell: tuple[int, int]):
    """Distances and parents from start over passable cells (8-connected, no
    corner cutting)."""
    sqrt2 = math.sqrt(2.0)
    moves = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
             (1, 1, sqrt2), (1, -1, sqrt2), (-1, 1, sqrt2), (-1, -1, sqrt2)]
    cells = grid.cells
    dist = {start_cell: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [(0.0, start_cell)]
    while heap:
        d, cur = heapq.heappop(heap)
        if d > dist.get(cur, math.inf):
            continue
        cc, cr = cur
        for dc, dr, w in moves:
            nc, nr = cc + dc, cr + dr
            if not grid.in_bounds(nc, nr) or cells[nr, nc]:
                continue
            if dc and dr and (cells[cr, nc] or cells[nr, cc]):
                continue
            nd = d + w
            nxt = (nc, nr)
            if nd < dist.get(nxt, math.inf) - 1e-12:
                dist[nxt] = nd
                parent[nxt] = cur
                heapq.heappush(heap, (nd, nxt))
    return dist, parent


def navigate_to(world: WorldSpec, robot: RobotState, target: tuple[float, float],
                reach: float = DEFAULT_REACH,
                standoff: float = DEFAULT_STANDOFF) -> RobotState:
    """Move to a free standoff cell near the target, final heading facing it.

    Candidate cells within reach of the target are preferred by closeness to
    the standoff distance; the chosen one must be reachable over the grid.
    """
    grid = world.passable()
    tx, ty = float(target[0]), float(target[1])
    start_cell = grid.world_to_cell(robot.pose[0], robot.pose[1])
    dist, _ = _dijkstra_field(grid, start_cell)
    res = grid.resolution
    span = int(math.ceil(reach / res)) + 1
    t_col, t_row = grid.world_to_cell(tx, ty)
    candidates = []
    for row in range(t_row - span, t_row + span + 1):
        for col in range(t_col - span, t_col + span + 1):
            if not grid.in_bounds(col, row) or grid.cells[row, col]:
                continue
            cx, cy = grid.cell_to_world(col, row)
            d = math.hypot(cx - tx, cy - ty)
            if d > reach:
                continue
            if (col, row) not in dist:
                continue
            candidates.append((abs(d - standoff), d, dist[(col, row)], col, row))
    if not candidates:
        raise Unreachable(f"no reachable standoff cell within {reach} m of ({tx}, {ty})")
    _, _, _, col, row = min(candidates)
    cx, cy = grid.cell_to_world(col, row)
    robot.pose = (cx, cy, math.atan2(ty - cy, tx - cx))
    return robot


def pick(world: WorldSpec, robot: RobotState, object_id: int,
         reach: float = DEFAULT_REACH) -> tuple[WorldSpec, RobotState]:
    if robot.holding is not None:
        raise HandFull(f"already holding object {robot.holding.id}")
    obj = world.objects.get(object_id)
    if obj is None:
        raise ValueError(f"no object with id {object_id} in the world")
    if not obj.graspable:
        raise NotGraspable(obj.label)
    d = math.hypot(obj.position[0] - robot.pose[0], obj.position[1] - robot.pose[1])
    if d > reach:
        raise OutOfReach(f"{obj.label} at {d:.2f} m, reach {reach} m")
    del world.objects[object_id]
    robot.holding = obj
    return world, robot


def place(world: WorldSpec, robot: RobotState, target,
          reach: float = DEFAULT_REACH) -> tuple[WorldSpec, RobotState]:
    if robot.holding is None:
        raise HandEmpty("nothing to place")
    target = np.asarray(target, dtype=float).reshape(3)
    d = math.hypot(target[0] - robot.pose[0], target[1] - robot.pose[1])
    if d > reach:
        raise OutOfReach(f"target at {d:.2f} m, reach {reach} m")
    if not _has_surface(world, target):
        raise NoSurface(f"no supporting surface at ({target[0]:.2f}, {target[1]:.2f})")
    obj = robot.holding
    obj.position = target
    world.objects[obj.id] = obj
    robot.holding = None
    return world, robot


def _has_surface(world: WorldSpec, target: np.ndarray) -> bool:
    obstacle = world.grid.cells >= world.occupied_threshold
    col, row = world.grid.world_to_cell(target[0], target[1])
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            r, c = row + dr, col + dc
            if world.grid.in_bounds(c, r) and obstacle[r, c]:
                return True
    for obj in world.objects.values():
        if obj.surface and math.hypot(obj.position[0] - target[0],
                                      obj.position[1] - target[1]) <= SURFACE_SNAP_RADIUS:
            return True
    return False


# --- world files ---

def load_world(path: str | Path) -> WorldSpec:
    path = Path(path)
    doc = json.loads(path.read_text())
    grid, meta = load_map(path.parent / doc["map"])
    objects = {
        int(o["id"]): WorldObject(
            id=int(o["id"]), label=o["label"],
            position=np.array([o["x"], o["y"], o["z"]], dtype=float),
            graspable=bool(o.get("graspable", False)),
            surface=bool(o.get("surface", False)))
        for o in doc["objects"]
    }
    return WorldSpec(grid=grid, objects=objects, seed=int(doc.get("seed", 0)),
                     occupied_threshold=meta.occupied_threshold,
                     unknown_value=meta.unknown_value, map_path=doc["map"])


def save_world(path: str | Path, world: WorldSpec, map_name: str = "map.yaml") -> None:
    path = Path(path)
    save_map(path.parent / map_name, world.grid)
    doc = {
        "map": map_name,
        "seed": world.seed,
        "objects": [
            {"id": obj.id, "label": obj.label,
             "x": obj.position[0], "y": obj.position[1], "z": obj.position[2],
             "graspable": obj.graspable, "surface": obj.surface}
            for obj in sorted(world.objects.values(), key=lambda o: o.id)
        ],
    }
    path.write_text(json.dumps(doc, indent=2))
