"""Built-in worlds: a small demo scenario, seeded random obstacle maps, and
the 20-object / 10-location query-experiment world."""

from __future__ import annotations

import numpy as np

from .embed import ConceptVocabulary
from .gridmap import OccupancyGrid
from .simworld import WorldObject, WorldSpec

__all__ = [
    "make_demo_world",
    "make_random_obstacle_map",
    "make_query_world",
    "query_experiment_vocabulary",
    "DEMO_START",
    "QUERY_OBJECT_CONCEPTS",
    "QUERY_LOCATION_CONCEPTS",
]

OBSTACLE = 255
FREE = 0

DEMO_START = (0.5, 0.5)


def _blank_grid(width_m: float, height_m: float, resolution: float) -> OccupancyGrid:
    w = int(round(width_m / resolution))
    h = int(round(height_m / resolution))
    return OccupancyGrid(width=w, height=h, resolution=resolution,
                         origin=(0.0, 0.0, 0.0),
                         cells=np.full((h, w), FREE, dtype=np.uint8))


def _fill_rect(grid: OccupancyGrid, x0: float, y0: float, x1: float, y1: float,
               value: int = OBSTACLE) -> None:
    c0, r0 = grid.world_to_cell(x0, y0)
    c1, r1 = grid.world_to_cell(x1 - 1e-9, y1 - 1e-9)
    grid.cells[max(r0, 0):r1 + 1, max(c0, 0):c1 + 1] = value


def make_demo_world(seed: int = 0) -> WorldSpec:
    """7 x 5 m room with four furniture blocks and six labelled objects."""
    grid = _blank_grid(7.0, 5.0, 0.05)
    desk = (1.0, 3.0, 2.2, 3.8)
    box = (2.8, 1.2, 3.4, 1.8)
    shelf = (4.5, 3.5, 5.5, 4.2)
    bin_ = (5.2, 1.0, 5.8, 1.6)
    for rect in (desk, box, shelf, bin_):
        _fill_rect(grid, *rect)
    objects = {
        # just outside each block's perimeter, at roughly camera height
        1: WorldObject(1, "apple", (1.4, 2.97, 0.78), graspable=True),
        2: WorldObject(2, "wooden desk", (1.9, 2.97, 0.75), surface=True),
        3: WorldObject(3, "black coke can", (3.1, 1.17, 0.74), graspable=True),
        4: WorldObject(4, "water bottle", (2.77, 1.5, 0.76), graspable=True),
        5: WorldObject(5, "bookshelf", (5.0, 3.47, 0.75), surface=True),
        6: WorldObject(6, "dustbin", (5.5, 0.97, 0.72), surface=True),
    }
    return WorldSpec(grid=grid, objects=objects, seed=seed)


def make_random_obstacle_map(seed: int, n_obstacles: int | None = None,
                             size_cells: int = 64,
                             resolution: float = 0.1) -> OccupancyGrid:
    """Random non-overlapping rectangular obstacles on an open map; obstacles
    keep enough margin for a 0.3 m offset ring and the start corner stays free."""
    rng = np.random.default_rng(seed)
    if n_obstacles is None:
        n_obstacles = int(rng.integers(1, 7))
    grid = OccupancyGrid(width=size_cells, height=size_cells, resolution=resolution,
                         origin=(0.0, 0.0, 0.0),
                         cells=np.zeros((size_cells, size_cells), dtype=np.uint8))
    margin = 8  # cells kept clear around each rectangle and the borders
    placed: list[tuple[int, int, int, int]] = []
    attempts = 0
    while len(placed) < n_obstacles and attempts < 300:
        attempts += 1
        w = int(rng.integers(5, 13))
        h = int(rng.integers(5, 13))
        c0 = int(rng.integers(margin, size_cells - margin - w))
        r0 = int(rng.integers(margin, size_cells - margin - h))
        rect = (c0, r0, c0 + w, r0 + h)
        if c0 < 12 and r0 < 12:  # keep the start corner free
            continue
        clash = any(not (rect[2] + margin <= o[0] or o[2] + margin <= rect[0]
                         or rect[3] + margin <= o[1] or o[3] + margin <= rect[1])
                    for o in placed)
        if clash:
            continue
        placed.append(rect)
        grid.cells[r0:r0 + h, c0:c0 + w] = OBSTACLE
    return grid


# --- query experiment (20 object tasks, 10 location tasks) ---

QUERY_OBJECT_CONCEPTS: list[tuple[str, list[str]]] = [
    ("apple", ["red apple"]),
    ("black coke can", ["coke can", "soda can"]),
    ("water bottle", ["plastic bottle"]),
    ("shampoo bottle", ["shampoo"]),
    ("cooking pot", ["saucepan"]),
    ("notebook", ["journal"]),
    ("coffee mug", ["mug"]),
    ("keyboard", ["computer keyboard"]),
    ("computer mouse", ["mouse"]),
    ("telephone", ["handset"]),
    ("scissors", ["shears"]),
    ("stapler", ["staple gun"]),
    ("banana", ["yellow banana"]),
    ("orange", ["citrus fruit"]),
    ("toy car", ["model car"]),
    ("screwdriver", ["driver tool"]),
    ("flashlight", ["torch"]),
    ("tape dispenser", ["sticky tape"]),
    ("wrench", ["spanner"]),
    ("soccer ball", ["football"]),
]

QUERY_LOCATION_CONCEPTS: list[tuple[str, list[str]]] = [
    ("wooden desk", ["desk", "wood table"]),
    ("bookshelf", ["book shelf"]),
    ("dustbin", ["trash can"]),
    ("storage cabinet", ["cupboard"]),
    ("kitchen counter", ["countertop"]),
    ("workbench", ["work bench"]),
    ("side table", ["end table"]),
    ("tool rack", ["rack of tools"]),
    ("window sill", ["windowsill"]),
    ("charging dock", ["docking station"]),
]


def query_experiment_vocabulary(dimension: int = 512) -> ConceptVocabulary:
    return ConceptVocabulary(QUERY_OBJECT_CONCEPTS + QUERY_LOCATION_CONCEPTS,
                             dimension=dimension, seed=0)


def make_query_world(seed: int = 0) -> WorldSpec:
    """10 x 8 m room, five blocks, all 30 experiment concepts placed once each
    along block perimeters at spots the offset coverage tour can see."""
    grid = _blank_grid(10.0, 8.0, 0.05)
    blocks = [
        (1.2, 1.6, 2.8, 2.6),
        (1.4, 5.0, 3.0, 6.0),
        (4.6, 3.2, 6.2, 4.2),
        (7.0, 1.2, 8.6, 2.2),
        (7.2, 5.4, 8.8, 6.4),
    ]
    for rect in blocks:
        _fill_rect(grid, *rect)
    slots = []
    for rect in blocks:
        slots.extend(_perimeter_slots(rect, clearance=0.03, corner_inset=0.35,
                                      spacing=0.55))
    labels = [name for name, _ in QUERY_OBJECT_CONCEPTS + QUERY_LOCATION_CONCEPTS]
    if len(slots) < len(labels):
        raise RuntimeError("not enough perimeter slots for the experiment objects")
    location_names = {name for name, _ in QUERY_LOCATION_CONCEPTS}
    objects = {}
    z_cycle = (0.72, 0.75, 0.78)
    for i, label in enumerate(labels):
        x, y = slots[i]
        objects[i + 1] = WorldObject(
            i + 1, label, (x, y, z_cycle[i % 3]),
            graspable=label not in location_names,
            surface=label in location_names)
    return WorldSpec(grid=grid, objects=objects, seed=seed)


def _perimeter_slots(rect, clearance: float, corner_inset: float,
                     spacing: float) -> list[tuple[float, float]]:
    x0, y0, x1, y1 = rect
    slots = []
    for fixed, lo, hi, horizontal, sign in (
            (y0 - clearance, x0, x1, True, -1),   # south edge
            (y1 + clearance, x0, x1, True, +1),   # north edge
            (x0 - clearance, y0, y1, False, -1),  # west edge
            (x1 + clearance, y0, y1, False, +1),  # east edge
    ):
        span = hi - lo - 2 * corner_inset
        count = max(1, int(span // spacing) + 1)
        for k in range(count):
            t = lo + corner_inset + (span * k / max(count - 1, 1) if count > 1 else span / 2)
            slots.append((t, fixed) if horizontal else (fixed, t))
    return slots
