"""Desk-scale language-driven goal navigation.

Pipeline: occupancy-grid boundary extraction -> clockwise coverage tour ->
scene representation built from embedded detections -> open-vocabulary
queries -> natural-language instructions executed as atomic robot actions.
"""

from . import coverage, demo, embed, errors, gridmap, instruct, simworld, vsr
from .coverage import CoverageParams, Tour, plan_coverage
from .embed import ObjectDescriptor, SyntheticEmbedder, default_vocabulary
from .gridmap import BinaryGrid, OccupancyGrid, Polygon2D
from .instruct import Plan, build_prompt, execute, parse_plan, plan_rule_based
from .simworld import CameraModel, RobotState, WorldSpec, run_coverage_scan
from .vsr import (
    CameraIntrinsics,
    RigidTransform,
    SceneRepresentation,
    load_scene,
    project_pixel,
    query,
    save_scene,
)

__version__ = "0.1.0"
