"""Session state shared by the CLI and the HTTP surface: world, robot, scene,
last tour, and an append-only event log with monotonic sequence numbers."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from .coverage import CoverageParams, Tour, plan_coverage
from .embed import EmbeddingProvider
from .simworld import CameraModel, RobotState, WorldSpec, run_coverage_scan
from .vsr import SceneRepresentation

__all__ = ["Event", "SessionState"]


@dataclass
class Event:
    seq: int
    timestamp: float
    type: str
    data: dict


@dataclass
class SessionState:
    world: WorldSpec
    robot: RobotState
    scene: SceneRepresentation
    tour: Tour | None = None
    events: list[Event] = field(default_factory=list)
    _cond: threading.Condition = field(default_factory=threading.Condition, repr=False)
    _busy: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def emit(self, type_: str, data: dict) -> Event:
        with self._cond:
            event = Event(seq=len(self.events) + 1, timestamp=time.time(),
                          type=type_, data=data)
            self.events.append(event)
            self._cond.notify_all()
            return event

    def events_after(self, last_seq: int) -> list[Event]:
        with self._cond:
            return self.events[last_seq:]

    def wait_for_event(self, last_seq: int, timeout: float = 1.0) -> list[Event]:
        with self._cond:
            if len(self.events) <= last_seq:
                self._cond.wait(timeout)
            return self.events[last_seq:]

    def try_acquire(self) -> bool:
        """Exclusive execution slot: one scan or instruction at a time."""
        return self._busy.acquire(blocking=False)

    def release(self) -> None:
        self._busy.release()

    @property
    def busy(self) -> bool:
        if self._busy.acquire(blocking=False):
            self._busy.release()
            return False
        return True

    # --- long-running operations (callers hold the exclusive slot) ---

    def run_scan(self, params: CoverageParams, camera: CameraModel,
                 provider: EmbeddingProvider, start: tuple[float, float],
                 pose_every: int = 5) -> None:
        self.emit("scan_started", {"start": list(start)})
        tour = plan_coverage(self.world.grid, params, start)
        self.tour = tour
        from .coverage import tour_document
        self.emit("tour", tour_document(tour))
        counter = {"n": 0}

        def on_step(pose, detections):
            counter["n"] += 1
            if detections or counter["n"] % pose_every == 0:
                self.emit("pose", {"pose": list(pose),
                                   "detections": [d.label for d in detections]})

        run_coverage_scan(self.world, tour, camera, provider,
                          scene=self.scene, on_step=on_step)
        self.emit("scene_updated", {"count": len(self.scene.objects)})
        self.emit("scan_finished", {"objects": len(self.scene.objects)})

    def scene_snapshot(self) -> dict:
        return {
            "dimension": self.scene.dimension,
            "objects": [
                {
                    "index": i,
                    "label": obj.label,
                    "position": obj.position.tolist(),
                    "observation_count": obj.observation_count,
                }
                for i, obj in enumerate(self.scene.objects)
            ],
        }

    def map_snapshot(self) -> dict:
        cells = self.world.grid.cells.reshape(-1)
        rle: list[list[int]] = []
        for value in cells.tolist():
            if rle and rle[-1][0] == value:
                rle[-1][1] += 1
            else:
                rle.append([value, 1])
        return {
            "width": self.world.grid.width,
            "height": self.world.grid.height,
            "resolution": self.world.grid.resolution,
            "origin": list(self.world.grid.origin),
            "occupied_threshold": self.world.occupied_threshold,
            "unknown_value": self.world.unknown_value,
            "cells_rle": rle,
        }

    def state_snapshot(self) -> dict:
        return {
            "pose": list(self.robot.pose),
            "holding": self.robot.holding_id,
        }
