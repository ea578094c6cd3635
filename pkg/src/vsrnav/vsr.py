"""Visual scene representation: object embeddings paired with map coordinates.

Each record pairs a unit embedding with a 3-D map-frame position. Queries are
a linear cosine scan (desk scale); repeat sightings of the same object are
merged by a distance + cosine gate.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptFile, DimensionMismatch, EmptyScene, InvalidDepth, NoMatch

__all__ = [
    "CameraIntrinsics",
    "RigidTransform",
    "ObjectFeature",
    "SceneRepresentation",
    "ObservedInstance",
    "project_pixel",
    "ingest_observation",
    "query",
    "save_scene",
    "load_scene",
    "scene_to_json",
    "DEFAULT_DIMENSION",
    "DEFAULT_MERGE_RADIUS",
    "DEFAULT_MERGE_COSINE",
    "DEFAULT_MIN_SCORE",
]

DEFAULT_DIMENSION = 512
DEFAULT_MERGE_RADIUS = 0.25
DEFAULT_MERGE_COSINE = 0.90
DEFAULT_MIN_SCORE = 0.2

MAGIC = b"VSR1\x00\x00\x00\x01"


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")


@dataclass
class RigidTransform:
    """Rotation + translation; applies as world = R @ local + t."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))


@dataclass
class ObjectFeature:
    embedding: np.ndarray  # (D,) float32, unit norm
    position: np.ndarray  # (3,) float64, map frame
    observation_count: int = 1
    label: str = ""  # ground-truth provenance (simulator only)
    frame_id: int | None = None
    pixel: tuple[float, float] | None = None

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=np.float32).reshape(-1)
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        if abs(float(np.linalg.norm(self.embedding)) - 1.0) > 1e-5:
            raise ValueError("embedding must be unit norm")
        if self.observation_count < 1:
            raise ValueError("observation_count must be >= 1")


@dataclass
class SceneRepresentation:
    dimension: int = DEFAULT_DIMENSION
    objects: list[ObjectFeature] = field(default_factory=list)
    merge_radius: float = DEFAULT_MERGE_RADIUS
    merge_cosine: float = DEFAULT_MERGE_COSINE

    def embedding_matrix(self) -> np.ndarray:
        return np.stack([o.embedding for o in self.objects]) if self.objects \
            else np.zeros((0, self.dimension), dtype=np.float32)


@dataclass
class ObservedInstance:
    """One segmented detection to ingest: pixel center, depth, embedding."""

    pixel: tuple[float, float]
    depth: float
    embedding: np.ndarray
    label: str = ""
    frame_id: int | None = None


def project_pixel(u: float, v: float, depth: float, intrinsics: CameraIntrinsics,
                  camera_pose: RigidTransform) -> np.ndarray:
    """Pinhole back-projection of a pixel at a given depth into the map frame.

    Camera frame: +z along the optical axis, +x right, +y down.
    """
    if not (0 <= u < intrinsics.width and 0 <= v < intrinsics.height):
        raise ValueError(f"pixel ({u}, {v}) outside the image")
    if not (math.isfinite(depth) and depth > 0):
        raise InvalidDepth(f"depth {depth!r}")
    cam = np.array([
        (u - intrinsics.cx) * depth / intrinsics.fx,
        (v - intrinsics.cy) * depth / intrinsics.fy,
        depth,
    ])
    return camera_pose.apply(cam)


def _renormalize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float32)
    return (vec / np.linalg.norm(vec)).astype(np.float32)


def ingest_observation(scene: SceneRepresentation, detections: list[ObservedInstance],
                       intrinsics: CameraIntrinsics,
                       camera_pose: RigidTransform) -> SceneRepresentation:
    """Project each detection to a map point and merge or append.

    Merge gate: distance <= merge_radius AND cosine >= merge_cosine against an
    existing record (the best-cosine candidate wins; ties pick the lowest
    index). Merging takes the running-mean position and the renormalized mean
    embedding.
    """
    for det in detections:
        emb = np.asarray(det.embedding, dtype=np.float32).reshape(-1)
        if emb.shape[0] != scene.dimension:
            raise DimensionMismatch(
                f"embedding has {emb.shape[0]} components, scene dimension is {scene.dimension}")
        point = project_pixel(det.pixel[0], det.pixel[1], det.depth, intrinsics, camera_pose)
        target = None
        best_cos = -2.0
        for idx, obj in enumerate(scene.objects):
            if float(np.linalg.norm(obj.position - point)) > scene.merge_radius:
                continue
            cos = float(np.dot(obj.embedding, emb))
            if cos >= scene.merge_cosine and cos > best_cos:
                target, best_cos = idx, cos
        if target is None:
            scene.objects.append(ObjectFeature(
                embedding=_renormalize(emb), position=point,
                label=det.label, frame_id=det.frame_id,
                pixel=(float(det.pixel[0]), float(det.pixel[1]))))
        else:
            obj = scene.objects[target]
            n = obj.observation_count
            obj.position = (obj.position * n + point) / (n + 1)
            mean = obj.embedding.astype(np.float64) * n + emb.astype(np.float64)
            obj.embedding = _renormalize(mean / (n + 1))
            obj.observation_count = n + 1
    return scene


def query(scene: SceneRepresentation, text_embedding: np.ndarray,
          min_score: float = DEFAULT_MIN_SCORE) -> tuple[int, float]:
    """Return (argmax object index, similarity score); ties pick the lowest
    index. Raises NoMatch when the best score falls below min_score."""
    if not scene.objects:
        raise EmptyScene("scene has no objects")
    psi = np.asarray(text_embedding, dtype=np.float32).reshape(-1)
    if psi.shape[0] != scene.dimension:
        raise DimensionMismatch(
            f"query has {psi.shape[0]} components, scene dimension is {scene.dimension}")
    scores = scene.embedding_matrix() @ psi
    idx = int(np.argmax(scores))
    score = float(scores[idx])
    if score < min_score:
        raise NoMatch(score)
    return idx, score


# --- VSR1 persistence ---
# layout (little-endian): 8-byte magic, u32 dimension, u32 count, u64 crc32 of
# the record payload; per record: 3*f64 position, D*f32 embedding,
# u32 observation_count, u16 label length, UTF-8 label.

def _record_bytes(scene: SceneRepresentation) -> bytes:
    chunks = []
    for obj in scene.objects:
        label = obj.label.encode("utf-8")
        chunks.append(obj.position.astype("<f8").tobytes())
        chunks.append(obj.embedding.astype("<f4").tobytes())
        chunks.append(struct.pack("<IH", obj.observation_count, len(label)))
        chunks.append(label)
    return b"".join(chunks)


def save_scene(scene: SceneRepresentation, destination: str | Path) -> None:
    payload = _record_bytes(scene)
    header = MAGIC + struct.pack("<IIQ", scene.dimension, len(scene.objects),
                                 zlib.crc32(payload))
    Path(destination).write_bytes(header + payload)


def load_scene(source: str | Path) -> SceneRepresentation:
    data = Path(source).read_bytes()
    if len(data) < len(MAGIC) + 16 or data[:len(MAGIC)] != MAGIC:
        raise CorruptFile("bad magic/version")
    dim, count, checksum = struct.unpack_from("<IIQ", data, len(MAGIC))
    payload = data[len(MAGIC) + 16:]
    if zlib.crc32(payload) != checksum:
        raise CorruptFile("checksum mismatch")
    scene = SceneRepresentation(dimension=dim)
    pos = 0
    for _ in range(count):
        need = 24 + 4 * dim + 6
        if len(payload) - pos < need:
            raise DimensionMismatch("record shorter than the declared dimension")
        position = np.frombuffer(payload, dtype="<f8", count=3, offset=pos).astype(np.float64)
        pos += 24
        embedding = np.frombuffer(payload, dtype="<f4", count=dim, offset=pos).astype(np.float32)
        pos += 4 * dim
        obs_count, label_len = struct.unpack_from("<IH", payload, pos)
        pos += 6
        if len(payload) - pos < label_len:
            raise DimensionMismatch("record truncated inside its label")
        label = payload[pos:pos + label_len].decode("utf-8")
        pos += label_len
        scene.objects.append(ObjectFeature(embedding=embedding, position=position,
                                           observation_count=obs_count, label=label))
    if pos != len(payload):
        raise DimensionMismatch("trailing bytes after the declared record count")
    return scene


def scene_to_json(scene: SceneRepresentation) -> dict:
    """Debug export mirroring the binary fields with base-10 floats."""
    return {
        "dimension": scene.dimension,
        "objects": [
            {
                "position": obj.position.tolist(),
                "embedding": [float(x) for x in obj.embedding],
                "observation_count": obj.observation_count,
                "label": obj.label,
            }
            for obj in scene.objects
        ],
    }
