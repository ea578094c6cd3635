import numpy as np
import pytest

from vsrnav.errors import CorruptFile, DimensionMismatch, EmptyScene, InvalidDepth, NoMatch
from vsrnav.vsr import (
    CameraIntrinsics,
    ObjectFeature,
    ObservedInstance,
    RigidTransform,
    SceneRepresentation,
    ingest_observation,
    load_scene,
    project_pixel,
    query,
    save_scene,
    scene_to_json,
)

INTR = CameraIntrinsics(fx=525.0, fy=525.0, cx=320.0, cy=240.0, width=640, height=480)


def unit(vec):
    vec = np.asarray(vec, dtype=np.float32)
    return vec / np.linalg.norm(vec)


def basis_vec(dim, axis):
    v = np.zeros(dim, dtype=np.float32)
    v[axis] = 1.0
    return v


def random_pose(rng):
    # random rotation via QR; fix the determinant sign
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return RigidTransform(q, rng.uniform(-5, 5, size=3))


# --- project_pixel ---

def test_project_principal_point():
    out = project_pixel(320.0, 240.0, 2.0, INTR, RigidTransform.identity())
    assert np.allclose(out, [0.0, 0.0, 2.0])


def test_project_pinhole_arithmetic():
    intr = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=900, height=480)
    out = project_pixel(820.0, 240.0, 1.0, intr, RigidTransform.identity())
    assert np.allclose(out, [1.0, 0.0, 1.0])


def test_project_rejects_bad_depth():
    with pytest.raises(InvalidDepth):
        project_pixel(320.0, 240.0, 0.0, INTR, RigidTransform.identity())
    with pytest.raises(InvalidDepth):
        project_pixel(320.0, 240.0, float("nan"), INTR, RigidTransform.identity())


def test_project_rejects_out_of_image():
    with pytest.raises(ValueError):
        project_pixel(640.0, 240.0, 1.0, INTR, RigidTransform.identity())


def test_project_roundtrip():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        u = rng.uniform(0, INTR.width - 1e-6)
        v = rng.uniform(0, INTR.height - 1e-6)
        depth = rng.uniform(0.05, 10.0)
        pose = random_pose(rng)
        point = project_pixel(u, v, depth, INTR, pose)
        local = pose.inverse().apply(point)
        u2 = INTR.cx + INTR.fx * local[0] / local[2]
        v2 = INTR.cy + INTR.fy * local[1] / local[2]
        worst = max(worst, abs(u2 - u) * depth / INTR.fx,
                    abs(v2 - v) * depth / INTR.fy, abs(local[2] - depth))
    assert worst < 1e-9


# --- ingest / merge ---

def make_detection(dim, axis, pixel=(320.0, 240.0), depth=1.0, label=""):
    return ObservedInstance(pixel=pixel, depth=depth,
                            embedding=basis_vec(dim, axis), label=label)


def test_ingest_appends():
    scene = SceneRepresentation(dimension=8)
    ingest_observation(scene, [make_detection(8, 0)], INTR, RigidTransform.identity())
    assert len(scene.objects) == 1
    assert scene.objects[0].observation_count == 1


def test_ingest_merges_nearby():
    scene = SceneRepresentation(dimension=8)
    pose = RigidTransform.identity()
    ingest_observation(scene, [make_detection(8, 0, depth=1.0)], INTR, pose)
    ingest_observation(scene, [make_detection(8, 0, depth=1.05)], INTR, pose)
    assert len(scene.objects) == 1
    obj = scene.objects[0]
    assert obj.observation_count == 2
    assert obj.position[2] == pytest.approx(1.025)


def test_ingest_distance_gate():
    scene = SceneRepresentation(dimension=8)
    pose = RigidTransform.identity()
    ingest_observation(scene, [make_detection(8, 0, depth=1.0)], INTR, pose)
    ingest_observation(scene, [make_detection(8, 0, depth=2.0)], INTR, pose)
    assert len(scene.objects) == 2


def test_ingest_cosine_gate():
    scene = SceneRepresentation(dimension=8)
    pose = RigidTransform.identity()
    ingest_observation(scene, [make_detection(8, 0, depth=1.0)], INTR, pose)
    ingest_observation(scene, [make_detection(8, 1, depth=1.0)], INTR, pose)
    assert len(scene.objects) == 2


def test_ingest_merge_idempotent_direction():
    scene = SceneRepresentation(dimension=8)
    pose = RigidTransform.identity()
    det = make_detection(8, 3)
    ingest_observation(scene, [det, det], INTR, pose)
    obj = scene.objects[0]
    assert obj.observation_count == 2
    assert np.allclose(obj.embedding, basis_vec(8, 3))
    assert np.allclose(obj.position, project_pixel(320, 240, 1.0, INTR, pose))


def test_ingest_dimension_mismatch():
    scene = SceneRepresentation(dimension=8)
    det = ObservedInstance(pixel=(320.0, 240.0), depth=1.0, embedding=np.ones(4) / 2.0)
    with pytest.raises(DimensionMismatch):
        ingest_observation(scene, [det], INTR, RigidTransform.identity())


# --- query ---

def make_scene(embeddings, dim):
    scene = SceneRepresentation(dimension=dim)
    for emb in embeddings:
        scene.objects.append(ObjectFeature(embedding=unit(emb), position=np.zeros(3)))
    return scene


def test_query_argmax():
    scene = make_scene([basis_vec(8, 0), basis_vec(8, 1)], 8)
    psi = unit([0.9, 0.1, 0, 0, 0, 0, 0, 0])
    idx, score = query(scene, psi)
    assert idx == 0 and score == pytest.approx(float(psi[0]))


def test_query_self_similarity():
    scene = make_scene([basis_vec(8, 2), basis_vec(8, 5)], 8)
    idx, score = query(scene, basis_vec(8, 5))
    assert idx == 1 and score == pytest.approx(1.0)


def test_query_tie_lowest_index():
    scene = make_scene([basis_vec(8, 4), basis_vec(8, 4)], 8)
    idx, _ = query(scene, basis_vec(8, 4))
    assert idx == 0


def test_query_empty_scene():
    with pytest.raises(EmptyScene):
        query(SceneRepresentation(dimension=8), basis_vec(8, 0))


def test_query_no_match_below_threshold():
    scene = make_scene([basis_vec(8, 0)], 8)
    with pytest.raises(NoMatch):
        query(scene, basis_vec(8, 1), min_score=0.2)


def test_query_matches_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(200):
        dim = int(rng.integers(4, 32))
        count = int(rng.integers(1, 12))
        scene = make_scene(rng.standard_normal((count, dim)), dim)
        psi = unit(rng.standard_normal(dim))
        scores = [float(np.dot(o.embedding, psi)) for o in scene.objects]
        best = max(range(count), key=lambda i: (scores[i], -i))
        idx, score = query(scene, psi, min_score=-2.0)
        # summation order differs between the oracle and the matrix product;
        # allow index disagreement only on float32-level ties
        if idx != best:
            assert abs(scores[idx] - scores[best]) < 1e-6
        assert score == pytest.approx(scores[idx], abs=1e-6)


# --- persistence ---

def sample_scene():
    rng = np.random.default_rng(3)
    scene = SceneRepresentation(dimension=16)
    for i in range(3):
        scene.objects.append(ObjectFeature(
            embedding=unit(rng.standard_normal(16)),
            position=rng.uniform(-4, 4, size=3),
            observation_count=i + 1,
            label=f"object {i} é"))
    return scene


def test_save_load_roundtrip(tmp_path):
    scene = sample_scene()
    path = tmp_path / "scene.vsr"
    save_scene(scene, path)
    loaded = load_scene(path)
    assert loaded.dimension == scene.dimension
    assert len(loaded.objects) == len(scene.objects)
    for a, b in zip(loaded.objects, scene.objects):
        assert np.array_equal(a.embedding, b.embedding)  # bit-exact f32
        assert np.array_equal(a.position, b.position)  # bit-exact f64
        assert a.observation_count == b.observation_count
        assert a.label == b.label


def test_save_load_double_roundtrip_bytes(tmp_path):
    scene = sample_scene()
    p1, p2 = tmp_path / "a.vsr", tmp_path / "b.vsr"
    save_scene(scene, p1)
    save_scene(load_scene(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_truncated(tmp_path):
    scene = sample_scene()
    path = tmp_path / "scene.vsr"
    save_scene(scene, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(CorruptFile):
        load_scene(path)


def test_load_bad_magic(tmp_path):
    path = tmp_path / "scene.vsr"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(CorruptFile):
        load_scene(path)


def test_load_dimension_mismatch(tmp_path):
    import struct
    import zlib
    # header says D=512 but the record carries a 256-float embedding
    rng = np.random.default_rng(0)
    emb = unit(rng.standard_normal(256)).astype("<f4")
    payload = (np.zeros(3).astype("<f8").tobytes() + emb.tobytes()
               + struct.pack("<IH", 1, 0))
    header = b"VSR1\x00\x00\x00\x01" + struct.pack("<IIQ", 512, 1, zlib.crc32(payload))
    path = tmp_path / "scene.vsr"
    path.write_bytes(header + payload)
    with pytest.raises(DimensionMismatch):
        load_scene(path)


def test_scene_json_export():
    scene = sample_scene()
    doc = scene_to_json(scene)
    assert doc["dimension"] == 16
    assert len(doc["objects"]) == 3
    assert doc["objects"][1]["observation_count"] == 2
