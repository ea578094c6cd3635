import numpy as np
import pytest

from vsrnav.gridmap import (
    BinaryGrid,
    Contour,
    OccupancyGrid,
    Polygon2D,
    binarize,
    disk_footprint,
    extract_contours,
    load_map,
    morph_open,
    orient_clockwise,
    read_pgm,
    save_map,
    signed_area,
    simplify_contour,
    write_pgm,
)

from oracles import border_cells, brute_open, count_components, point_ring_distance, shoelace


def make_grid(cells, resolution=1.0, origin=(0.0, 0.0, 0.0)):
    cells = np.asarray(cells, dtype=np.uint8)
    h, w = cells.shape
    return OccupancyGrid(width=w, height=h, resolution=resolution, origin=origin, cells=cells)


def make_binary(cells, resolution=1.0, origin=(0.0, 0.0, 0.0)):
    cells = np.asarray(cells, dtype=np.uint8)
    h, w = cells.shape
    return BinaryGrid(width=w, height=h, resolution=resolution, origin=origin, cells=cells)


def random_binary(seed, size=64, density=0.25):
    rng = np.random.default_rng(seed)
    return make_binary((rng.random((size, size)) < density).astype(np.uint8))


# --- binarize ---

def test_binarize_threshold():
    cells = np.zeros((3, 3), dtype=np.uint8)
    cells[1, 1] = 255
    out = binarize(make_grid(cells), 128)
    assert out.cells.sum() == 1 and out.cells[1, 1] == 1


def test_binarize_all_zero():
    out = binarize(make_grid(np.zeros((4, 5), dtype=np.uint8)), 128)
    assert not out.cells.any()


def test_binarize_unknown_forced_free():
    cells = np.full((3, 3), 205, dtype=np.uint8)
    cells[0, 0] = 254
    out = binarize(make_grid(cells), 250, unknown_value=205)
    assert out.cells[0, 0] == 1 and out.cells.sum() == 1


def test_binarize_idempotent():
    rng = np.random.default_rng(7)
    cells = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
    once = binarize(make_grid(cells), 100)
    twice = binarize(make_grid(once.cells), 1)
    assert np.array_equal(once.cells, twice.cells)


# --- morph_open ---

def test_open_removes_speckle():
    cells = np.zeros((5, 5), dtype=np.uint8)
    cells[2, 2] = 1
    assert not morph_open(make_binary(cells), 1).cells.any()


def test_open_radius_zero_identity():
    grid = random_binary(0, size=16)
    out = morph_open(grid, 0)
    assert np.array_equal(out.cells, grid.cells)


def test_open_preserves_block():
    cells = np.zeros((9, 9), dtype=np.uint8)
    cells[2:7, 2:7] = 1
    out = morph_open(make_binary(cells), 1)
    expected = brute_open(cells, disk_footprint(1))
    assert np.array_equal(out.cells, expected)
    assert np.array_equal(out.cells, cells)  # block >= element survives intact


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("radius", [1, 2])
def test_open_matches_brute_force(seed, radius):
    grid = random_binary(seed, size=24, density=0.45)
    out = morph_open(grid, radius)
    assert np.array_equal(out.cells, brute_open(grid.cells, disk_footprint(radius)))


def test_open_anti_extensive():
    for seed in range(5):
        grid = random_binary(seed, size=32, density=0.5)
        out = morph_open(grid, 2)
        assert not (out.cells & ~grid.cells).any()


# --- extract_contours ---

def test_single_cell_contour():
    cells = np.zeros((5, 5), dtype=np.uint8)
    cells[2, 3] = 1
    contours = extract_contours(make_binary(cells))
    assert len(contours) == 1
    assert contours[0].points == [(3, 2)]


def test_block_contour_is_perimeter():
    cells = np.zeros((7, 7), dtype=np.uint8)
    cells[2:5, 2:5] = 1
    contours = extract_contours(make_binary(cells))
    assert len(contours) == 1
    perimeter = {(c, r) for r in range(2, 5) for c in range(2, 5)} - {(3, 3)}
    assert set(contours[0].points) == perimeter


def test_two_blocks_two_contours():
    cells = np.zeros((10, 10), dtype=np.uint8)
    cells[1:3, 1:3] = 1
    cells[6:9, 6:9] = 1
    assert len(extract_contours(make_binary(cells))) == 2


def test_contours_closed_8_connected():
    grid = random_binary(3, density=0.3)
    for contour in extract_contours(grid):
        pts = contour.points
        for a, b in zip(pts, pts[1:] + pts[:1]):
            assert abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1
            assert a != b or len(pts) == 1


@pytest.mark.parametrize("seed", range(20))
def test_contours_match_border_oracle(seed):
    grid = random_binary(seed, density=0.2)
    contours = extract_contours(grid)
    union = set()
    for contour in contours:
        union |= set(contour.points)
    assert union == border_cells(grid.cells)
    assert len(contours) == count_components(grid.cells)


# --- simplify_contour ---

def test_simplify_square_keeps_corners():
    cells = np.zeros((12, 12), dtype=np.uint8)
    cells[3:9, 3:9] = 1
    grid = make_binary(cells)
    contour = extract_contours(grid)[0]
    poly = simplify_contour(contour, grid, epsilon=0.5 * grid.resolution)
    assert len(poly.vertices) == 4
    corners = {(3.5, 3.5), (3.5, 8.5), (8.5, 3.5), (8.5, 8.5)}
    assert {tuple(v) for v in poly.vertices} == corners


def test_simplify_epsilon_zero_keeps_all():
    cells = np.zeros((8, 8), dtype=np.uint8)
    cells[2:5, 2:6] = 1
    grid = make_binary(cells)
    contour = extract_contours(grid)[0]
    poly = simplify_contour(contour, grid, epsilon=0.0)
    world = {grid.cell_to_world(c, r) for c, r in contour.points}
    assert {tuple(v) for v in poly.vertices} == world


def test_simplify_degenerate_inflates():
    cells = np.zeros((5, 5), dtype=np.uint8)
    cells[2, 2] = 1
    grid = make_binary(cells, resolution=0.5)
    poly = simplify_contour(Contour(points=[(2, 2)], orientation="clockwise"), grid, 0.1)
    assert len(poly.vertices) == 4
    side = np.ptp(poly.vertices[:, 0])
    assert side == pytest.approx(grid.resolution)
    assert poly.clockwise and signed_area(poly.vertices) < 0


@pytest.mark.parametrize("seed", range(10))
def test_simplify_deviation_bound(seed):
    grid = random_binary(seed, size=48, density=0.1)
    epsilon = 2.0 * grid.resolution
    for contour in extract_contours(grid):
        poly = simplify_contour(contour, grid, epsilon)
        kept = {tuple(v) for v in poly.vertices}
        world = {grid.cell_to_world(c, r) for c, r in contour.points}
        # inflated bounding boxes pad by half a cell; interior points of the
        # degenerate contour then sit at most half the thin side from the ring
        slack = 0.0 if kept <= world else 0.5 * grid.resolution
        for c, r in contour.points:
            p = grid.cell_to_world(c, r)
            if tuple(p) in kept:
                continue
            assert point_ring_distance(p, poly.vertices) <= epsilon + slack + 1e-9


# --- orient_clockwise ---

def test_orient_reverses_ccw_triangle():
    poly = orient_clockwise(Polygon2D(np.array([[0, 0], [1, 0], [0, 1]]), clockwise=False))
    assert np.array_equal(poly.vertices, np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]))


def test_orient_idempotent_on_cw_square():
    square = np.array([[0.0, 1.0], [1.0, 1.0], [1.0, 0.0], [0.0, 0.0]])
    poly = orient_clockwise(Polygon2D(square, clockwise=True))
    assert np.array_equal(poly.vertices, square)
    again = orient_clockwise(poly)
    assert np.array_equal(again.vertices, square)


def test_orient_concave_matches_shoelace():
    l_shape = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 3], [0, 3]], dtype=float)
    assert shoelace(l_shape) > 0  # given counterclockwise
    poly = orient_clockwise(Polygon2D(l_shape, clockwise=False))
    assert shoelace(poly.vertices) < 0


@pytest.mark.parametrize("seed", range(20))
def test_orient_random_polygons(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    # star polygon around the origin: positive angular gaps summing to 2*pi
    # keep it simple (non-self-intersecting) for any radii
    gaps = rng.uniform(0.2, 1.0, size=n)
    angles = 2 * np.pi * np.cumsum(gaps) / gaps.sum()
    radii = rng.uniform(0.5, 2.0, size=n)
    verts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    if rng.random() < 0.5:
        verts = verts[::-1]
    poly = orient_clockwise(Polygon2D(verts, clockwise=False))
    assert shoelace(poly.vertices) < 0
    assert {tuple(v) for v in poly.vertices} == {tuple(v) for v in verts}


# --- map files ---

def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    cells = rng.integers(0, 256, size=(17, 23)).astype(np.uint8)
    path = tmp_path / "m.pgm"
    write_pgm(path, cells)
    assert np.array_equal(read_pgm(path), cells)


def test_pgm_ascii(tmp_path):
    path = tmp_path / "m.pgm"
    path.write_text("P2\n# comment\n3 2\n255\n0 10 20\n30 40 50\n")
    assert np.array_equal(read_pgm(path), np.array([[0, 10, 20], [30, 40, 50]], dtype=np.uint8))


def test_map_roundtrip(tmp_path):
    grid = make_grid(np.arange(12, dtype=np.uint8).reshape(3, 4), resolution=0.25,
                     origin=(1.0, -2.0, 0.0))
    save_map(tmp_path / "map.yaml", grid)
    loaded, meta = load_map(tmp_path / "map.yaml")
    assert np.array_equal(loaded.cells, grid.cells)
    assert loaded.resolution == grid.resolution
    assert loaded.origin == grid.origin
    assert meta.occupied_threshold == 128
