"""Occupancy-grid processing: binarization, opening, border following, polygon fitting.

Cell/world convention: a cell (col, row) maps to the world point
origin + (col + 0.5, row + 0.5) * resolution, with y increasing with the row
index (y-up). Clockwise polygons therefore have negative shoelace area.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
import yaml
from scipy import ndimage

__all__ = [
    "OccupancyGrid",
    "BinaryGrid",
    "Contour",
    "Polygon2D",
    "binarize",
    "morph_open",
    "extract_contours",
    "simplify_contour",
    "orient_clockwise",
    "signed_area",
    "disk_footprint",
    "load_map",
    "save_map",
    "read_pgm",
    "write_pgm",
    "DEFAULT_OCCUPIED_THRESHOLD",
    "DEFAULT_UNKNOWN_VALUE",
]

DEFAULT_OCCUPIED_THRESHOLD = 128
DEFAULT_UNKNOWN_VALUE = 205


@dataclass
class OccupancyGrid:
    """Grayscale cell raster with resolution (m/cell) and world origin (x, y, theta)."""

    width: int
    height: int
    resolution: float
    origin: tuple[float, float, float]
    cells: np.ndarray  # (height, width) uint8, row-major

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.uint8).reshape(self.height, self.width)
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    def cell_to_world(self, col: float, row: float) -> tuple[float, float]:
        ox, oy, _ = self.origin
        return (ox + (col + 0.5) * self.resolution, oy + (row + 0.5) * self.resolution)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        ox, oy, _ = self.origin
        return (int(np.floor((x - ox) / self.resolution)), int(np.floor((y - oy) / self.resolution)))

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height


@dataclass
class BinaryGrid:
    """0/1 raster sharing the OccupancyGrid geometry."""

    width: int
    height: int
    resolution: float
    origin: tuple[float, float, float]
    cells: np.ndarray  # (height, width) uint8 in {0, 1}

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.uint8).reshape(self.height, self.width)
        if not np.isin(self.cells, (0, 1)).all():
            raise ValueError("binary grid cells must be 0 or 1")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    cell_to_world = OccupancyGrid.cell_to_world
    world_to_cell = OccupancyGrid.world_to_cell
    in_bounds = OccupancyGrid.in_bounds


@dataclass
class Contour:
    """Closed 8-connected cycle of boundary cells, as (col, row) pairs."""

    points: list[tuple[int, int]]
    orientation: str  # "clockwise" | "counterclockwise"
    closed: bool = True


@dataclass
class Polygon2D:
    """Polygon in world meters; clockwise means negative shoelace area (y-up)."""

    vertices: np.ndarray  # (N, 2) float
    clockwise: bool

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace signed area, positive for counterclockwise order (y-up)."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def binarize(grid: OccupancyGrid, threshold: int,
             unknown_value: int | None = None) -> BinaryGrid:
    """Mark cells with value >= threshold as obstacle (1), the rest as free (0).

    Cells equal to unknown_value are forced to 0: unknown space is not a
    boundary to cover (it is still impassable for path planning, handled by
    the coverage module's passability mask).
    """
    cells = (grid.cells >= threshold).astype(np.uint8)
    if unknown_value is not None:
        cells[grid.cells == unknown_value] = 0
    return BinaryGrid(grid.width, grid.height, grid.resolution, grid.origin, cells)


def disk_footprint(radius: int) -> np.ndarray:
    """Boolean disk mask under the Chebyshev metric: max(|dx|, |dy|) <= radius.

    The box-shaped disk preserves axis-aligned rectangular obstacles exactly
    (a rectangle is a union of translates of the element), so opening removes
    speckle without shaving block corners.
    """
    r = int(radius)
    return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)


def morph_open(grid: BinaryGrid, radius: int) -> BinaryGrid:
    """Morphological opening (erosion then dilation) with a disk element.

    Cells outside the grid count as free, so obstacles touching the border
    erode there like anywhere else. radius 0 is the identity.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return BinaryGrid(grid.width, grid.height, grid.resolution, grid.origin,
                          grid.cells.copy())
    disk = disk_footprint(radius)
    eroded = ndimage.binary_erosion(grid.cells.astype(bool), structure=disk, border_value=0)
    opened = ndimage.binary_dilation(eroded, structure=disk, border_value=0)
    return BinaryGrid(grid.width, grid.height, grid.resolution, grid.origin,
                      opened.astype(np.uint8))


def extract_contours(grid: BinaryGrid) -> list[Contour]:
    """Suzuki border following over the obstacle cells.

    Returns one contour per 8-connected obstacle component's outer border;
    holes inside obstacles are unreachable and skipped. Points are (col, row)
    cell coordinates forming a closed 8-connected cycle.
    """
    found, _ = cv2.findContours(grid.cells, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    contours = []
    for ct in found:
        pts = [(int(p[0]), int(p[1])) for p in ct.reshape(-1, 2)]
        area = signed_area(np.asarray(pts, dtype=float))
        orientation = "counterclockwise" if area > 0 else "clockwise"
        contours.append(Contour(points=pts, orientation=orientation))
    contours.sort(key=lambda c: min(c.points))
    return contours


def _rdp(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Ramer-Douglas-Peucker on an open polyline; keeps both endpoints.

    Deviation is the clamped distance to the chord *segment* (not the infinite
    line), so every dropped point stays within epsilon of the kept polyline.
    """
    if len(points) < 3:
        return points
    start, end = points[0], points[-1]
    chord = end - start
    denom = float(chord @ chord)
    rel = points[1:-1] - start
    if denom == 0.0:
        dists = np.hypot(rel[:, 0], rel[:, 1])
    else:
        t = np.clip((rel @ chord) / denom, 0.0, 1.0)
        diff = rel - np.outer(t, chord)
        dists = np.hypot(diff[:, 0], diff[:, 1])
    idx = int(np.argmax(dists)) + 1
    dmax = float(dists[idx - 1])
    if dmax > epsilon:
        left = _rdp(points[: idx + 1], epsilon)
        right = _rdp(points[idx:], epsilon)
        return np.vstack([left[:-1], right])
    return np.vstack([start, end])


def simplify_contour(contour: Contour, grid: BinaryGrid, epsilon: float) -> Polygon2D:
    """Fit a polygon to a contour in world meters, RDP tolerance in meters.

    Contours with fewer than 3 distinct points, or a zero-area fit, are
    inflated to the axis-aligned box of their cells padded by half a cell
    (a resolution-sized square for a single cell) so downstream polygon math
    stays total.
    """
    if not contour.points:
        raise ValueError("contour must have at least one point")
    world = np.array([grid.cell_to_world(c, r) for c, r in contour.points], dtype=float)
    distinct = np.unique(world, axis=0)
    half = 0.5 * grid.resolution

    def inflate() -> Polygon2D:
        # box around a single cell, or a thin rectangle along the principal
        # axis of a collinear run; either way every contour point stays
        # within half a cell of the ring
        if len(distinct) == 1:
            lo = distinct[0] - half
            hi = distinct[0] + half
            box = np.array([[lo[0], hi[1]], [hi[0], hi[1]],
                            [hi[0], lo[1]], [lo[0], lo[1]]])
            return Polygon2D(box, clockwise=True)
        center = distinct.mean(axis=0)
        rel = distinct - center
        _, _, vt = np.linalg.svd(rel, full_matrices=False)
        d = vt[0]
        n = np.array([-d[1], d[0]])
        t = rel @ d
        s = rel @ n
        t0, t1 = float(t.min()) - half, float(t.max()) + half
        s0, s1 = float(s.min()) - half, float(s.max()) + half
        box = np.array([center + a * d + b * n
                        for a, b in ((t0, s1), (t1, s1), (t1, s0), (t0, s0))])
        if signed_area(box) > 0:
            box = box[::-1].copy()
        return Polygon2D(box, clockwise=True)

    def dedup(verts: np.ndarray) -> np.ndarray:
        keep = np.ones(len(verts), dtype=bool)
        keep[1:] = np.any(verts[1:] != verts[:-1], axis=1)
        verts = verts[keep]
        if len(verts) > 1 and np.array_equal(verts[0], verts[-1]):
            verts = verts[:-1]
        return verts

    if len(distinct) < 3:
        return inflate()
    if epsilon <= 0.0:
        verts = dedup(world)
    else:
        # split the ring at its two mutually farthest anchor points so RDP
        # sees two open polylines; duplicates are dropped only when
        # consecutive, so a pinch point visited twice keeps both visits
        far = int(np.argmax(np.hypot(world[:, 0] - world[0, 0], world[:, 1] - world[0, 1])))
        if far == 0:
            far = len(world) // 2
        first = _rdp(world[: far + 1], epsilon)
        second = _rdp(np.vstack([world[far:], world[:1]]), epsilon)
        verts = dedup(np.vstack([first[:-1], second[:-1]]))
    area = signed_area(verts)
    if len(verts) >= 3 and area != 0.0:
        return Polygon2D(verts, clockwise=area < 0)
    rel = distinct - distinct.mean(axis=0)
    if np.linalg.svd(rel, compute_uv=False)[-1] < 1e-9:
        return inflate()  # genuinely collinear contour
    # zero-area but not collinear (self-cancelling ring): fall back to the
    # full polyline, which deviates from the contour by nothing at all
    verts = dedup(world)
    area = signed_area(verts)
    clockwise = area < 0 if area != 0.0 else contour.orientation == "clockwise"
    return Polygon2D(verts, clockwise=clockwise)


def orient_clockwise(poly: Polygon2D) -> Polygon2D:
    """Reverse vertex order if needed so traversal is clockwise.

    The test takes the highest vertex (max y, tie: min x) and the cross
    product of its incident edges; that vertex is on the convex hull, so the
    sign is valid for concave polygons too.
    """
    v = poly.vertices
    if len(v) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    top = int(min(range(len(v)), key=lambda i: (-v[i, 1], v[i, 0])))
    prev, nxt = v[top - 1], v[(top + 1) % len(v)]
    e1 = v[top] - prev
    e2 = nxt - v[top]
    cross = float(e1[0] * e2[1] - e1[1] * e2[0])
    if cross == 0.0:  # duplicate/collinear neighbors at the top; fall back
        cross = signed_area(v)
        cross = 1.0 if cross > 0 else -1.0 if cross < 0 else 0.0
        if cross == 0.0:
            raise ValueError("degenerate polygon: zero signed area")
    if cross > 0:  # counterclockwise turn at a hull vertex
        return Polygon2D(v[::-1].copy(), clockwise=True)
    return Polygon2D(v.copy(), clockwise=True)


# --- map files (PGM raster + key:value metadata sidecar) ---

@dataclass
class MapMetadata:
    """Sidecar fields for a PGM map, compatible with map-server YAML keys."""

    image: str
    resolution: float
    origin: tuple[float, float, float]
    occupied_threshold: int = DEFAULT_OCCUPIED_THRESHOLD
    free_threshold: int = 50
    unknown_value: int = DEFAULT_UNKNOWN_VALUE


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) PGM file with maxval <= 255."""
    data = Path(path).read_bytes()
    # header: magic, width, height, maxval separated by whitespace/comments
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n|\S+)").match(data, pos)
        if m is None:
            raise ValueError(f"{path}: truncated PGM header")
        pos = m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError(f"{path}: maxval {maxval} unsupported")
    if magic == b"P5":
        # exactly one whitespace byte separates the maxval from the raster
        raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos + 1)
    elif magic == b"P2":
        values = data[pos:].split()
        raster = np.array([int(t) for t in values[: w * h]], dtype=np.uint8)
    else:
        raise ValueError(f"{path}: not a P2/P5 PGM file")
    if raster.size != w * h:
        raise ValueError(f"{path}: raster size mismatch")
    return raster.reshape(h, w)


def write_pgm(path: str | Path, cells: np.ndarray) -> None:
    cells = np.asarray(cells, dtype=np.uint8)
    h, w = cells.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(cells.tobytes())


def load_map(metadata_path: str | Path) -> tuple[OccupancyGrid, MapMetadata]:
    """Load an occupancy grid from its metadata sidecar.

    The PGM stores rows top-to-bottom; row 0 of the grid is the bottom row in
    world coordinates, so the raster is flipped vertically on load.
    """
    metadata_path = Path(metadata_path)
    raw = yaml.safe_load(metadata_path.read_text())
    meta = MapMetadata(
        image=raw["image"],
        resolution=float(raw["resolution"]),
        origin=tuple(float(v) for v in raw["origin"]),
        occupied_threshold=int(raw.get("occupied_threshold", DEFAULT_OCCUPIED_THRESHOLD)),
        free_threshold=int(raw.get("free_threshold", 50)),
        unknown_value=int(raw.get("unknown_value", DEFAULT_UNKNOWN_VALUE)),
    )
    raster = read_pgm(metadata_path.parent / meta.image)
    cells = raster[::-1].copy()
    h, w = cells.shape
    grid = OccupancyGrid(width=w, height=h, resolution=meta.resolution,
                         origin=meta.origin, cells=cells)
    return grid, meta


def save_map(metadata_path: str | Path, grid: OccupancyGrid,
             meta: MapMetadata | None = None) -> None:
    metadata_path = Path(metadata_path)
    image = meta.image if meta else metadata_path.with_suffix(".pgm").name
    write_pgm(metadata_path.parent / image, grid.cells[::-1])
    fields = meta or MapMetadata(image=image, resolution=grid.resolution, origin=grid.origin)
    doc = {
        "image": image,
        "resolution": grid.resolution,
        "origin": list(grid.origin),
        "occupied_threshold": fields.occupied_threshold,
        "free_threshold": fields.free_threshold,
        "unknown_value": fields.unknown_value,
    }
    metadata_path.write_text(yaml.safe_dump(doc, sort_keys=False))
