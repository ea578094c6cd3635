"""Coverage graph construction and closed-tour solving.

Nodes are the offset obstacle-polygon vertices plus the robot start. Each
polygon ring is one-way in its traversal direction (reverse edges carry a BIG
sentinel), so any optimal tour encircles every obstacle with the side camera
facing it. Inter-polygon and start edges are bidirectional grid-path costs.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DisconnectedWorld, Infeasible, OffsetInfeasible, TooLarge
from .gridmap import (
    BinaryGrid,
    OccupancyGrid,
    Polygon2D,
    binarize,
    extract_contours,
    morph_open,
    orient_clockwise,
    signed_area,
    simplify_contour,
)

__all__ = [
    "CoverageNode",
    "CoverageGraph",
    "Tour",
    "CoverageParams",
    "offset_polygon",
    "build_graph",
    "solve_tsp_exact",
    "solve_tsp_heuristic",
    "plan_coverage",
    "passability_grid",
    "line_free",
    "astar",
    "tour_document",
    "parse_tour_document",
    "write_tour_svg",
    "EXACT_NODE_LIMIT",
]

EXACT_NODE_LIMIT = 16
START_POLYGON_ID = "start"


@dataclass
class CoverageNode:
    id: int
    position: tuple[float, float]
    polygon_id: int | str  # polygon index or "start"
    ring_index: int


@dataclass
class CoverageGraph:
    nodes: list[CoverageNode]
    adjacency: np.ndarray  # (M, M) costs in meters, BIG where impassable
    big: float
    # world polylines backing finite edges, keyed by (i, j)
    paths: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass
class Tour:
    order: list[int]  # starts and ends at the start node
    total_cost: float
    segment_paths: list[np.ndarray]  # one polyline per consecutive pair


@dataclass
class CoverageParams:
    occupied_threshold: int = 128
    unknown_value: int | None = 205
    open_radius: int = 2
    simplify_epsilon: float | None = None  # default: 2 * resolution
    offset_delta: float = 0.3
    camera_side: str = "right"  # right -> clockwise encirclement
    exact_limit: int = EXACT_NODE_LIMIT
    seed: int = 0
    # sweep each polygon's closing ring edge before departing, so the camera
    # records the full perimeter (node order and costs are unaffected)
    close_rings: bool = True


# --- grid passability and pathfinding ---

def passability_grid(grid: OccupancyGrid, occupied_threshold: int,
                     unknown_value: int | None) -> BinaryGrid:
    """1 = impassable. Unknown cells are not obstacles to cover but the robot
    must not drive through them."""
    blocked = grid.cells >= occupied_threshold
    if unknown_value is not None:
        blocked = blocked | (grid.cells == unknown_value)
    return BinaryGrid(grid.width, grid.height, grid.resolution, grid.origin,
                      blocked.astype(np.uint8))


def _point_passable(grid: BinaryGrid, x: float, y: float) -> bool:
    col, row = grid.world_to_cell(x, y)
    return grid.in_bounds(col, row) and grid.cells[row, col] == 0


def line_free(grid: BinaryGrid, p, q) -> bool:
    """True if the segment p-q stays inside passable cells (sampled at
    quarter-resolution)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dist = float(np.hypot(*(q - p)))
    n = max(2, int(math.ceil(dist / (grid.resolution * 0.25))) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = p[None, :] + ts[:, None] * (q - p)[None, :]
    ox, oy, _ = grid.origin
    cols = np.floor((pts[:, 0] - ox) / grid.resolution).astype(int)
    rows = np.floor((pts[:, 1] - oy) / grid.resolution).astype(int)
    if (cols < 0).any() or (cols >= grid.width).any() or (rows < 0).any() or (rows >= grid.height).any():
        return False
    return not grid.cells[rows, cols].any()


_SQRT2 = math.sqrt(2.0)
_MOVES = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, _SQRT2), (1, -1, _SQRT2), (-1, 1, _SQRT2), (-1, -1, _SQRT2)]


def astar(grid: BinaryGrid, start_cell: tuple[int, int],
          goal_cell: tuple[int, int]) -> list[tuple[int, int]] | None:
    """8-connected A* over passable cells with octile heuristic.

    Diagonal moves are forbidden when either orthogonal neighbor is blocked,
    so resulting cell chains never cut corners. Returns the cell path or None.
    """
    cells = grid.cells
    w, h = grid.width, grid.height
    sc, sr = start_cell
    gc, gr = goal_cell
    if not (grid.in_bounds(sc, sr) and grid.in_bounds(gc, gr)):
        return None
    if cells[sr, sc] or cells[gr, gc]:
        return None

    def octile(c, r):
        dx, dy = abs(c - gc), abs(r - gr)
        return (dx + dy) + (_SQRT2 - 2.0) * min(dx, dy)

    g_cost = {start_cell: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 0
    heap = [(octile(sc, sr), counter, start_cell)]
    closed = set()
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal_cell:
            path = [cur]
            while cur in parent:
                cur = parent[cur]
                path.append(cur)
            return path[::-1]
        closed.add(cur)
        cc, cr = cur
        base = g_cost[cur]
        for dc, dr, step in _MOVES:
            nc, nr = cc + dc, cr + dr
            if not (0 <= nc < w and 0 <= nr < h) or cells[nr, nc]:
                continue
            if dc and dr and (cells[cr, nc] or cells[nr, cc]):
                continue  # no corner cutting
            ng = base + step
            nxt = (nc, nr)
            if ng < g_cost.get(nxt, math.inf) - 1e-12:
                g_cost[nxt] = ng
                parent[nxt] = cur
                counter += 1
                heapq.heappush(heap, (ng + octile(nc, nr), counter, nxt))
    return None


def _grid_path(grid: BinaryGrid, p, q) -> np.ndarray | None:
    """Collision-free polyline from p to q: straight when clear, else A*."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if line_free(grid, p, q):
        return np.vstack([p, q])
    cells = astar(grid, grid.world_to_cell(*p), grid.world_to_cell(*q))
    if cells is None:
        return None
    centers = np.array([grid.cell_to_world(c, r) for c, r in cells], dtype=float)
    return np.vstack([p, centers, q])


def _polyline_length(poly: np.ndarray) -> float:
    d = np.diff(poly, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


# --- polygon offsetting ---

def offset_polygon(poly: Polygon2D, delta: float, grid: BinaryGrid) -> Polygon2D:
    """Displace each vertex outward (into free space) along the miter
    bisector by delta edge clearance.

    Vertices landing on impassable cells are pushed further along the
    bisector to the nearest free cell center within 4*delta of the original
    displacement, else dropped. Traversal order is preserved.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    v = poly.vertices
    if delta == 0.0:
        return Polygon2D(v.copy(), clockwise=poly.clockwise)
    n = len(v)
    outward_is_left = signed_area(v) < 0  # clockwise ring: interior on the right
    out: list[np.ndarray] = []
    for i in range(n):
        d1 = v[i] - v[i - 1]
        d2 = v[(i + 1) % n] - v[i]
        n1 = _edge_normal(d1, outward_is_left)
        n2 = _edge_normal(d2, outward_is_left)
        b = n1 + n2
        norm = float(np.hypot(*b))
        if norm < 1e-9:  # 180-degree spike; fall back to one edge normal
            b_hat = n1
        else:
            b_hat = b / norm
        cos_half = max(float(np.dot(b_hat, n1)), 0.25)  # miter limit 4
        target = v[i] + b_hat * (delta / cos_half)
        placed = _settle_vertex(grid, target, b_hat, 4.0 * delta)
        if placed is not None:
            out.append(placed)
    # drop consecutive duplicates
    deduped: list[np.ndarray] = []
    for p in out:
        if not deduped or np.hypot(*(p - deduped[-1])) > 1e-9:
            deduped.append(p)
    if len(deduped) >= 2 and np.hypot(*(deduped[0] - deduped[-1])) <= 1e-9:
        deduped.pop()
    if len(deduped) < 3:
        raise OffsetInfeasible(f"only {len(deduped)} offset vertices survive")
    verts = np.array(deduped)
    return Polygon2D(verts, clockwise=signed_area(verts) < 0)


def _edge_normal(d: np.ndarray, left: bool) -> np.ndarray:
    norm = float(np.hypot(*d))
    if norm < 1e-12:
        return np.zeros(2)
    d = d / norm
    return np.array([-d[1], d[0]]) if left else np.array([d[1], -d[0]])


def _settle_vertex(grid: BinaryGrid, target: np.ndarray, direction: np.ndarray,
                   budget: float) -> np.ndarray | None:
    if _point_passable(grid, *target):
        return target
    step = grid.resolution * 0.5
    travelled = step
    while travelled <= budget:
        probe = target + direction * travelled
        col, row = grid.world_to_cell(*probe)
        if grid.in_bounds(col, row) and grid.cells[row, col] == 0:
            return np.asarray(grid.cell_to_world(col, row), dtype=float)
        travelled += step
    return None


# --- graph construction ---

def build_graph(polygons: list[Polygon2D], start: tuple[float, float],
                grid: BinaryGrid) -> CoverageGraph:
    """Directed cost graph: one-way ring edges per polygon, bidirectional
    grid-path edges between polygons and to/from the start node."""
    if not _point_passable(grid, *start):
        raise ValueError("start position is not in free space")
    nodes = [CoverageNode(0, (float(start[0]), float(start[1])), START_POLYGON_ID, 0)]
    rings: list[list[int]] = []
    for pid, poly in enumerate(polygons):
        ring = []
        for ri, vert in enumerate(poly.vertices):
            nid = len(nodes)
            nodes.append(CoverageNode(nid, (float(vert[0]), float(vert[1])), pid, ri))
            ring.append(nid)
        rings.append(ring)
    m = len(nodes)
    adjacency = np.full((m, m), np.inf)
    np.fill_diagonal(adjacency, 0.0)
    paths: dict[tuple[int, int], np.ndarray] = {}

    def connect(i: int, j: int) -> bool:
        path = _grid_path(grid, nodes[i].position, nodes[j].position)
        if path is None:
            return False
        cost = _polyline_length(path)
        adjacency[i, j] = cost
        paths[(i, j)] = path
        return True

    for ring in rings:  # one-way intra-polygon edges in traversal order
        for k, i in enumerate(ring):
            j = ring[(k + 1) % len(ring)]
            if not connect(i, j):
                raise DisconnectedWorld(f"ring edge {i}->{j} blocked")
    polygon_of = [n.polygon_id for n in nodes]
    for i in range(m):
        for j in range(i + 1, m):
            if polygon_of[i] == polygon_of[j] and polygon_of[i] != START_POLYGON_ID:
                continue  # intra-polygon: only ring edges are passable
            if np.isfinite(adjacency[i, j]) and np.isfinite(adjacency[j, i]):
                continue
            if connect(i, j):
                adjacency[j, i] = adjacency[i, j]
                paths[(j, i)] = paths[(i, j)][::-1].copy()
            elif i == 0:
                raise DisconnectedWorld(f"node {j} unreachable from start")
    finite = adjacency[np.isfinite(adjacency)]
    big = 1.0 + float(finite.sum())
    adjacency[~np.isfinite(adjacency)] = big
    return CoverageGraph(nodes=nodes, adjacency=adjacency, big=big, paths=paths)


# --- solvers ---

def _segment_paths(graph: CoverageGraph, order: list[int]) -> list[np.ndarray]:
    out = []
    for i, j in zip(order, order[1:]):
        path = graph.paths.get((i, j))
        if path is None:
            path = np.array([graph.nodes[i].position, graph.nodes[j].position])
        out.append(path)
    return out


def _tour_cost(adjacency: np.ndarray, order: list[int]) -> float:
    return float(sum(adjacency[i, j] for i, j in zip(order, order[1:])))


def _make_tour(graph: CoverageGraph, order: list[int]) -> Tour:
    return Tour(order=order, total_cost=_tour_cost(graph.adjacency, order),
                segment_paths=_segment_paths(graph, order))


def _solver_costs(graph: CoverageGraph) -> np.ndarray:
    """Cost matrix the solvers optimize over.

    When the graph has multi-vertex rings, every edge that crosses between
    two rings (or ring and start) carries an extra penalty larger than the
    sum of all real costs. A tour that traverses each ring contiguously pays
    the penalty the minimum possible number of times, so any tour that leaves
    a ring half-finished is strictly worse and can never be selected. Graphs
    whose rings are all single vertices pay the penalty uniformly on every
    edge, which shifts all tours equally and changes nothing.
    """
    cluster = [node.polygon_id for node in graph.nodes]
    sizes: dict[int | str, int] = {}
    for cid in cluster:
        sizes[cid] = sizes.get(cid, 0) + 1
    if all(size == 1 for size in sizes.values()):
        return graph.adjacency
    m = graph.size
    inter = np.array([[cluster[i] != cluster[j] for j in range(m)]
                      for i in range(m)])
    return graph.adjacency + graph.big * inter


def _order_feasible(graph: CoverageGraph, order: list[int]) -> bool:
    return all(graph.adjacency[i, j] < graph.big for i, j in zip(order, order[1:]))


def solve_tsp_exact(graph: CoverageGraph) -> Tour:
    """Held-Karp dynamic program over node subsets.

    Tie-break: the lexicographically smallest order among cost-optimal tours,
    obtained by greedy forward reconstruction over the completion-cost table.
    """
    m = graph.size
    if m > EXACT_NODE_LIMIT:
        raise TooLarge(f"{m} nodes exceeds exact limit {EXACT_NODE_LIMIT}")
    if m == 1:
        return Tour(order=[0, 0], total_cost=0.0, segment_paths=[])
    a = _solver_costs(graph)
    nbits = m - 1
    full = (1 << nbits) - 1
    # h[mask, j]: min cost from node j through the unvisited set `mask`
    # (bit k = node k+1) and back to the start node 0
    h = np.empty((full + 1, m))
    h[0] = a[:, 0]
    members: list[list[int]] = [[] for _ in range(full + 1)]
    for mask in range(1, full + 1):
        ks = [k for k in range(nbits) if mask >> k & 1]
        members[mask] = ks
        cols = np.array([a[:, k + 1] + h[mask ^ (1 << k), k + 1] for k in ks])
        h[mask] = cols.min(axis=0)
    order = [0]
    mask, j = full, 0
    while mask:
        for k in members[mask]:
            if a[j, k + 1] + h[mask ^ (1 << k), k + 1] == h[mask, j]:
                order.append(k + 1)
                mask ^= 1 << k
                j = k + 1
                break
        else:  # float asymmetry safety net: take the argmin instead
            k = min(members[mask], key=lambda k: a[j, k + 1] + h[mask ^ (1 << k), k + 1])
            order.append(k + 1)
            mask ^= 1 << k
            j = k + 1
    order.append(0)
    if not _order_feasible(graph, order):
        raise Infeasible("every closed tour uses an impassable edge")
    return _make_tour(graph, order)


def _initial_tour(graph: CoverageGraph, rng: np.random.Generator) -> list[int]:
    """Feasible construction: walk polygons ring-by-ring, nearest entry first;
    plain nearest-neighbor for graphs without ring structure."""
    m = graph.size
    rings: dict[int | str, list[int]] = {}
    for node in graph.nodes[1:]:
        rings.setdefault(node.polygon_id, []).append(node.id)
    structured = all(isinstance(pid, int) for pid in rings)
    a = graph.adjacency
    if structured and rings:
        for pid in rings:
            rings[pid].sort(key=lambda nid: graph.nodes[nid].ring_index)
        order = [0]
        remaining = sorted(rings)
        cur = 0
        while remaining:
            best = None
            for pid in remaining:
                for k, entry in enumerate(rings[pid]):
                    cost = a[cur, entry]
                    if best is None or cost < best[0]:
                        best = (cost, pid, k)
            _, pid, k = best
            ring = rings[pid]
            walk = ring[k:] + ring[:k]
            order.extend(walk)
            cur = walk[-1]
            remaining.remove(pid)
        order.append(0)
        return order
    # nearest neighbor from the start
    order = [0]
    unvisited = set(range(1, m))
    cur = 0
    while unvisited:
        nxt = min(unvisited, key=lambda j: (a[cur, j], j))
        order.append(nxt)
        unvisited.discard(nxt)
        cur = nxt
    order.append(0)
    return order


def _or_opt(order: list[int], a: np.ndarray) -> list[int]:
    """Relocate segments of length 1-3 without reversing them (direction-safe
    for asymmetric costs); first-improvement until a local optimum."""
    order = list(order)
    improved = True
    while improved:
        improved = False
        n = len(order)
        for seg_len in (1, 2, 3):
            for i in range(1, n - seg_len):
                seg = order[i:i + seg_len]
                pre, post = order[i - 1], order[i + seg_len]
                gain = (a[pre, seg[0]] + a[seg[-1], post]) - a[pre, post]
                rest = order[:i] + order[i + seg_len:]
                for j in range(len(rest) - 1):
                    u, v = rest[j], rest[j + 1]
                    add = a[u, seg[0]] + a[seg[-1], v] - a[u, v]
                    if add - gain < -1e-9:
                        order = rest[:j + 1] + seg + rest[j + 1:]
                        improved = True
                        break
                if improved:
                    break
            if improved:
                break
    return order


def _double_bridge(order: list[int], rng: np.random.Generator) -> list[int]:
    interior = order[1:-1]
    if len(interior) < 4:
        return list(order)
    cuts = sorted(rng.choice(np.arange(1, len(interior)), size=3, replace=False).tolist())
    p, q, r = cuts
    mixed = interior[:p] + interior[q:r] + interior[p:q] + interior[r:]
    return [order[0]] + mixed + [order[-1]]


def solve_tsp_heuristic(graph: CoverageGraph, seed: int = 0, restarts: int = 12) -> Tour:
    """Nearest-entry construction plus Or-opt, with seeded double-bridge
    perturbation restarts. Deterministic for a given seed."""
    m = graph.size
    if m == 1:
        return Tour(order=[0, 0], total_cost=0.0, segment_paths=[])
    rng = np.random.default_rng(seed)
    a = _solver_costs(graph)
    best = _or_opt(_initial_tour(graph, rng), a)
    best_cost = _tour_cost(a, best)
    for _ in range(restarts):
        cand = _or_opt(_double_bridge(best, rng), a)
        cost = _tour_cost(a, cand)
        if cost < best_cost - 1e-12:
            best, best_cost = cand, cost
    if not _order_feasible(graph, best):
        if m <= EXACT_NODE_LIMIT:
            return solve_tsp_exact(graph)  # may legitimately raise Infeasible
        raise Infeasible("heuristic found no tour without impassable edges")
    return _make_tour(graph, best)


# --- end-to-end pipeline ---

def plan_coverage(grid: OccupancyGrid, params: CoverageParams,
                  start: tuple[float, float]) -> Tour:
    """binarize -> open -> contours -> simplify -> orient -> offset ->
    graph -> solve (exact when small enough, else heuristic)."""
    passable = passability_grid(grid, params.occupied_threshold, params.unknown_value)
    if not _point_passable(passable, *start):
        raise ValueError("start position is not in free space")
    obstacles = binarize(grid, params.occupied_threshold, unknown_value=params.unknown_value)
    opened = morph_open(obstacles, params.open_radius)
    epsilon = params.simplify_epsilon if params.simplify_epsilon is not None \
        else 2.0 * grid.resolution
    polygons = []
    for contour in extract_contours(opened):
        poly = orient_clockwise(simplify_contour(contour, opened, epsilon))
        if params.camera_side == "left":  # left camera: encircle counterclockwise
            poly = Polygon2D(poly.vertices[::-1].copy(), clockwise=False)
        polygons.append(offset_polygon(poly, params.offset_delta, passable))
    if not polygons:
        return Tour(order=[0, 0], total_cost=0.0, segment_paths=[])
    graph = build_graph(polygons, start, passable)
    if graph.size <= params.exact_limit:
        tour = solve_tsp_exact(graph)
    else:
        tour = solve_tsp_heuristic(graph, seed=params.seed)
    if params.close_rings:
        _sweep_closing_edges(graph, tour)
    tour.graph = graph  # type: ignore[attr-defined]  # kept for export/debug
    return tour


def _sweep_closing_edges(graph: CoverageGraph, tour: Tour) -> None:
    """Extend each polygon-departure segment path to first traverse the ring's
    closing edge back to the entry vertex, then leave from there. The node
    order and total cost are untouched; only the driven polyline grows."""
    by_polygon: dict[int | str, list[CoverageNode]] = {}
    for node in graph.nodes:
        by_polygon.setdefault(node.polygon_id, []).append(node)
    for k, (i, j) in enumerate(zip(tour.order, tour.order[1:])):
        ni, nj = graph.nodes[i], graph.nodes[j]
        if ni.polygon_id == START_POLYGON_ID or ni.polygon_id == nj.polygon_id:
            continue
        ring = by_polygon[ni.polygon_id]
        entry = next((n for n in ring
                      if n.ring_index == (ni.ring_index + 1) % len(ring)), None)
        if entry is None or entry.id == j:
            continue
        closing = graph.paths.get((i, entry.id))
        onward = graph.paths.get((entry.id, j))
        if closing is None or onward is None:
            continue
        tour.segment_paths[k] = np.vstack([closing, onward[1:]])


# --- export ---

def tour_document(tour: Tour, graph: CoverageGraph | None = None) -> dict:
    doc = {
        "order": tour.order,
        "total_cost": tour.total_cost,
        "segment_paths": [p.tolist() for p in tour.segment_paths],
    }
    graph = graph or getattr(tour, "graph", None)
    if graph is not None:
        doc["nodes"] = [
            {"id": n.id, "x": n.position[0], "y": n.position[1],
             "polygon_id": n.polygon_id, "ring_index": n.ring_index}
            for n in graph.nodes
        ]
        doc["adjacency"] = graph.adjacency.tolist()
    else:
        doc["nodes"] = []
        doc["adjacency"] = []
    return doc


def parse_tour_document(doc: dict) -> Tour:
    return Tour(order=[int(i) for i in doc["order"]],
                total_cost=float(doc["total_cost"]),
                segment_paths=[np.asarray(p, dtype=float).reshape(-1, 2)
                               for p in doc["segment_paths"]])


def save_tour(path: str | Path, tour: Tour, graph: CoverageGraph | None = None) -> None:
    Path(path).write_text(json.dumps(tour_document(tour, graph), indent=2))


def load_tour(path: str | Path) -> Tour:
    return parse_tour_document(json.loads(Path(path).read_text()))


def write_tour_svg(path: str | Path, grid: OccupancyGrid, tour: Tour,
                   occupied_threshold: int = 128) -> None:
    """Map + tour overlay for visual inspection (y flipped for screen space)."""
    ox, oy, _ = grid.origin
    res = grid.resolution
    w_m, h_m = grid.width * res, grid.height * res

    def sx(x):  # world -> svg
        return (x - ox) / res

    def sy(y):
        return grid.height - (y - oy) / res

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {grid.width} {grid.height}">',
             f'<rect width="{grid.width}" height="{grid.height}" fill="white"/>']
    rows, cols = np.nonzero(grid.cells >= occupied_threshold)
    for r, c in zip(rows.tolist(), cols.tolist()):
        parts.append(f'<rect x="{c}" y="{grid.height - 1 - r}" width="1" height="1" fill="#444"/>')
    for seg in tour.segment_paths:
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in seg)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="red" stroke-width="0.6"/>')
    if tour.segment_paths:
        x0, y0 = tour.segment_paths[0][0]
        parts.append(f'<circle cx="{sx(x0):.2f}" cy="{sy(y0):.2f}" r="1.5" fill="blue"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
