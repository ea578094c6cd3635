from __future__ import annotations

import copy

import numpy as np
import pytest

from vsrnav import demo, simworld
from vsrnav.coverage import CoverageGraph, CoverageNode, CoverageParams, plan_coverage
from vsrnav.embed import SyntheticEmbedder, default_vocabulary


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def embedder(vocab):
    return SyntheticEmbedder(vocab)


@pytest.fixture(scope="session")
def _demo_bundle(embedder):
    """Plan + scan the built-in demo world once; tests take copies."""
    world = demo.make_demo_world()
    tour = plan_coverage(world.grid, CoverageParams(), demo.DEMO_START)
    scene = simworld.run_coverage_scan(world, tour, simworld.CameraModel(), embedder)
    return world, tour, scene


@pytest.fixture
def demo_world():
    return demo.make_demo_world()


@pytest.fixture
def demo_tour(_demo_bundle):
    return copy.deepcopy(_demo_bundle[1])


@pytest.fixture
def demo_scene(_demo_bundle):
    return copy.deepcopy(_demo_bundle[2])


def random_graph(seed: int, m: int, big_edges: int = 0,
                 integer_costs: bool = True) -> CoverageGraph:
    """Random asymmetric instance for the solvers; each node its own polygon
    so only the cost matrix matters."""
    rng = np.random.default_rng(seed)
    if integer_costs:
        adjacency = rng.integers(1, 10, size=(m, m)).astype(float)
    else:
        pts = rng.uniform(0.0, 10.0, size=(m, 2))
        adjacency = np.hypot(pts[:, None, 0] - pts[None, :, 0],
                             pts[:, None, 1] - pts[None, :, 1])
        adjacency += rng.uniform(0.0, 0.05, size=(m, m))  # slight asymmetry
    np.fill_diagonal(adjacency, 0.0)
    big = 1.0 + float(adjacency.sum())
    flat = [(i, j) for i in range(m) for j in range(m) if i != j]
    for k in rng.choice(len(flat), size=min(big_edges, len(flat)), replace=False):
        i, j = flat[int(k)]
        adjacency[i, j] = big
    nodes = [CoverageNode(0, (0.0, 0.0), "start", 0)]
    nodes += [CoverageNode(i, (float(i), 0.0), i, 0) for i in range(1, m)]
    return CoverageGraph(nodes=nodes, adjacency=adjacency, big=big)
