import numpy as np
import pytest

from halopart import DeviceProfile, Graph, build_partition_set


@pytest.fixture
def path_graph():
    """Directed path 0 -> 1 -> 2 -> 3."""
    return Graph.from_edges([(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def k4():
    """Complete graph on 4 vertices, each undirected edge stored both ways."""
    edges = [(u, v) for u in range(4) for v in range(4) if u != v]
    return Graph.from_edges(edges)


@pytest.fixture
def path_partition(path_graph):
    return build_partition_set(path_graph, [0, 0, 1, 1], hops=1)


def unit_profile(name="unit", mem_gb=1.0):
    return DeviceProfile(id=name, mm_s=1.0, spmm_s=1.0, h2d_s=1.0,
                         d2h_s=1.0, idt_s=1.0, mem_gb=mem_gb)


@pytest.fixture
def unit_profiles():
    return [unit_profile(f"u{i}") for i in range(4)]
