"""Seeded synthetic graphs for experiments and tests."""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .graph import Graph


def _decode_pairs(t: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map triangular pair indexes 0..C(n,2)-1 to (u, v) with u < v."""
    tf = t.astype(np.float64)
    u = np.floor(((2 * n - 1) - np.sqrt((2 * n - 1) ** 2 - 8.0 * tf)) / 2.0).astype(np.int64)
    base = u * (2 * n - u - 1) // 2
    u -= base > t                      # guard against sqrt landing one row off
    base = u * (2 * n - u - 1) // 2
    nxt = (u + 1) * (2 * n - u - 2) // 2
    u += nxt <= t
    base = u * (2 * n - u - 1) // 2
    v = t - base + u + 1
    return u, v


def erdos_renyi(n: int, avg_degree: float, seed: int = 0) -> Graph:
    """Random undirected graph with ~avg_degree edges per vertex, as a Graph.

    Draws round(n*avg_degree/2) distinct vertex pairs uniformly without
    replacement and stores each in both directions, so undirected degree
    averages avg_degree. Fully determined by the seed.
    """
    if n < 2:
        raise DomainError("need at least two vertices")
    total = n * (n - 1) // 2
    m = int(round(n * avg_degree / 2.0))
    if not 0 <= m <= total:
        raise DomainError(f"avg_degree {avg_degree} asks for {m} of {total} possible edges")
    rng = np.random.default_rng(seed)
    t = np.sort(rng.choice(total, size=m, replace=False).astype(np.int64))
    u, v = _decode_pairs(t, n)
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    return Graph.from_pair_arrays(src, dst, n)
