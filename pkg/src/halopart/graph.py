"""Directed graphs in CSR form, partition/halo construction, and halo analytics.

A halo vertex of a partition is a vertex owned by another partition that sits
within ``hops`` undirected steps of the partition's inner set. Halo expansion
is deliberately undirected: feature aggregation pulls from in-neighbors, and
multi-layer dependencies propagate in both directions once subgraphs exchange
boundaries, so the inclusive definition is the safe one.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParseError


def _csr_from_pairs(src: np.ndarray, dst: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted CSR (offsets, targets) from already-deduplicated edge arrays."""
    order = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=n)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return offsets, dst[order].astype(np.int64)


def _gather(offsets: np.ndarray, targets: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of `vertices` (duplicates preserved)."""
    starts = offsets[vertices]
    lens = offsets[vertices + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    seg_starts = np.cumsum(lens) - lens
    pos = np.arange(total, dtype=np.int64) - np.repeat(seg_starts, lens)
    return targets[np.repeat(starts, lens) + pos]


def _dedup_pairs(src: np.ndarray, dst: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # encode (u, v) as u*n + v; n is desk-scale so this stays well inside int64
    codes = np.unique(src.astype(np.int64) * n + dst.astype(np.int64))
    return codes // n, codes % n


@dataclass(eq=False)
class Graph:
    """Immutable directed graph with both adjacency directions in CSR form.

    Vertex ids are exactly 0..n_vertices-1. Neighbor lists are sorted
    ascending and hold no duplicate (u, v) pairs; self-loops are allowed.
    `vertex_id_map` maps original ids to compact ids when the input had
    non-contiguous ids and was loaded with compaction enabled.
    """

    n_vertices: int
    n_edges: int
    out_offsets: np.ndarray
    out_targets: np.ndarray
    in_offsets: np.ndarray
    in_targets: np.ndarray
    vertex_id_map: dict[int, int] | None = None
    _und: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @classmethod
    def from_pair_arrays(cls, src: np.ndarray, dst: np.ndarray, n_vertices: int,
                         vertex_id_map: dict[int, int] | None = None) -> "Graph":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.size and (src.min() < 0 or dst.min() < 0 or
                         src.max() >= n_vertices or dst.max() >= n_vertices):
            raise DomainError("edge endpoint outside 0..n_vertices-1")
        if n_vertices > 0:
            src, dst = _dedup_pairs(src, dst, n_vertices)
        out_off, out_tgt = _csr_from_pairs(src, dst, n_vertices)
        in_off, in_tgt = _csr_from_pairs(dst, src, n_vertices)
        return cls(n_vertices=n_vertices, n_edges=int(src.size),
                   out_offsets=out_off, out_targets=out_tgt,
                   in_offsets=in_off, in_targets=in_tgt,
                   vertex_id_map=vertex_id_map)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], n_vertices: int | None = None) -> "Graph":
        """Build from (u, v) pairs; duplicates collapse, self-loops stay."""
        pairs = list(edges)
        if pairs:
            src = np.array([u for u, _ in pairs], dtype=np.int64)
            dst = np.array([v for _, v in pairs], dtype=np.int64)
        else:
            src = dst = np.empty(0, dtype=np.int64)
        if n_vertices is None:
            n_vertices = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1)
        return cls.from_pair_arrays(src, dst, n_vertices)

    # -- queries ------------------------------------------------------------

    def out_neighbors(self, v: int) -> np.ndarray:
        return self.out_targets[self.out_offsets[v]:self.out_offsets[v + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.in_targets[self.in_offsets[v]:self.in_offsets[v + 1]]

    @property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_offsets)

    @property
    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_offsets)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All directed edges as (src, dst) arrays in sorted order."""
        src = np.repeat(np.arange(self.n_vertices, dtype=np.int64), self.out_degrees)
        return src, self.out_targets

    def undirected_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR over the symmetrized edge set, built once and cached."""
        if self._und is None:
            src, dst = self.edge_arrays()
            u = np.concatenate([src, dst])
            w = np.concatenate([dst, src])
            if self.n_vertices > 0:
                u, w = _dedup_pairs(u, w, self.n_vertices)
            self._und = _csr_from_pairs(u, w, self.n_vertices)
        return self._und

    def validate(self) -> None:
        """Check CSR invariants; raises DomainError on violation."""
        for off, tgt in ((self.out_offsets, self.out_targets), (self.in_offsets, self.in_targets)):
            if off[0] != 0 or off[-1] != len(tgt) or len(off) != self.n_vertices + 1:
                raise DomainError("inconsistent CSR offsets")
            if len(tgt) != self.n_edges:
                raise DomainError("edge count mismatch")
            for v in range(self.n_vertices):
                nb = tgt[off[v]:off[v + 1]]
                if nb.size > 1 and not (np.diff(nb) > 0).all():
                    raise DomainError(f"neighbor list of {v} not sorted/unique")
        src, dst = self.edge_arrays()
        rev_src = np.repeat(np.arange(self.n_vertices, dtype=np.int64), self.in_degrees)
        fwd = set(zip(src.tolist(), dst.tolist()))
        rev = set(zip(self.in_targets.tolist(), rev_src.tolist()))
        if fwd != rev:
            raise DomainError("out- and in-adjacency disagree")


def load_edge_list(source: str | Path | IO, compact_ids: bool = False) -> Graph:
    """Parse a whitespace edge-list ("u v" per line, '#' starts a comment line).

    Duplicate edges collapse to one; self-loops are kept. Blank lines are
    ignored. When ids are non-contiguous, `compact_ids` remaps them to
    0..k-1 and records the original ids in `vertex_id_map`; without the
    flag, gaps raise DomainError so accidental sparsity is surfaced.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_edge_list(fh, compact_ids=compact_ids)

    us: list[int] = []
    vs: list[int] = []
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer vertex id in {line!r}") from None
        if u < 0 or v < 0:
            raise ParseError(f"line {lineno}: vertex ids must be unsigned, got {line!r}")
        us.append(u)
        vs.append(v)

    src = np.array(us, dtype=np.int64)
    dst = np.array(vs, dtype=np.int64)
    vertex_id_map = None
    if src.size == 0:
        return Graph.from_pair_arrays(src, dst, 0)

    ids = np.unique(np.concatenate([src, dst]))
    if compact_ids:
        src = np.searchsorted(ids, src)
        dst = np.searchsorted(ids, dst)
        vertex_id_map = {int(orig): i for i, orig in enumerate(ids)}
        n = int(ids.size)
    else:
        n = int(ids[-1] + 1)
        if ids.size != n:
            raise DomainError(
                f"vertex ids are non-contiguous ({ids.size} ids, max {n - 1}); "
                "pass compact_ids=True to remap")
    return Graph.from_pair_arrays(src, dst, n, vertex_id_map=vertex_id_map)


def khop_halo(g: Graph, inner: Iterable[int], hops: int) -> set[int]:
    """Vertices outside `inner` within `hops` undirected steps of it."""
    if hops < 1:
        raise DomainError(f"hops must be >= 1, got {hops}")
    inner_arr = np.unique(np.fromiter(inner, dtype=np.int64))
    if inner_arr.size == 0:
        raise DomainError("inner set is empty")
    if inner_arr[0] < 0 or inner_arr[-1] >= g.n_vertices:
        raise DomainError("inner set contains out-of-range vertex ids")

    offsets, targets = g.undirected_csr()
    visited = np.zeros(g.n_vertices, dtype=bool)
    visited[inner_arr] = True
    frontier = inner_arr
    for _ in range(hops):
        nbrs = _gather(offsets, targets, frontier)
        if nbrs.size == 0:
            break
        nbrs = np.unique(nbrs)
        new = nbrs[~visited[nbrs]]
        if new.size == 0:
            break
        visited[new] = True
        frontier = new
    visited[inner_arr] = False
    return set(np.flatnonzero(visited).tolist())


@dataclass(eq=False)
class PartitionSet:
    """P disjoint inner-vertex sets plus per-partition k-hop halo sets.

    `overlap_count[v]` is the number of partitions whose halo set holds v
    (0 for vertices in no halo). `cut_edges[i]` counts directed edges with
    exactly one endpoint inner to partition i; `all_edges[i]` counts edges
    with both endpoints in inner[i] | halo[i]. `graph` is a runtime back
    reference used to recompute stats after halo pruning; it is not part
    of the serialized form and may be None for imported sets.
    """

    n_vertices: int
    P: int
    inner: list[np.ndarray]
    halo: list[np.ndarray]
    hops: int
    overlap_count: np.ndarray
    cut_edges: list[int]
    all_edges: list[int]
    graph: Graph | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        merged = np.concatenate(self.inner) if self.inner else np.empty(0, np.int64)
        if merged.size != self.n_vertices or np.unique(merged).size != self.n_vertices:
            raise DomainError("inner sets must partition the vertex set")
        counts = np.zeros(self.n_vertices, dtype=np.int64)
        for i in range(self.P):
            if np.intersect1d(self.inner[i], self.halo[i]).size:
                raise DomainError(f"halo of partition {i} intersects its inner set")
            counts[self.halo[i]] += 1
        if not np.array_equal(counts, self.overlap_count):
            raise DomainError("overlap_count inconsistent with halo sets")

    @property
    def inner_sizes(self) -> list[int]:
        return [int(a.size) for a in self.inner]

    @property
    def halo_sizes(self) -> list[int]:
        return [int(a.size) for a in self.halo]

    def halo_union(self) -> np.ndarray:
        if not any(a.size for a in self.halo):
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(self.halo))


def _normalize_assignment(g: Graph, assignment) -> np.ndarray:
    if hasattr(assignment, "parts"):
        parts = np.asarray(assignment.parts, dtype=np.int64)
    elif isinstance(assignment, Mapping):
        parts = np.full(g.n_vertices, -1, dtype=np.int64)
        for v, p in assignment.items():
            if not 0 <= int(v) < g.n_vertices:
                raise DomainError(f"assignment names unknown vertex {v}")
            parts[int(v)] = int(p)
        if (parts < 0).any():
            raise DomainError("assignment does not cover every vertex")
    else:
        parts = np.asarray(assignment, dtype=np.int64)
    if parts.shape != (g.n_vertices,):
        raise DomainError(
            f"assignment covers {parts.size} vertices, graph has {g.n_vertices}")
    return parts


def build_partition_set(g: Graph, assignment, hops: int) -> PartitionSet:
    """Materialize halos, overlap counts, and edge stats for an assignment.

    `assignment` may be an Assignment, a vertex->partition mapping, or an
    array of partition ids indexed by vertex. Every partition id in
    0..P-1 must be used (an empty subgraph would starve a device).
    """
    parts = _normalize_assignment(g, assignment)
    if parts.min(initial=0) < 0:
        raise DomainError("negative partition id")
    P = int(parts.max(initial=-1) + 1)
    used = np.unique(parts)
    if used.size != P:
        missing = sorted(set(range(P)) - set(used.tolist()))
        raise DomainError(f"partition ids {missing} are unused")

    inner = [np.flatnonzero(parts == i).astype(np.int64) for i in range(P)]
    halo = [np.array(sorted(khop_halo(g, inner[i], hops)), dtype=np.int64)
            for i in range(P)]

    overlap = np.zeros(g.n_vertices, dtype=np.int64)
    for h in halo:
        overlap[h] += 1

    src, dst = g.edge_arrays()
    pa, pb = parts[src], parts[dst]
    cut = [int(np.count_nonzero((pa == i) ^ (pb == i))) for i in range(P)]

    all_edges = []
    for i in range(P):
        mask = np.zeros(g.n_vertices, dtype=bool)
        mask[inner[i]] = True
        mask[halo[i]] = True
        all_edges.append(int(np.count_nonzero(mask[src] & mask[dst])))

    return PartitionSet(n_vertices=g.n_vertices, P=P, inner=inner, halo=halo,
                        hops=hops, overlap_count=overlap, cut_edges=cut,
                        all_edges=all_edges, graph=g)


@dataclass
class HaloReport:
    """Per-partition halo ratios plus the aggregate overlap picture.

    Both the summed and the per-partition-maximum halo counts are reported,
    so either aggregate reading of "how many halos" can be reproduced.
    """

    partitions: list[int]
    inner_counts: list[int]
    halo_counts: list[int]
    ratios: list[float]
    cut_edges: list[int]
    all_edges: list[int]
    total_distinct_halo: int
    total_overlapping: int
    overlap_histogram: dict[int, int]
    halo_sum: int
    halo_max: int
    ratio_mean: float
    ratio_max: float

    def to_json(self) -> str:
        data = {
            "partitions": [
                {"partition": p, "inner": i, "halo": h, "ratio": r,
                 "cut_edges": c, "all_edges": a}
                for p, i, h, r, c, a in zip(
                    self.partitions, self.inner_counts, self.halo_counts,
                    self.ratios, self.cut_edges, self.all_edges)
            ],
            "total_distinct_halo": self.total_distinct_halo,
            "total_overlapping": self.total_overlapping,
            "overlap_histogram": {str(k): v for k, v in sorted(self.overlap_histogram.items())},
            "halo_sum": self.halo_sum,
            "halo_max": self.halo_max,
            "ratio_mean": self.ratio_mean,
            "ratio_max": self.ratio_max,
        }
        return json.dumps(data, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["partition", "inner", "halo", "ratio", "cut_edges", "all_edges"])
        for row in zip(self.partitions, self.inner_counts, self.halo_counts,
                       self.ratios, self.cut_edges, self.all_edges):
            writer.writerow(list(row))
        return buf.getvalue()


def halo_stats(ps: PartitionSet) -> HaloReport:
    """Halo/inner ratios, distinct and overlapping halo totals, histogram."""
    inner_counts = ps.inner_sizes
    halo_counts = ps.halo_sizes
    ratios = [h / i for h, i in zip(halo_counts, inner_counts)]
    union = ps.halo_union()
    halo_overlaps = ps.overlap_count[union] if union.size else np.empty(0, np.int64)
    hist_vals, hist_counts = np.unique(halo_overlaps, return_counts=True)
    histogram = {int(k): int(c) for k, c in zip(hist_vals, hist_counts)}
    return HaloReport(
        partitions=list(range(ps.P)),
        inner_counts=inner_counts,
        halo_counts=halo_counts,
        ratios=ratios,
        cut_edges=list(ps.cut_edges),
        all_edges=list(ps.all_edges),
        total_distinct_halo=int(union.size),
        total_overlapping=int(np.count_nonzero(halo_overlaps >= 2)),
        overlap_histogram=histogram,
        halo_sum=int(sum(halo_counts)),
        halo_max=int(max(halo_counts, default=0)),
        ratio_mean=float(np.mean(ratios)) if ratios else 0.0,
        ratio_max=float(max(ratios, default=0.0)),
    )
