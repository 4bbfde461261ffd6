"""Initial partitioning, halo-influence scoring, and resource-aware refinement.

The refinement stage takes a fixed inner-vertex partition and adapts it to a
heterogeneous device fleet two ways: it permutes the subgraph-to-device
mapping to minimize the bottleneck-plus-imbalance objective, then trims
low-influence halo vertices until the imbalance bound and per-device memory
budgets hold (or no halo is left to trim, reported as infeasible).
Inner vertices never migrate; only the mapping and the halo sets change.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .devices import (CostBreakdown, DeviceProfile, MemModel, NormalizedProfiles,
                      comm_cost, comp_cost, memory_requirement, normalize)
from .errors import DomainError, ParseError
from .graph import Graph, PartitionSet

_METHODS = ("random", "greedy_multilevel", "imported")


@dataclass(frozen=True)
class Assignment:
    """Total vertex -> partition map with the method that produced it."""

    parts: np.ndarray
    method: str

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        parts = np.asarray(self.parts, dtype=np.int64)
        object.__setattr__(self, "parts", parts)
        if parts.ndim != 1 or parts.size == 0:
            raise DomainError("parts must be a nonempty 1-d array")
        used = np.unique(parts)
        if used[0] != 0 or used[-1] != used.size - 1:
            raise DomainError("partition ids must be contiguous from 0 and all used")

    @property
    def P(self) -> int:
        return int(self.parts.max()) + 1


def _load_assignment_text(source: str | Path | IO, n_vertices: int) -> np.ndarray:
    """Parse "vertex_id partition_id" lines into a vertex-indexed array."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return _load_assignment_text(fh, n_vertices)
    parts = np.full(n_vertices, -1, dtype=np.int64)
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"line {lineno}: expected 'vertex partition', got {line!r}")
        try:
            v, p = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer field in {line!r}") from None
        if not 0 <= v < n_vertices:
            raise DomainError(f"line {lineno}: vertex {v} outside graph")
        if p < 0:
            raise DomainError(f"line {lineno}: negative partition id")
        if parts[v] >= 0:
            raise DomainError(f"line {lineno}: vertex {v} assigned twice")
        parts[v] = p
    if (parts < 0).any():
        missing = int(np.flatnonzero(parts < 0)[0])
        raise DomainError(f"assignment file does not cover vertex {missing}")
    return parts


# --------------------------------------------------------------------------
# greedy multilevel pre-partitioner (coarsen -> grow -> refine)


def _sym_csr(n: int, eu: np.ndarray, ev: np.ndarray, ew: np.ndarray):
    su = np.concatenate([eu, ev])
    sv = np.concatenate([ev, eu])
    sw = np.concatenate([ew, ew])
    order = np.lexsort((sv, su))
    su, sv, sw = su[order], sv[order], sw[order]
    counts = np.bincount(su, minlength=n)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return offsets, sv, sw


def _coarsen_once(n, eu, ev, ew, vw, cap):
    """One pass of heavy-edge matching; returns label map and coarse arrays."""
    off, nbr, wts = _sym_csr(n, eu, ev, ew)
    match = np.full(n, -1, dtype=np.int64)
    for u in range(n):
        if match[u] >= 0:
            continue
        best, best_w = -1, 0.0
        for idx in range(off[u], off[u + 1]):
            v = int(nbr[idx])
            if v == u or match[v] >= 0:
                continue
            if vw[u] + vw[v] > cap:
                continue
            w = wts[idx]
            if w > best_w or (w == best_w and (best == -1 or v < best)):
                best, best_w = v, w
        if best >= 0:
            match[u] = best
            match[best] = u

    label = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for u in range(n):
        if label[u] >= 0:
            continue
        label[u] = nxt
        if match[u] > u:
            label[match[u]] = nxt
        nxt += 1
    cvw = np.bincount(label, weights=vw, minlength=nxt).astype(np.int64)

    cu, cv = label[eu], label[ev]
    keep = cu != cv
    cu, cv, cw = cu[keep], cv[keep], ew[keep]
    lo, hi = np.minimum(cu, cv), np.maximum(cu, cv)
    if lo.size:
        codes = lo * nxt + hi
        uniq, inv = np.unique(codes, return_inverse=True)
        agg = np.bincount(inv, weights=cw)
        cu, cv, cw = uniq // nxt, uniq % nxt, agg
    else:
        cu = cv = np.empty(0, dtype=np.int64)
        cw = np.empty(0)
    return label, nxt, cu, cv, cw, cvw


def _grow_partitions(n, eu, ev, ew, vw, P) -> np.ndarray:
    """Greedy frontier growth with adaptive per-partition weight targets."""
    off, nbr, wts = _sym_csr(n, eu, ev, ew)
    parts = np.full(n, -1, dtype=np.int64)
    unassigned = n
    remaining_w = float(vw.sum())

    for i in range(P - 1):
        target = remaining_w / (P - i)
        conn: dict[int, float] = {}
        heap: list[tuple[float, int]] = []
        weight = 0.0
        while weight < target and unassigned > (P - 1 - i):
            v = -1
            while heap:
                negw, cand = heapq.heappop(heap)
                if parts[cand] < 0 and conn.get(cand) == -negw:
                    v = cand
                    break
            if v < 0:
                v = int(np.flatnonzero(parts < 0)[0])  # disconnected: jump
            parts[v] = i
            conn.pop(v, None)
            weight += float(vw[v])
            unassigned -= 1
            for idx in range(off[v], off[v + 1]):
                u = int(nbr[idx])
                if parts[u] < 0:
                    conn[u] = conn.get(u, 0.0) + float(wts[idx])
                    heapq.heappush(heap, (-conn[u], u))
        remaining_w -= weight
    parts[parts < 0] = P - 1
    return parts


def _refine(n, eu, ev, ew, vw, parts, P, passes=3) -> None:
    """Boundary moves that cut edge weight while keeping sizes near n/P."""
    off, nbr, wts = _sym_csr(n, eu, ev, ew)
    pw = np.bincount(parts, weights=vw, minlength=P)
    ideal = float(vw.sum()) / P
    lo, hi = 0.9 * ideal, 1.1 * ideal
    counts = np.bincount(parts, minlength=P)
    for _ in range(passes):
        moved = 0
        for v in range(n):
            a = int(parts[v])
            if counts[a] <= 1:
                continue
            gain_to: dict[int, float] = {}
            for idx in range(off[v], off[v + 1]):
                gain_to[int(parts[nbr[idx]])] = (
                    gain_to.get(int(parts[nbr[idx]]), 0.0) + float(wts[idx]))
            own = gain_to.pop(a, 0.0)
            if not gain_to:
                continue
            b = min(gain_to, key=lambda p: (-gain_to[p], p))
            if gain_to[b] <= own:
                continue
            if pw[a] - vw[v] < lo or pw[b] + vw[v] > hi:
                continue
            parts[v] = b
            pw[a] -= vw[v]
            pw[b] += vw[v]
            counts[a] -= 1
            counts[b] += 1
            moved += 1
        if moved == 0:
            break


def _greedy_multilevel(g: Graph, P: int) -> np.ndarray:
    n = g.n_vertices
    src, dst = g.edge_arrays()
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    keep = lo != hi  # self-loops carry no cut information
    if keep.sum():
        codes = np.unique(lo[keep] * n + hi[keep])
        eu, ev = codes // n, codes % n
    else:
        eu = ev = np.empty(0, dtype=np.int64)
    ew = np.ones(eu.size)
    vw = np.ones(n, dtype=np.int64)

    cap = max(1, math.ceil(n / (16 * P)))
    coarse_stop = max(64, 16 * P)
    levels = []
    cn = n
    while cn > coarse_stop:
        label, nxt, eu2, ev2, ew2, vw2 = _coarsen_once(cn, eu, ev, ew, vw, cap)
        if nxt >= cn:  # matching made no progress
            break
        levels.append((label, cn, eu, ev, ew, vw))
        cn, eu, ev, ew, vw = nxt, eu2, ev2, ew2, vw2

    parts = _grow_partitions(cn, eu, ev, ew, vw, P)
    _refine(cn, eu, ev, ew, vw, parts, P)
    for label, fn, feu, fev, few, fvw in reversed(levels):
        parts = parts[label]
        _refine(fn, feu, fev, few, fvw, parts, P)
    return parts


def prepartition(g: Graph, P: int, method: str = "random", seed: int = 0,
                 source: str | Path | IO | None = None) -> Assignment:
    """Produce a balanced initial partition of the inner vertices.

    `random` shuffles vertices with the seed and deals them out so sizes
    differ by at most one. `greedy_multilevel` coarsens by heavy-edge
    matching, grows P parts greedily on the coarse graph, and refines on
    the way back up (sizes within 10% of n/P at reasonable scale; it takes
    no randomness from the seed). `imported` reads "vertex partition"
    lines from `source`, accepting external tools' output.
    """
    if method not in _METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {_METHODS}")
    if not 1 <= P <= g.n_vertices:
        raise DomainError(f"P must lie in 1..{g.n_vertices}, got {P}")

    if method == "random":
        rng = np.random.default_rng(seed)
        order = rng.permutation(g.n_vertices)
        parts = np.empty(g.n_vertices, dtype=np.int64)
        base, extra = divmod(g.n_vertices, P)
        start = 0
        for i in range(P):
            size = base + (1 if i < extra else 0)
            parts[order[start:start + size]] = i
            start += size
    elif method == "greedy_multilevel":
        parts = _greedy_multilevel(g, P)
    else:
        if source is None:
            raise DomainError("method 'imported' requires a source file")
        parts = _load_assignment_text(source, g.n_vertices)
        used = np.unique(parts)
        if used.size != P or used[-1] != P - 1:
            raise DomainError(
                f"imported file uses partition ids {used.tolist()}, expected 0..{P - 1}")
    return Assignment(parts=parts, method=method)


# --------------------------------------------------------------------------
# influence scores


@dataclass(frozen=True)
class InfluenceTable:
    """Influence scores for every vertex that appears in some halo set.

    score = (out_term + in_term) * overlap, where the out term sums
    1/sqrt(D_j_in * D_v_out) over out-neighbors j and the in term sums
    1/sqrt(D_j_out * D_v_in) over in-neighbors j. Vertices outside every
    halo have overlap 0 and hence score 0; `score_of` returns that without
    storing them.
    """

    vertices: np.ndarray
    out_term: np.ndarray
    in_term: np.ndarray
    overlap: np.ndarray
    score: np.ndarray

    def score_of(self, v: int) -> float:
        idx = np.searchsorted(self.vertices, v)
        if idx < self.vertices.size and self.vertices[idx] == v:
            return float(self.score[idx])
        return 0.0

    def scores_for(self, vertices: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.vertices, vertices)
        if idx.size and (idx >= self.vertices.size).any():
            raise DomainError("vertex outside the scored halo union")
        if idx.size and not np.array_equal(self.vertices[idx], vertices):
            raise DomainError("vertex outside the scored halo union")
        return self.score[idx]


def influence_scores(g: Graph, ps: PartitionSet) -> InfluenceTable:
    """Degree- and overlap-aware importance of each halo vertex.

    A halo vertex matters more when it feeds many partitions (overlap) and
    when its edges connect low-degree endpoints (each such edge carries a
    larger normalized share of the aggregation).
    """
    src, dst = g.edge_arrays()
    out_deg = g.out_degrees.astype(np.float64)
    in_deg = g.in_degrees.astype(np.float64)
    denom = out_deg[src] * in_deg[dst]
    with np.errstate(divide="ignore", invalid="ignore"):
        per_edge = np.where(denom > 0, 1.0 / np.sqrt(denom), 0.0)
    out_term_all = np.bincount(src, weights=per_edge, minlength=g.n_vertices)
    in_term_all = np.bincount(dst, weights=per_edge, minlength=g.n_vertices)

    verts = ps.halo_union()
    out_term = out_term_all[verts]
    in_term = in_term_all[verts]
    overlap = ps.overlap_count[verts].astype(np.float64)
    return InfluenceTable(vertices=verts, out_term=out_term, in_term=in_term,
                          overlap=overlap, score=(out_term + in_term) * overlap)


def _prune_order(halo: np.ndarray, table: InfluenceTable) -> np.ndarray:
    """Halo ids sorted by (score ascending, id ascending)."""
    scores = table.scores_for(halo)
    return halo[np.lexsort((halo, scores))]


def _masked_edge_count(g: Graph, members: np.ndarray) -> int:
    mask = np.zeros(g.n_vertices, dtype=bool)
    mask[members] = True
    src, dst = g.edge_arrays()
    return int(np.count_nonzero(mask[src] & mask[dst]))


def prune_halo(ps: PartitionSet, partition: int, table: InfluenceTable,
               remove: int) -> PartitionSet:
    """Drop the `remove` least-influential halo vertices of one partition.

    Ties break toward the smaller vertex id. Inner sets are untouched, so
    cut_edges are unchanged; all_edges and overlap counts are recomputed.
    Requires the PartitionSet to carry its source graph.
    """
    if not 0 <= partition < ps.P:
        raise DomainError(f"partition {partition} out of range")
    halo = ps.halo[partition]
    if not 0 <= remove <= halo.size:
        raise DomainError(f"remove={remove} exceeds halo size {halo.size}")
    if ps.graph is None:
        raise DomainError("PartitionSet has no source graph; stats cannot be recomputed")

    victims = _prune_order(halo, table)[:remove]
    kept = np.setdiff1d(halo, victims)
    new_halo = [h.copy() for h in ps.halo]
    new_halo[partition] = kept
    overlap = ps.overlap_count.copy()
    overlap[victims] -= 1
    all_edges = list(ps.all_edges)
    all_edges[partition] = _masked_edge_count(
        ps.graph, np.concatenate([ps.inner[partition], kept]))
    return PartitionSet(n_vertices=ps.n_vertices, P=ps.P,
                        inner=[a.copy() for a in ps.inner], halo=new_halo,
                        hops=ps.hops, overlap_count=overlap,
                        cut_edges=list(ps.cut_edges), all_edges=all_edges,
                        graph=ps.graph)


# --------------------------------------------------------------------------
# resource-aware refinement


@dataclass
class RapaResult:
    """Outcome of the refinement: device mapping, pruned halos, final cost.

    `sigma[i]` is the device index running subgraph i. `feasible` is set
    only when both the imbalance bound and every memory budget hold at
    exit. `objective_history` records the objective at the identity
    mapping, after the mapping search, and after every pruned vertex.
    """

    sigma: tuple[int, ...]
    partitions: PartitionSet
    cost: CostBreakdown
    iterations: int
    feasible: bool
    epsilon: float
    objective_history: list[float] = field(default_factory=list)


def _evaluate(cut: Sequence[int], all_e: Sequence[int], inner: Sequence[int],
              alpha: float, np_: NormalizedProfiles,
              sigma: Sequence[int]) -> CostBreakdown:
    P = len(cut)
    comm = [comm_cost(cut[i], np_, sigma[i], P) for i in range(P)]
    comp = [comp_cost(all_e[i], inner[i], np_, sigma[i], alpha) for i in range(P)]
    return CostBreakdown.from_costs(comm, comp)


def _best_improvement_climb(cut, all_e, inner, alpha, np_, sigma):
    """Swap device pairs while the objective strictly drops.

    Each round evaluates every pairwise swap and applies the best strictly
    improving one (ties toward the lexicographically smallest pair), so the
    walk is deterministic and terminates: the objective strictly decreases
    and the mapping space is finite.
    """
    P = len(sigma)
    value = _evaluate(cut, all_e, inner, alpha, np_, sigma).value
    while True:
        best_pair, best_value = None, value
        for i in range(P):
            for j in range(i + 1, P):
                sigma[i], sigma[j] = sigma[j], sigma[i]
                v = _evaluate(cut, all_e, inner, alpha, np_, sigma).value
                sigma[i], sigma[j] = sigma[j], sigma[i]
                if v < best_value:
                    best_pair, best_value = (i, j), v
        if best_pair is None:
            return sigma, value
        i, j = best_pair
        sigma[i], sigma[j] = sigma[j], sigma[i]
        value = best_value


def rapa_refine(ps: PartitionSet, profiles: Sequence[DeviceProfile],
                alpha: float = 0.5, epsilon: float | None = None,
                mem_model: MemModel = MemModel(), f_dim: float = 256.0,
                max_iters: int = 100_000) -> RapaResult:
    """Map subgraphs onto devices, then trim halos to meet the constraints.

    Mapping search: subgraphs sorted by descending device-agnostic cost
    (all speed ratios set to 1) pair with devices sorted by ascending
    slowness, then pairwise swaps run until no swap improves; if that still
    ends above the identity mapping, identity is kept. Trimming: while the
    cost spread exceeds epsilon or a partition overruns its device memory,
    delete the single least-influential halo vertex of the worst partition
    (the lowest-index memory violator first, else the argmax-cost one) and
    re-evaluate. When epsilon is omitted it defaults to 5% of the mean
    per-partition cost at the chosen mapping.
    """
    P = ps.P
    if len(profiles) != P:
        raise DomainError(f"{P} partitions but {len(profiles)} device profiles")
    if epsilon is not None and epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if ps.graph is None:
        raise DomainError("PartitionSet has no source graph; refinement needs it")

    np_ = normalize(profiles)
    g = ps.graph
    cut = list(ps.cut_edges)
    all_e = list(ps.all_edges)
    inner = ps.inner_sizes

    identity = list(range(P))
    bd_identity = _evaluate(cut, all_e, inner, alpha, np_, identity)
    history = [bd_identity.value]

    # pair big subgraphs with fast devices, then polish by swapping
    mix1 = 2.0 * (1.0 - 1.0 / P) + 1.0 / P
    agnostic = [cut[i] * mix1 + alpha * all_e[i] + (1 - alpha) * inner[i]
                for i in range(P)]
    sub_order = sorted(range(P), key=lambda i: (-agnostic[i], i))
    dev_order = sorted(range(P), key=lambda d: (np_.slowness(d), d))
    greedy = [0] * P
    for s, d in zip(sub_order, dev_order):
        greedy[s] = d
    # two starts of opposite permutation parity: every swap flips parity, so
    # for P <= 3 (where each parity class is one swap away from the whole
    # other class) one of the climbs provably ends at the global optimum
    starts = [list(greedy)]
    if P >= 2:
        flipped = list(greedy)
        flipped[0], flipped[1] = flipped[1], flipped[0]
        starts.append(flipped)
    sigma, value = identity, bd_identity.value
    for start in starts:
        cand, cand_value = _best_improvement_climb(cut, all_e, inner, alpha,
                                                   np_, start)
        if cand_value < value:
            sigma, value = cand, cand_value
    history.append(value)

    bd = _evaluate(cut, all_e, inner, alpha, np_, sigma)
    if epsilon is None:
        mean_lam = sum(bd.lam) / P
        epsilon = 0.05 * mean_lam if mean_lam > 0 else 1e-12

    # incremental pruning state
    masks = []
    heaps = []
    halo_left = []
    table = influence_scores(g, ps)
    for i in range(P):
        m = np.zeros(ps.n_vertices, dtype=bool)
        m[ps.inner[i]] = True
        m[ps.halo[i]] = True
        masks.append(m)
        order = _prune_order(ps.halo[i], table)
        heaps.append(list(order[::-1]))  # pop() yields lowest (score, id) first
        halo_left.append(set(ps.halo[i].tolist()))
    v_count = [inner[i] + ps.halo[i].size for i in range(P)]
    budget = [np_.mem_gb[sigma[i]] * 1024.0 ** 3 for i in range(P)]

    def violators() -> list[int]:
        return [i for i in range(P)
                if memory_requirement(v_count[i], all_e[i], f_dim, mem_model)
                > budget[i]]

    iterations = 0
    feasible = False
    while True:
        over_mem = violators()
        if not over_mem and bd.std_lambda <= epsilon:
            feasible = True
            break
        if iterations >= max_iters:
            break
        if over_mem:
            candidates = [i for i in over_mem if halo_left[i]]
            if not candidates:
                break
            target = candidates[0]
        else:
            target = max(range(P), key=lambda i: (bd.lam[i], -i))
            if not halo_left[target]:
                break

        victim = int(heaps[target].pop())
        halo_left[target].discard(victim)
        m = masks[target]
        loss = int(m[g.out_neighbors(victim)].sum()) + int(m[g.in_neighbors(victim)].sum())
        out_nb = g.out_neighbors(victim)
        pos = np.searchsorted(out_nb, victim)
        if pos < out_nb.size and out_nb[pos] == victim:
            loss -= 1  # self-loop counted from both directions
        all_e[target] -= loss
        m[victim] = False
        v_count[target] -= 1
        iterations += 1
        bd = _evaluate(cut, all_e, inner, alpha, np_, sigma)
        history.append(bd.value)

    new_halo = [np.array(sorted(halo_left[i]), dtype=np.int64) for i in range(P)]
    overlap = np.zeros(ps.n_vertices, dtype=np.int64)
    for h in new_halo:
        overlap[h] += 1
    pruned = PartitionSet(n_vertices=ps.n_vertices, P=P,
                          inner=[a.copy() for a in ps.inner], halo=new_halo,
                          hops=ps.hops, overlap_count=overlap,
                          cut_edges=cut, all_edges=all_e, graph=g)
    return RapaResult(sigma=tuple(sigma), partitions=pruned, cost=bd,
                      iterations=iterations, feasible=feasible,
                      epsilon=float(epsilon), objective_history=history)


# --------------------------------------------------------------------------
# serialization


def export_assignment(result: RapaResult, ps: PartitionSet | None = None) -> bytes:
    """Canonical JSON for a refinement result; see import_rapa_result.

    The byte stream is stable: sorted keys, two-space indent, trailing
    newline, and it round-trips losslessly (export -> import -> export is
    byte-identical).
    """
    if ps is None:
        ps = result.partitions
    doc = {
        "n_vertices": ps.n_vertices,
        "hops": ps.hops,
        "sigma": list(result.sigma),
        "feasible": result.feasible,
        "iterations": result.iterations,
        "epsilon": result.epsilon,
        "objective_history": list(result.objective_history),
        "cost": {
            "comm": list(result.cost.comm),
            "comp": list(result.cost.comp),
            "lam": list(result.cost.lam),
            "lambda_max": result.cost.lambda_max,
            "std_lambda": result.cost.std_lambda,
            "value": result.cost.value,
        },
        "partitions": [
            {
                "partition": i,
                "device": result.sigma[i],
                "inner": ps.inner[i].tolist(),
                "halo": ps.halo[i].tolist(),
                "cut_edges": ps.cut_edges[i],
                "all_edges": ps.all_edges[i],
            }
            for i in range(ps.P)
        ],
    }
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def import_rapa_result(source: bytes | str | Path | IO) -> tuple[RapaResult, PartitionSet]:
    """Rebuild a RapaResult and its PartitionSet from exported JSON.

    The PartitionSet carries no graph back reference, so halo pruning on it
    is unavailable; simulation and reporting work as usual.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str):
        p = Path(source)
        text = p.read_text(encoding="utf-8") if p.exists() else source
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None

    try:
        P = len(doc["partitions"])
        inner = [np.array(p["inner"], dtype=np.int64) for p in doc["partitions"]]
        halo = [np.array(p["halo"], dtype=np.int64) for p in doc["partitions"]]
        cut = [int(p["cut_edges"]) for p in doc["partitions"]]
        all_e = [int(p["all_edges"]) for p in doc["partitions"]]
        overlap = np.zeros(int(doc["n_vertices"]), dtype=np.int64)
        for h in halo:
            overlap[h] += 1
        ps = PartitionSet(n_vertices=int(doc["n_vertices"]), P=P, inner=inner,
                          halo=halo, hops=int(doc["hops"]),
                          overlap_count=overlap, cut_edges=cut,
                          all_edges=all_e, graph=None)
        cost = CostBreakdown(comm=tuple(doc["cost"]["comm"]),
                             comp=tuple(doc["cost"]["comp"]),
                             lam=tuple(doc["cost"]["lam"]),
                             lambda_max=float(doc["cost"]["lambda_max"]),
                             std_lambda=float(doc["cost"]["std_lambda"]))
        result = RapaResult(sigma=tuple(int(s) for s in doc["sigma"]),
                            partitions=ps, cost=cost,
                            iterations=int(doc["iterations"]),
                            feasible=bool(doc["feasible"]),
                            epsilon=float(doc["epsilon"]),
                            objective_history=[float(x) for x in doc["objective_history"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed refinement document: {exc}") from None
    sig = sorted(result.sigma)
    if sig != list(range(P)):
        raise DomainError("sigma is not a permutation of the device indexes")
    return result, ps
