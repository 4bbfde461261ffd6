"""Adaptive cache sizing and a two-level (host + per-device) feature cache.

Entries are sized but content-free: the simulator only needs to know whether
a halo vertex's features were resident and fresh, never their values. Three
replacement policies share the structure: FIFO and LRU are the classic
baselines, while the importance-ranked policy admits a candidate into a full
level only when its score strictly exceeds the resident minimum — a full
cache of high-importance entries therefore rejects one-off scans instead of
being flushed by them.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import DomainError
from .graph import PartitionSet

log = logging.getLogger(__name__)

POLICIES = ("jaca", "fifo", "lru")

_MIB = 1024.0 * 1024.0


@dataclass(frozen=True)
class CacheCapacities:
    """Entry-count budgets for the global level and each device level."""

    c_cpu: int
    c_gpu: tuple[int, ...]
    bytes_per_entry: int

    def __post_init__(self) -> None:
        if self.c_cpu < 0 or any(c < 0 for c in self.c_gpu):
            raise DomainError("capacities must be >= 0")
        if self.bytes_per_entry <= 0:
            raise DomainError("bytes_per_entry must be positive")

    def to_json(self) -> str:
        doc = {"c_cpu": self.c_cpu, "c_gpu": list(self.c_gpu),
               "bytes_per_entry": self.bytes_per_entry}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def feature_bytes(f_dim: Sequence[int]) -> int:
    """Bytes of one vertex's features across all layers (float32)."""
    if not f_dim or any(int(d) < 1 for d in f_dim):
        raise DomainError("f_dim must be a nonempty list of positive widths")
    return sum(int(d) * 4 for d in f_dim)


def _entry_budget(mem_gib: float, reserved_mib: float, bpe: int, what: str) -> int:
    budget_bytes = (mem_gib * 1024.0 - reserved_mib) * _MIB
    if budget_bytes < 0:
        log.warning("%s: reserved %.0f MiB exceeds available %.0f MiB; capacity clamped to 0",
                    what, reserved_mib, mem_gib * 1024.0)
        return 0
    return int(budget_bytes // bpe)


def compute_capacities(ps: PartitionSet, k: int, mem_gpu: Sequence[float],
                       mem_gpu_res: float, mem_cpu: float, mem_cpu_res: float,
                       f_dim: Sequence[int], L: int) -> CacheCapacities:
    """Size both cache levels from memory budgets and halo demand.

    Per device i the halo vertices are ranked by overlap count (ties toward
    the smaller id) and the top k kept (k = -1 keeps all); the device-level
    capacity is the entry count its memory affords, capped by that demand.
    The host-level capacity is computed the same way against the union of
    the selected halos. Memory arrives as GiB with reserves in MiB; a
    reserve exceeding the budget clamps to zero with a logged warning.
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    if len(f_dim) != L:
        raise DomainError(f"f_dim has {len(f_dim)} entries, expected L={L}")
    if len(mem_gpu) != ps.P:
        raise DomainError(f"{len(mem_gpu)} device budgets for {ps.P} partitions")
    if k < -1:
        raise DomainError("k must be -1 (all) or >= 0")
    bpe = feature_bytes(f_dim)

    selected: list[np.ndarray] = []
    for i in range(ps.P):
        h = ps.halo[i]
        order = np.lexsort((h, -ps.overlap_count[h]))
        sel = h[order] if k == -1 else h[order][:k]
        selected.append(np.sort(sel))

    c_gpu = tuple(
        min(_entry_budget(mem_gpu[i], mem_gpu_res, bpe, f"device {i}"), sel.size)
        for i, sel in enumerate(selected))
    union = (np.unique(np.concatenate(selected))
             if any(s.size for s in selected) else np.empty(0, dtype=np.int64))
    c_cpu = min(_entry_budget(mem_cpu, mem_cpu_res, bpe, "host"), int(union.size))
    return CacheCapacities(c_cpu=c_cpu, c_gpu=c_gpu, bytes_per_entry=bpe)


def uniform_capacities(ps: PartitionSet, c: int, f_dim: Sequence[int]) -> CacheCapacities:
    """Capacity `c` at every level, capped by each level's halo demand."""
    if c < 0:
        raise DomainError("capacity must be >= 0")
    return CacheCapacities(
        c_cpu=min(c, int(ps.halo_union().size)),
        c_gpu=tuple(min(c, h.size) for h in ps.halo),
        bytes_per_entry=feature_bytes(f_dim))


# --------------------------------------------------------------------------


@dataclass
class Entry:
    size: int
    version: int


@dataclass
class LevelCounters:
    hits: int = 0
    misses: int = 0
    insertions: int = 0
    evictions: int = 0
    rejections: int = 0
    refreshes: int = 0


class _Level:
    """One cache level: an ordered entry dict plus policy bookkeeping.

    Dict order carries the policy state: insertion order for FIFO, recency
    order for LRU (touch = pop and reinsert). The importance policy keeps a
    lazy min-heap of (score, id); entries popped from the heap are checked
    against the store, so duplicates left behind by evictions are skipped.
    """

    def __init__(self, policy: str, capacity: int,
                 importance: Mapping[int, float] | None) -> None:
        self.policy = policy
        self.capacity = capacity
        self.importance = importance
        self.entries: dict[int, Entry] = {}
        self._heap: list[tuple[float, int]] = []
        self.counters = LevelCounters()

    def _score(self, vertex: int) -> float:
        if self.importance is None:
            return 0.0
        return float(self.importance.get(vertex, 0.0))

    def get(self, vertex: int) -> Entry | None:
        return self.entries.get(vertex)

    def touch(self, vertex: int) -> None:
        if self.policy == "lru" and vertex in self.entries:
            self.entries[vertex] = self.entries.pop(vertex)

    def refresh(self, vertex: int, version: int) -> None:
        self.entries[vertex].version = version
        self.counters.refreshes += 1
        self.touch(vertex)

    def _evict_min_importance(self) -> int | None:
        while self._heap:
            score, v = heapq.heappop(self._heap)
            if v in self.entries and self._score(v) == score:
                return v
        return None

    def insert(self, vertex: int, version: int, size: int) -> int | None:
        """Admit `vertex`, returning the evicted victim if there was one.

        Resident vertices are refreshed instead. Under the importance
        policy a full level rejects candidates that do not strictly beat
        the resident minimum score.
        """
        if vertex in self.entries:
            self.refresh(vertex, version)
            return None
        if self.capacity == 0:
            self.counters.rejections += 1
            return None

        victim: int | None = None
        if len(self.entries) >= self.capacity:
            if self.policy in ("fifo", "lru"):
                victim = next(iter(self.entries))
            else:
                cand = (self._score(vertex), vertex)
                # peek the current minimum without losing heap entries
                resident_min = None
                while self._heap:
                    score, v = self._heap[0]
                    if v in self.entries and self._score(v) == score:
                        resident_min = (score, v)
                        break
                    heapq.heappop(self._heap)
                if resident_min is None or cand[0] <= resident_min[0]:
                    self.counters.rejections += 1
                    return None
                victim = resident_min[1]
            del self.entries[victim]
            self.counters.evictions += 1

        self.entries[vertex] = Entry(size=size, version=version)
        self.counters.insertions += 1
        if self.policy == "jaca":
            heapq.heappush(self._heap, (self._score(vertex), vertex))
        return victim


def _fresh(entry: Entry, epoch: int, staleness_bound: int) -> bool:
    if staleness_bound < 0:  # negative bound: entries never expire
        return True
    return epoch - entry.version <= staleness_bound


class CacheSystem:
    """Global host cache above per-device local caches, one policy for both.

    A lookup tries the local level, falls back to the global level (copying
    the entry down on a hit, version preserved), and otherwise fetches from
    the source, inserting the fresh entry at both levels subject to the
    policy. Entries older than the staleness bound count as misses and are
    refreshed in place, keeping FIFO age while updating LRU recency.
    """

    def __init__(self, policy: str, caps: CacheCapacities,
                 importance: Mapping[int, float] | None = None,
                 record_trace: bool = False) -> None:
        if policy not in POLICIES:
            raise DomainError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        self.policy = policy
        self.caps = caps
        self.importance = importance
        self.locals = [_Level(policy, c, importance) for c in caps.c_gpu]
        self.globl = _Level(policy, caps.c_cpu, importance)
        n = len(caps.c_gpu)
        self.lookups = [0] * n
        self.local_hits = [0] * n
        self.global_hits = [0] * n
        self.misses = [0] * n
        self.trace: list[tuple[int, int, int, str, str]] | None = \
            [] if record_trace else None

    @property
    def n_devices(self) -> int:
        return len(self.locals)

    def _record(self, epoch: int, device: int, vertex: int,
                outcome: str, level: str) -> None:
        if self.trace is not None:
            self.trace.append((epoch, device, vertex, outcome, level))

    def lookup(self, device: int, vertex: int, epoch: int,
               staleness_bound: int = 0) -> str:
        """Resolve one halo-feature access; returns the outcome tag.

        Outcomes: "local_hit", "global_hit" (copied into the local level),
        or "miss" (fetched from source and inserted at both levels).
        """
        if not 0 <= device < self.n_devices:
            raise DomainError(f"device {device} out of range")
        self.lookups[device] += 1
        size = self.caps.bytes_per_entry
        loc = self.locals[device]

        le = loc.get(vertex)
        if le is not None and _fresh(le, epoch, staleness_bound):
            loc.touch(vertex)
            loc.counters.hits += 1
            self.local_hits[device] += 1
            self._record(epoch, device, vertex, "hit", "local")
            return "local_hit"
        loc.counters.misses += 1

        ge = self.globl.get(vertex)
        if ge is not None and _fresh(ge, epoch, staleness_bound):
            self.globl.counters.hits += 1
            self.globl.touch(vertex)
            if le is not None:
                loc.refresh(vertex, ge.version)
            else:
                loc.insert(vertex, ge.version, size)
            self.global_hits[device] += 1
            self._record(epoch, device, vertex, "hit", "global")
            return "global_hit"
        self.globl.counters.misses += 1

        self.misses[device] += 1
        if ge is not None:
            self.globl.refresh(vertex, epoch)
        else:
            self.globl.insert(vertex, epoch, size)
        if le is not None:
            loc.refresh(vertex, epoch)
        else:
            loc.insert(vertex, epoch, size)
        self._record(epoch, device, vertex, "miss", "source")
        return "miss"

    def admit_evict(self, level: str, device: int, vertex: int,
                    version: int = 0) -> int | None:
        """Insert at one level under the policy; returns the victim or None."""
        if level == "global":
            return self.globl.insert(vertex, version, self.caps.bytes_per_entry)
        if level == "local":
            if not 0 <= device < self.n_devices:
                raise DomainError(f"device {device} out of range")
            return self.locals[device].insert(vertex, version,
                                              self.caps.bytes_per_entry)
        raise DomainError(f"level must be 'local' or 'global', got {level!r}")

    def warm(self, ranked: Sequence[Sequence[int]]) -> "CacheSystem":
        """Pre-fill both levels from importance-ranked per-device halo lists.

        Device i receives the first c_gpu[i] entries of its list. The
        global level takes the head of the rank-position interleaving of
        all lists (position 0 of every device, then position 1, ...,
        duplicates dropped), so top-ranked vertices everywhere land first.
        All warmed versions are epoch 0.
        """
        if len(ranked) != self.n_devices:
            raise DomainError(f"{len(ranked)} ranked lists for {self.n_devices} devices")
        size = self.caps.bytes_per_entry
        for d, lst in enumerate(ranked):
            for v in list(lst)[: self.caps.c_gpu[d]]:
                self.locals[d].insert(int(v), 0, size)
        merged: list[int] = []
        seen: set[int] = set()
        for pos in range(max((len(lst) for lst in ranked), default=0)):
            for lst in ranked:
                if pos < len(lst) and int(lst[pos]) not in seen:
                    seen.add(int(lst[pos]))
                    merged.append(int(lst[pos]))
        for v in merged[: self.caps.c_cpu]:
            self.globl.insert(v, 0, size)
        return self

    # -- reporting ----------------------------------------------------------

    def occupancy(self) -> dict[str, int]:
        out = {"global": len(self.globl.entries)}
        for d, lvl in enumerate(self.locals):
            out[f"local{d}"] = len(lvl.entries)
        return out

    def hit_rate_local(self) -> float:
        total = sum(self.lookups)
        return sum(self.local_hits) / total if total else 0.0

    def hit_rate_global(self) -> float:
        total = sum(self.lookups)
        return sum(self.global_hits) / total if total else 0.0

    def check_conservation(self) -> None:
        for d in range(self.n_devices):
            if self.lookups[d] != (self.local_hits[d] + self.global_hits[d]
                                   + self.misses[d]):
                raise DomainError(f"counter conservation violated on device {d}")

    def write_trace_csv(self, sink: IO | None = None) -> str:
        """Dump the recorded trace as epoch,device,vertex,outcome,level rows."""
        if self.trace is None:
            raise DomainError("trace recording was not enabled")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "device", "vertex", "outcome", "level"])
        writer.writerows(self.trace)
        text = buf.getvalue()
        if sink is not None:
            sink.write(text)
        return text
