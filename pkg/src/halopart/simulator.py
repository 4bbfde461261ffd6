"""Deterministic epoch-level simulation of parallel full-batch training.

Each epoch every device resolves its partition's halo-feature demand through
the two-level cache (forward pass), runs its compute, and exchanges one
gradient payload per cut edge (backward pass, never cached). Communication
can hide behind computation up to a prefetch-controlled fraction; what
remains extends the epoch. There is no randomness anywhere in the loop —
identical inputs reproduce identical reports byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cache import CacheCapacities, CacheSystem, feature_bytes, uniform_capacities
from .devices import DeviceProfile, comp_cost, normalize
from .errors import DomainError
from .graph import Graph, PartitionSet
from .partitioner import RapaResult, influence_scores

_POLICIES = ("jaca", "fifo", "lru")


@dataclass(frozen=True)
class SimConfig:
    """Knobs for one simulated training run.

    staleness_bound: maximum epoch age served as a hit; negative means
    entries never expire. prefetch_depth: entries staged ahead of demand
    per epoch, controlling how much communication hides behind compute.
    unit_time: seconds per unit of relative cost (the cost model is
    relative; this constant gives reports a time axis).
    """

    epochs: int = 200
    alpha: float = 0.5
    staleness_bound: int = -1
    prefetch_depth: int = 0
    policy: str = "jaca"
    f_dim: tuple[int, ...] = (256, 256, 256)
    L: int = 3
    seed: int = 0
    unit_time: float = 1.0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise DomainError("epochs must be >= 1")
        if self.prefetch_depth < 0:
            raise DomainError("prefetch_depth must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("alpha must lie in [0, 1]")
        if self.policy not in _POLICIES:
            raise DomainError(f"unknown policy {self.policy!r}")
        if self.L != len(self.f_dim):
            raise DomainError(f"L={self.L} but f_dim has {len(self.f_dim)} entries")
        if self.unit_time <= 0:
            raise DomainError("unit_time must be positive")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "alpha": self.alpha,
                "staleness_bound": self.staleness_bound,
                "prefetch_depth": self.prefetch_depth, "policy": self.policy,
                "f_dim": list(self.f_dim), "L": self.L, "seed": self.seed,
                "unit_time": self.unit_time}


@dataclass(frozen=True)
class EpochDeviceRecord:
    epoch: int
    device: int
    fwd_bytes: int
    bwd_bytes: int
    local_hits: int
    global_hits: int
    misses: int
    compute_time: float
    comm_time: float
    residual_comm_time: float
    device_time: float


@dataclass
class SimReport:
    """Per-epoch, per-device measurements plus run-level aggregates."""

    config: dict
    sigma: tuple[int, ...]
    records: list[EpochDeviceRecord]
    epoch_makespans: list[float]
    total_time: float
    total_fwd_bytes: int
    total_bwd_bytes: int
    hit_rate_local: float
    hit_rate_global: float
    trace_csv: str | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> str:
        by_epoch: dict[int, list[EpochDeviceRecord]] = {}
        for r in self.records:
            by_epoch.setdefault(r.epoch, []).append(r)
        doc = {
            "config": self.config,
            "sigma": list(self.sigma),
            "epochs": [
                {
                    "epoch": e,
                    "makespan": self.epoch_makespans[e - 1],
                    "devices": [
                        {"device": r.device, "fwd_bytes": r.fwd_bytes,
                         "bwd_bytes": r.bwd_bytes, "local_hits": r.local_hits,
                         "global_hits": r.global_hits, "misses": r.misses,
                         "compute_time": r.compute_time,
                         "comm_time": r.comm_time,
                         "residual_comm_time": r.residual_comm_time,
                         "device_time": r.device_time}
                        for r in recs
                    ],
                }
                for e, recs in sorted(by_epoch.items())
            ],
            "totals": {
                "total_time": self.total_time,
                "total_fwd_bytes": self.total_fwd_bytes,
                "total_bwd_bytes": self.total_bwd_bytes,
                "hit_rate_local": self.hit_rate_local,
                "hit_rate_global": self.hit_rate_global,
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "device", "fwd_bytes", "bwd_bytes",
                         "local_hits", "global_hits", "misses", "compute_time",
                         "comm_time", "residual_comm_time", "device_time",
                         "epoch_makespan"])
        for r in self.records:
            writer.writerow([r.epoch, r.device, r.fwd_bytes, r.bwd_bytes,
                             r.local_hits, r.global_hits, r.misses,
                             r.compute_time, r.comm_time, r.residual_comm_time,
                             r.device_time, self.epoch_makespans[r.epoch - 1]])
        return buf.getvalue()


def _resolve(part: RapaResult | PartitionSet) -> tuple[PartitionSet, tuple[int, ...]]:
    if isinstance(part, RapaResult):
        return part.partitions, part.sigma
    if isinstance(part, PartitionSet):
        return part, tuple(range(part.P))
    raise DomainError(f"expected RapaResult or PartitionSet, got {type(part).__name__}")


def run(g: Graph, part: RapaResult | PartitionSet, profiles: Sequence[DeviceProfile],
        caps: CacheCapacities, cfg: SimConfig, record_trace: bool = False) -> SimReport:
    """Simulate cfg.epochs training epochs and report times and volumes.

    Device slot i runs partition i through the device named by sigma[i]
    (identity when `part` is a bare PartitionSet). Caches are warmed once
    before epoch 1 with influence-ranked halo lists (versions 0). Per-device
    halo demand is walked in ascending vertex id, with accesses interleaved
    round-robin across devices so the shared global level sees a fixed,
    reproducible order. Every miss moves one feature payload and pays the
    mixed transfer cost; hits are free. Backward traffic is one payload per
    cut edge, uncached. comm hides behind compute up to
    min(1, prefetch_depth/|halo|) of the smaller of the two.
    """
    ps, sigma = _resolve(part)
    P = ps.P
    np_ = normalize(profiles)
    if len(caps.c_gpu) != P:
        raise DomainError(f"capacities cover {len(caps.c_gpu)} devices, partition has {P}")
    if any(d >= np_.n_devices for d in sigma):
        raise DomainError("sigma names a device outside the profile list")
    bpe = feature_bytes(cfg.f_dim)
    if bpe != caps.bytes_per_entry:
        raise DomainError(
            f"capacities sized for {caps.bytes_per_entry} B entries, config implies {bpe} B")

    table = influence_scores(g, ps)
    ranked = []
    for i in range(P):
        h = ps.halo[i]
        scores = table.scores_for(h)
        ranked.append(h[np.lexsort((h, -scores))].tolist())
    importance = {int(v): float(s) for v, s in zip(table.vertices, table.score)}

    cs = CacheSystem(cfg.policy, caps, importance=importance,
                     record_trace=record_trace)
    cs.warm(ranked)

    halo_order = [h.tolist() for h in ps.halo]  # ascending id
    mix = [np_.comm_mix(sigma[i], P) for i in range(P)]
    compute = [comp_cost(ps.all_edges[i], ps.inner_sizes[i], np_, sigma[i],
                         cfg.alpha) * cfg.unit_time for i in range(P)]

    records: list[EpochDeviceRecord] = []
    makespans: list[float] = []
    prev_misses = [0] * P
    for epoch in range(1, cfg.epochs + 1):
        lh = [0] * P
        gh = [0] * P
        miss = [0] * P
        pos = [0] * P
        pending = sum(len(h) for h in halo_order)
        while pending:
            for i in range(P):
                if pos[i] >= len(halo_order[i]):
                    continue
                outcome = cs.lookup(i, halo_order[i][pos[i]], epoch,
                                    cfg.staleness_bound)
                pos[i] += 1
                pending -= 1
                if outcome == "local_hit":
                    lh[i] += 1
                elif outcome == "global_hit":
                    gh[i] += 1
                else:
                    miss[i] += 1
        cs.check_conservation()
        for i in range(P):
            if cs.misses[i] - prev_misses[i] != miss[i]:
                raise DomainError("per-epoch miss accounting diverged from cache counters")
            prev_misses[i] = cs.misses[i]

        device_times = []
        for i in range(P):
            fwd = miss[i] * bpe
            bwd = ps.cut_edges[i] * bpe
            comm = (miss[i] + ps.cut_edges[i]) * mix[i] * cfg.unit_time
            overlap = min(1.0, cfg.prefetch_depth / max(1, len(halo_order[i])))
            residual = comm - min(comm, compute[i]) * overlap
            dt = compute[i] + residual
            device_times.append(dt)
            records.append(EpochDeviceRecord(
                epoch=epoch, device=i, fwd_bytes=fwd, bwd_bytes=bwd,
                local_hits=lh[i], global_hits=gh[i], misses=miss[i],
                compute_time=compute[i], comm_time=comm,
                residual_comm_time=residual, device_time=dt))
        makespans.append(max(device_times))

    total_fwd = sum(r.fwd_bytes for r in records)
    total_bwd = sum(r.bwd_bytes for r in records)
    return SimReport(
        config=cfg.to_dict(), sigma=sigma, records=records,
        epoch_makespans=makespans, total_time=sum(makespans),
        total_fwd_bytes=total_fwd, total_bwd_bytes=total_bwd,
        hit_rate_local=cs.hit_rate_local(),
        hit_rate_global=cs.hit_rate_global(),
        trace_csv=cs.write_trace_csv() if record_trace else None)


def sweep_capacity(g: Graph, part: RapaResult | PartitionSet,
                   profiles: Sequence[DeviceProfile], cfg: SimConfig,
                   capacities: Sequence[int]) -> list[SimReport]:
    """Run once per capacity, both levels set to the capacity (demand-capped)."""
    if not capacities:
        raise DomainError("need at least one capacity")
    ps, _ = _resolve(part)
    return [run(g, part, profiles, uniform_capacities(ps, int(c), cfg.f_dim), cfg)
            for c in capacities]


@dataclass(frozen=True)
class ComparisonRow:
    policy: str
    capacity: int
    hit_rate_local: float
    hit_rate_global: float
    fwd_bytes: int
    bwd_bytes: int
    makespan: float


@dataclass
class ComparisonTable:
    """Policy x capacity grid; `makespan` is the run's total simulated time."""

    rows: list[ComparisonRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["policy", "capacity", "hit_rate_local",
                         "hit_rate_global", "fwd_bytes", "bwd_bytes",
                         "makespan"])
        for r in self.rows:
            writer.writerow([r.policy, r.capacity, r.hit_rate_local,
                             r.hit_rate_global, r.fwd_bytes, r.bwd_bytes,
                             r.makespan])
        return buf.getvalue()


def compare_policies(g: Graph, part: RapaResult | PartitionSet,
                     profiles: Sequence[DeviceProfile], cfg: SimConfig,
                     policies: Sequence[str] = _POLICIES,
                     capacities: Sequence[int] = (0,)) -> ComparisonTable:
    """Replay the identical workload under each policy and capacity."""
    ps, _ = _resolve(part)
    rows = []
    for policy in policies:
        pcfg = SimConfig(epochs=cfg.epochs, alpha=cfg.alpha,
                         staleness_bound=cfg.staleness_bound,
                         prefetch_depth=cfg.prefetch_depth, policy=policy,
                         f_dim=cfg.f_dim, L=cfg.L, seed=cfg.seed,
                         unit_time=cfg.unit_time)
        for c in capacities:
            rep = run(g, part, profiles,
                      uniform_capacities(ps, int(c), cfg.f_dim), pcfg)
            rows.append(ComparisonRow(
                policy=policy, capacity=int(c),
                hit_rate_local=rep.hit_rate_local,
                hit_rate_global=rep.hit_rate_global,
                fwd_bytes=rep.total_fwd_bytes, bwd_bytes=rep.total_bwd_bytes,
                makespan=rep.total_time))
    return ComparisonTable(rows=rows)
