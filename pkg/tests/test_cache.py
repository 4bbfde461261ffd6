import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halopart import (CacheCapacities, CacheSystem, DomainError, Graph,
                      build_partition_set, compute_capacities, feature_bytes,
                      uniform_capacities)

RAW_1GIB_16B = 1024 ** 3 // 16  # entry budget of 1 GiB at 16 B per entry


def star_partition(halo_size=100):
    """Partition whose first part's halo has exactly `halo_size` vertices."""
    edges = [(0, v) for v in range(1, halo_size + 1)]
    g = Graph.from_edges(edges)
    parts = [0] + [1] * halo_size
    return build_partition_set(g, parts, hops=1)


def caps(c, n_devices=1, bpe=4):
    return CacheCapacities(c_cpu=c, c_gpu=(c,) * n_devices, bytes_per_entry=bpe)


# --------------------------------------------------------------------------
# capacity computation


def test_feature_bytes():
    assert feature_bytes([4]) == 16
    assert feature_bytes([256, 256, 16]) == 2112
    with pytest.raises(DomainError):
        feature_bytes([])
    with pytest.raises(DomainError):
        feature_bytes([256, 0])


def test_compute_capacities_caps_by_halo_demand():
    ps = star_partition(100)
    out = compute_capacities(ps, k=-1, mem_gpu=[1.0, 1.0], mem_gpu_res=0.0,
                             mem_cpu=1.0, mem_cpu_res=0.0, f_dim=[4], L=1)
    assert out.bytes_per_entry == 16
    assert out.c_gpu == (100, 1)
    assert out.c_cpu == 101
    assert RAW_1GIB_16B == 67_108_864  # the uncapped budget the min() saw


def test_compute_capacities_clamps_negative_budget(caplog):
    ps = star_partition(10)
    with caplog.at_level(logging.WARNING, logger="halopart.cache"):
        out = compute_capacities(ps, k=-1, mem_gpu=[1.0, 1.0],
                                 mem_gpu_res=2048.0, mem_cpu=1.0,
                                 mem_cpu_res=0.0, f_dim=[4], L=1)
    assert out.c_gpu == (0, 0)
    assert any("clamped" in r.message for r in caplog.records)


def test_compute_capacities_topk_ranks_by_overlap():
    # halos: p0={2,4}, p1={0,4}, p2={1,3}; vertex 4 sits in two halos.
    g = Graph.from_edges([(2, 0), (4, 1), (4, 3)])
    ps = build_partition_set(g, [0, 0, 1, 1, 2], hops=1)
    assert ps.overlap_count[4] == 2
    out = compute_capacities(ps, k=1, mem_gpu=[1.0] * 3, mem_gpu_res=0.0,
                             mem_cpu=1.0, mem_cpu_res=0.0, f_dim=[4], L=1)
    assert out.c_gpu == (1, 1, 1)
    # overlap-ranked top-1 picks vertex 4 for p0 and p1, so the union is
    # {1, 4}; an id-ranked pick would have yielded {0, 1, 2} instead
    assert out.c_cpu == 2


def test_compute_capacities_validates_arguments():
    ps = star_partition(4)
    with pytest.raises(DomainError, match="L"):
        compute_capacities(ps, -1, [1.0, 1.0], 0.0, 1.0, 0.0, [4], 0)
    with pytest.raises(DomainError, match="f_dim"):
        compute_capacities(ps, -1, [1.0, 1.0], 0.0, 1.0, 0.0, [4, 4], 1)
    with pytest.raises(DomainError, match="budgets"):
        compute_capacities(ps, -1, [1.0], 0.0, 1.0, 0.0, [4], 1)
    with pytest.raises(DomainError, match="k"):
        compute_capacities(ps, -2, [1.0, 1.0], 0.0, 1.0, 0.0, [4], 1)


def test_uniform_capacities_capped(path_partition):
    out = uniform_capacities(path_partition, 50, [4])
    assert out.c_gpu == (1, 1)
    assert out.c_cpu == 2
    zero = uniform_capacities(path_partition, 0, [4])
    assert zero.c_gpu == (0, 0) and zero.c_cpu == 0


def test_capacities_validate_and_serialize():
    with pytest.raises(DomainError):
        CacheCapacities(c_cpu=-1, c_gpu=(0,), bytes_per_entry=4)
    with pytest.raises(DomainError):
        CacheCapacities(c_cpu=0, c_gpu=(0,), bytes_per_entry=0)
    doc = json.loads(caps(3, 2).to_json())
    assert doc == {"c_cpu": 3, "c_gpu": [3, 3], "bytes_per_entry": 4}


# --------------------------------------------------------------------------
# replacement policies


def test_fifo_evicts_oldest():
    cs = CacheSystem("fifo", caps(2))
    assert cs.admit_evict("local", 0, 10) is None
    assert cs.admit_evict("local", 0, 11) is None
    assert cs.admit_evict("local", 0, 12) == 10
    assert set(cs.locals[0].entries) == {11, 12}


def test_lru_touch_changes_victim():
    cs = CacheSystem("lru", caps(2))
    cs.admit_evict("local", 0, 10)
    cs.admit_evict("local", 0, 11)
    cs.admit_evict("local", 0, 10)  # resident: refreshed, now most recent
    assert cs.admit_evict("local", 0, 12) == 11


def test_fifo_reinsert_keeps_age():
    cs = CacheSystem("fifo", caps(2))
    cs.admit_evict("local", 0, 10)
    cs.admit_evict("local", 0, 11)
    cs.admit_evict("local", 0, 10)  # refresh must not reset FIFO age
    assert cs.admit_evict("local", 0, 12) == 10


def test_jaca_rejects_low_importance():
    cs = CacheSystem("jaca", caps(2), importance={10: 3.0, 11: 2.0, 12: 1.0})
    cs.admit_evict("local", 0, 10)
    cs.admit_evict("local", 0, 11)
    assert cs.admit_evict("local", 0, 12) is None
    assert set(cs.locals[0].entries) == {10, 11}
    assert cs.locals[0].counters.rejections == 1


def test_jaca_admits_by_evicting_minimum():
    cs = CacheSystem("jaca", caps(2),
                     importance={10: 3.0, 11: 2.0, 13: 5.0, 14: 9.0})
    cs.admit_evict("local", 0, 10)
    cs.admit_evict("local", 0, 11)
    assert cs.admit_evict("local", 0, 13) == 11
    assert cs.admit_evict("local", 0, 14) == 10
    assert set(cs.locals[0].entries) == {13, 14}


def test_jaca_equal_importance_is_rejected():
    cs = CacheSystem("jaca", caps(1), importance={1: 2.0, 2: 2.0})
    cs.admit_evict("local", 0, 1)
    assert cs.admit_evict("local", 0, 2) is None  # ties do not displace


def test_unknown_policy_rejected():
    with pytest.raises(DomainError, match="policy"):
        CacheSystem("mru", caps(1))


# --------------------------------------------------------------------------
# lookups, staleness, two levels


def test_cold_start_misses():
    cs = CacheSystem("fifo", caps(4))
    assert cs.lookup(0, 7, epoch=1, staleness_bound=-1) == "miss"
    assert cs.lookup(0, 7, epoch=1, staleness_bound=-1) == "local_hit"
    cs.check_conservation()


def test_staleness_bound_window():
    cs = CacheSystem("fifo", caps(4))
    assert cs.lookup(0, 7, epoch=3, staleness_bound=1) == "miss"
    assert cs.lookup(0, 7, epoch=4, staleness_bound=1) == "local_hit"
    assert cs.lookup(0, 7, epoch=5, staleness_bound=1) == "miss"
    # the stale miss refreshed the entry in place: fresh again at epoch 5
    assert cs.lookup(0, 7, epoch=5, staleness_bound=1) == "local_hit"
    assert cs.locals[0].counters.refreshes >= 1


def test_staleness_zero_expires_across_epochs():
    cs = CacheSystem("lru", caps(4))
    cs.lookup(0, 7, epoch=1)
    assert cs.lookup(0, 7, epoch=1) == "local_hit"
    assert cs.lookup(0, 7, epoch=2) == "miss"


def test_zero_capacity_always_misses():
    cs = CacheSystem("lru", caps(0))
    for epoch in range(1, 4):
        assert cs.lookup(0, 9, epoch, staleness_bound=-1) == "miss"
    assert cs.occupancy() == {"global": 0, "local0": 0}
    cs.check_conservation()


def test_global_hit_copies_down_preserving_version():
    cs = CacheSystem("fifo", caps(2))
    cs.admit_evict("global", 0, 7, version=0)
    assert cs.lookup(0, 7, epoch=2, staleness_bound=-1) == "global_hit"
    assert cs.locals[0].entries[7].version == 0
    assert cs.lookup(0, 7, epoch=2, staleness_bound=-1) == "local_hit"


def test_miss_inserts_at_both_levels():
    cs = CacheSystem("fifo", caps(2))
    cs.lookup(0, 5, epoch=1, staleness_bound=-1)
    assert 5 in cs.locals[0].entries and 5 in cs.globl.entries


def test_lookup_validates_device():
    cs = CacheSystem("fifo", caps(1))
    with pytest.raises(DomainError):
        cs.lookup(3, 0, epoch=1)
    with pytest.raises(DomainError):
        cs.admit_evict("middle", 0, 0)


# --------------------------------------------------------------------------
# warm-up


def test_warm_respects_capacity_and_rank_order():
    cs = CacheSystem("fifo", CacheCapacities(c_cpu=3, c_gpu=(5,),
                                             bytes_per_entry=4))
    cs.warm([list(range(10))])
    assert set(cs.locals[0].entries) == {0, 1, 2, 3, 4}
    assert set(cs.globl.entries) == {0, 1, 2}
    assert all(e.version == 0 for e in cs.locals[0].entries.values())


def test_warm_zero_capacity_noop():
    cs = CacheSystem("jaca", caps(0), importance={})
    cs.warm([[1, 2, 3]])
    assert cs.occupancy() == {"global": 0, "local0": 0}


def test_warm_global_merge_interleaves_by_rank():
    cs = CacheSystem("fifo", CacheCapacities(c_cpu=3, c_gpu=(0, 0),
                                             bytes_per_entry=4))
    cs.warm([[1, 2, 9], [3, 1, 8]])
    # rank-position order: 1, 3 (pos 0), 2, 1(dup) (pos 1), 9 (pos 2) ...
    assert list(cs.globl.entries) == [1, 3, 2]


def test_warm_arity_checked():
    cs = CacheSystem("fifo", caps(1, n_devices=2))
    with pytest.raises(DomainError):
        cs.warm([[1]])


# --------------------------------------------------------------------------
# scan resistance (small instance)


def scan_epoch(cs, vertices, epoch):
    hits = sum(cs.lookup(0, v, epoch, staleness_bound=-1) == "local_hit"
               for v in vertices)
    return hits / len(vertices)


def test_scan_resistance_separates_policies():
    halo = list(range(10))
    importance = {v: float(10 - v) for v in halo}
    ranked = [sorted(halo, key=lambda v: (-importance[v], v))]

    jaca = CacheSystem("jaca", caps(5), importance).warm(ranked)
    for epoch in (1, 2, 3):
        assert scan_epoch(jaca, halo, epoch) == 0.5

    for policy in ("fifo", "lru"):
        cs = CacheSystem(policy, caps(5)).warm(ranked)
        assert scan_epoch(cs, halo, 1) == 0.5  # warm half still resident
        assert scan_epoch(cs, halo, 2) == 0.0  # cyclic thrash from then on
        assert scan_epoch(cs, halo, 3) == 0.0


def test_full_capacity_all_policies_hit():
    halo = list(range(10))
    for policy in ("jaca", "fifo", "lru"):
        cs = CacheSystem(policy, caps(10), {v: 1.0 for v in halo})
        cs.warm([halo])
        assert scan_epoch(cs, halo, 1) == 1.0
        assert scan_epoch(cs, halo, 2) == 1.0


# --------------------------------------------------------------------------
# bookkeeping properties


ops = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 15),
                         st.integers(1, 6)), max_size=120)


@pytest.mark.parametrize("policy", ["jaca", "fifo", "lru"])
@given(trace=ops, capacity=st.integers(0, 6), staleness=st.integers(-1, 2))
@settings(max_examples=40, deadline=None)
def test_occupancy_and_conservation(policy, trace, capacity, staleness):
    importance = {v: float((v * 7) % 5) for v in range(16)}
    cs = CacheSystem(policy, caps(capacity, n_devices=2), importance)
    for device, vertex, epoch in trace:
        cs.lookup(device, vertex, epoch, staleness)
        assert len(cs.globl.entries) <= capacity
        assert all(len(lvl.entries) <= capacity for lvl in cs.locals)
    cs.check_conservation()
    for lvl in [cs.globl, *cs.locals]:
        c = lvl.counters
        assert c.insertions - c.evictions == len(lvl.entries)


@pytest.mark.parametrize("policy", ["jaca", "fifo", "lru"])
@given(trace=ops)
@settings(max_examples=15, deadline=None)
def test_identical_traces_identical_counters(policy, trace):
    importance = {v: float(v % 3) for v in range(16)}

    def run():
        cs = CacheSystem(policy, caps(3, n_devices=2), importance)
        for device, vertex, epoch in trace:
            cs.lookup(device, vertex, epoch, staleness_bound=1)
        return (cs.lookups, cs.local_hits, cs.global_hits, cs.misses,
                cs.occupancy())

    assert run() == run()


# --------------------------------------------------------------------------
# trace dump


def test_trace_csv_layout():
    cs = CacheSystem("fifo", caps(2), record_trace=True)
    cs.lookup(0, 4, epoch=1, staleness_bound=-1)
    cs.lookup(0, 4, epoch=1, staleness_bound=-1)
    lines = cs.write_trace_csv().splitlines()
    assert lines[0] == "epoch,device,vertex,outcome,level"
    assert lines[1] == "1,0,4,miss,source"
    assert lines[2] == "1,0,4,hit,local"


def test_trace_requires_recording():
    cs = CacheSystem("fifo", caps(2))
    with pytest.raises(DomainError):
        cs.write_trace_csv()
