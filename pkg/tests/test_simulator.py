import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halopart import (DeviceProfile, DomainError, SimConfig,
                      build_partition_set, comp_cost, compare_policies,
                      erdos_renyi, feature_bytes, normalize, prepartition,
                      rapa_refine, run, sweep_capacity, uniform_capacities)
from tests.conftest import unit_profile

CFG4 = dict(f_dim=(4,), L=1)


def small_workload(P=2, n=60, seed=0):
    g = erdos_renyi(n, 5.0, seed=seed)
    ps = build_partition_set(g, prepartition(g, P, seed=seed).parts, hops=1)
    return g, ps, [unit_profile(f"u{i}") for i in range(P)]


# --------------------------------------------------------------------------
# basic contracts


def test_single_device_has_no_communication(path_graph):
    ps = build_partition_set(path_graph, [0, 0, 0, 0], hops=1)
    cfg = SimConfig(epochs=3, **CFG4)
    rep = run(path_graph, ps, [unit_profile()],
              uniform_capacities(ps, 0, cfg.f_dim), cfg)
    assert all(r.fwd_bytes == 0 and r.bwd_bytes == 0 for r in rep.records)
    assert all(r.comm_time == 0.0 for r in rep.records)
    assert rep.total_time == pytest.approx(sum(rep.epoch_makespans))


def test_full_residency_forward_free_backward_persistent(k4):
    ps = build_partition_set(k4, [0, 0, 1, 1], hops=1)
    cfg = SimConfig(epochs=4, staleness_bound=-1, **CFG4)
    rep = run(k4, ps, [unit_profile("a"), unit_profile("b")],
              uniform_capacities(ps, 10, cfg.f_dim), cfg)
    bpe = feature_bytes(cfg.f_dim)
    for r in rep.records:
        assert r.fwd_bytes == 0  # warmed before epoch 1, never expires
        assert r.bwd_bytes == ps.cut_edges[r.device] * bpe
    assert rep.hit_rate_local == 1.0


def test_no_cache_forward_volume_is_exact_demand():
    g, ps, profiles = small_workload(P=3, seed=1)
    cfg = SimConfig(epochs=5, **CFG4)
    rep = run(g, ps, profiles, uniform_capacities(ps, 0, cfg.f_dim), cfg)
    bpe = feature_bytes(cfg.f_dim)
    for r in rep.records:
        assert r.fwd_bytes == ps.halo[r.device].size * bpe
        assert r.misses == ps.halo[r.device].size
        assert r.local_hits == r.global_hits == 0
    assert rep.total_fwd_bytes == 5 * sum(h.size for h in ps.halo) * bpe


def test_record_conservation_and_volume_accounting():
    g, ps, profiles = small_workload(P=2, seed=2)
    cfg = SimConfig(epochs=4, staleness_bound=1, policy="lru", **CFG4)
    rep = run(g, ps, profiles, uniform_capacities(ps, 7, cfg.f_dim), cfg)
    bpe = feature_bytes(cfg.f_dim)
    for r in rep.records:
        assert r.local_hits + r.global_hits + r.misses == ps.halo[r.device].size
        assert r.fwd_bytes == r.misses * bpe
    assert rep.total_fwd_bytes == sum(r.fwd_bytes for r in rep.records)
    assert rep.total_bwd_bytes == sum(r.bwd_bytes for r in rep.records)


def test_caching_never_exceeds_cold_volume():
    g, ps, profiles = small_workload(P=2, seed=3)
    cfg = SimConfig(epochs=4, **CFG4)
    cold = run(g, ps, profiles, uniform_capacities(ps, 0, cfg.f_dim), cfg)
    for c in (1, 3, 10, 100):
        warm = run(g, ps, profiles, uniform_capacities(ps, c, cfg.f_dim), cfg)
        assert warm.total_fwd_bytes <= cold.total_fwd_bytes
        assert warm.total_bwd_bytes == cold.total_bwd_bytes


def test_staleness_zero_equals_cold_volume(k4):
    # disjoint halos: every access re-fetches once the warm entries age out
    ps = build_partition_set(k4, [0, 0, 1, 1], hops=1)
    profiles = [unit_profile("a"), unit_profile("b")]
    cfg_stale = SimConfig(epochs=3, staleness_bound=0, **CFG4)
    cfg_cold = SimConfig(epochs=3, staleness_bound=-1, **CFG4)
    stale = run(k4, ps, profiles, uniform_capacities(ps, 10, cfg_stale.f_dim),
                cfg_stale)
    cold = run(k4, ps, profiles, uniform_capacities(ps, 0, cfg_cold.f_dim),
               cfg_cold)
    assert stale.total_fwd_bytes == cold.total_fwd_bytes


# --------------------------------------------------------------------------
# timing model


def test_makespan_bounds_and_pipeline_overlap():
    g, ps, profiles = small_workload(P=2, seed=4)
    np_ = normalize(profiles)
    comp = [comp_cost(ps.all_edges[i], ps.inner[i].size, np_, i, 0.5)
            for i in range(2)]

    blocking = run(g, ps, profiles, uniform_capacities(ps, 0, (4,)),
                   SimConfig(epochs=2, prefetch_depth=0, **CFG4))
    for r in blocking.records:
        assert r.device_time == pytest.approx(r.compute_time + r.comm_time)
        assert r.compute_time == pytest.approx(comp[r.device])

    depth = max(h.size for h in ps.halo)
    overlapped = run(g, ps, profiles, uniform_capacities(ps, 0, (4,)),
                     SimConfig(epochs=2, prefetch_depth=depth, **CFG4))
    for r in overlapped.records:
        assert r.device_time == pytest.approx(max(r.compute_time, r.comm_time))
    for m, recs in zip(overlapped.epoch_makespans,
                       (overlapped.records[:2], overlapped.records[2:])):
        assert m == pytest.approx(max(r.device_time for r in recs))
        assert m >= max(comp) - 1e-12


@given(st.integers(0, 50))
@settings(max_examples=20, deadline=None)
def test_partial_overlap_interpolates(depth):
    g, ps, profiles = small_workload(P=2, seed=5)
    cfg = SimConfig(epochs=1, prefetch_depth=depth, **CFG4)
    rep = run(g, ps, profiles, uniform_capacities(ps, 0, cfg.f_dim), cfg)
    for r in rep.records:
        frac = min(1.0, depth / max(1, ps.halo[r.device].size))
        want = r.comm_time - min(r.comm_time, r.compute_time) * frac
        assert r.residual_comm_time == pytest.approx(want)
        assert r.device_time >= r.compute_time


def test_sigma_routes_partitions_to_devices(k4):
    ps = build_partition_set(k4, [0, 0, 1, 1], hops=1)
    profiles = [unit_profile("slow"),
                DeviceProfile(id="fast", mm_s=0.5, spmm_s=0.5, h2d_s=0.5,
                              d2h_s=0.5, idt_s=0.5, mem_gb=64.0)]
    res = rapa_refine(ps, profiles)
    cfg = SimConfig(epochs=1, **CFG4)
    rep = run(k4, res, profiles, uniform_capacities(ps, 0, cfg.f_dim), cfg)
    assert rep.sigma == res.sigma
    np_ = normalize(profiles)
    pruned = res.partitions  # run() simulates the refined partition set
    for r in rep.records:
        want = comp_cost(pruned.all_edges[r.device],
                         pruned.inner[r.device].size,
                         np_, res.sigma[r.device], 0.5)
        assert r.compute_time == pytest.approx(want)


# --------------------------------------------------------------------------
# determinism and serialization


def test_reports_are_byte_identical_across_runs():
    g, ps, profiles = small_workload(P=3, seed=6)
    cfg = SimConfig(epochs=3, policy="jaca", **CFG4)
    caps = uniform_capacities(ps, 5, cfg.f_dim)
    a = run(g, ps, profiles, caps, cfg, record_trace=True)
    b = run(g, ps, profiles, caps, cfg, record_trace=True)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()
    assert a.trace_csv == b.trace_csv


def test_report_json_csv_shape():
    g, ps, profiles = small_workload(P=2, seed=7)
    cfg = SimConfig(epochs=2, **CFG4)
    rep = run(g, ps, profiles, uniform_capacities(ps, 3, cfg.f_dim), cfg)
    doc = json.loads(rep.to_json())
    assert [e["epoch"] for e in doc["epochs"]] == [1, 2]
    assert doc["epochs"][0]["makespan"] == rep.epoch_makespans[0]
    assert doc["totals"]["total_fwd_bytes"] == rep.total_fwd_bytes
    assert doc["config"]["policy"] == "jaca"
    lines = rep.to_csv().splitlines()
    assert lines[0] == ("epoch,device,fwd_bytes,bwd_bytes,local_hits,"
                        "global_hits,misses,compute_time,comm_time,"
                        "residual_comm_time,device_time,epoch_makespan")
    assert len(lines) == 1 + 2 * 2


# --------------------------------------------------------------------------
# sweeps and policy comparison


def test_sweep_capacity_monotone_with_saturated_tail():
    g, ps, profiles = small_workload(P=2, n=80, seed=8)
    h = max(h.size for h in ps.halo)
    cfg = SimConfig(epochs=3, policy="jaca", **CFG4)
    reports = sweep_capacity(g, ps, profiles, cfg,
                             [0, h // 4, h // 2, h, 2 * h])
    vols = [r.total_fwd_bytes for r in reports]
    assert all(b <= a for a, b in zip(vols, vols[1:]))
    assert vols[-2] == vols[-1]  # both saturate the halo demand
    assert vols[-1] == 0  # warmed full residency never re-fetches


def test_sweep_rejects_empty_and_handles_duplicates():
    g, ps, profiles = small_workload(P=2, seed=9)
    cfg = SimConfig(epochs=1, **CFG4)
    with pytest.raises(DomainError):
        sweep_capacity(g, ps, profiles, cfg, [])
    twice = sweep_capacity(g, ps, profiles, cfg, [4, 4])
    assert twice[0].to_json() == twice[1].to_json()


def test_compare_policies_extremes():
    g, ps, profiles = small_workload(P=2, seed=10)
    h = max(h.size for h in ps.halo)
    cfg = SimConfig(epochs=3, **CFG4)
    table = compare_policies(g, ps, profiles, cfg, capacities=(0, 2 * h))
    by = {(r.policy, r.capacity): r for r in table.rows}
    for policy in ("jaca", "fifo", "lru"):
        assert by[(policy, 0)].hit_rate_local == 0.0
        assert by[(policy, 2 * h)].hit_rate_local == 1.0
        assert by[(policy, 2 * h)].fwd_bytes == 0
    lines = table.to_csv().splitlines()
    assert lines[0] == ("policy,capacity,hit_rate_local,hit_rate_global,"
                        "fwd_bytes,bwd_bytes,makespan")
    assert len(lines) == 1 + 6


def test_compare_policies_jaca_wins_under_thrash():
    g, ps, profiles = small_workload(P=2, n=100, seed=11)
    h = max(h.size for h in ps.halo)
    cfg = SimConfig(epochs=4, **CFG4)
    table = compare_policies(g, ps, profiles, cfg, capacities=(h // 2,))
    by = {r.policy: r for r in table.rows}
    assert by["jaca"].hit_rate_local > 0.0
    assert by["jaca"].hit_rate_local >= by["fifo"].hit_rate_local
    assert by["jaca"].hit_rate_local >= by["lru"].hit_rate_local
    assert by["jaca"].fwd_bytes <= by["fifo"].fwd_bytes
    assert by["jaca"].fwd_bytes <= by["lru"].fwd_bytes


# --------------------------------------------------------------------------
# validation


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(epochs=0)
    with pytest.raises(DomainError):
        SimConfig(alpha=1.5)
    with pytest.raises(DomainError):
        SimConfig(policy="belady")
    with pytest.raises(DomainError):
        SimConfig(f_dim=(4, 4), L=1)
    with pytest.raises(DomainError):
        SimConfig(prefetch_depth=-1)
    with pytest.raises(DomainError):
        SimConfig(unit_time=0.0)


def test_run_arity_checks(k4):
    ps = build_partition_set(k4, [0, 0, 1, 1], hops=1)
    profiles = [unit_profile("a"), unit_profile("b")]
    cfg = SimConfig(epochs=1, **CFG4)
    caps3 = uniform_capacities(build_partition_set(k4, [0, 1, 2, 2], 1), 1,
                               cfg.f_dim)
    with pytest.raises(DomainError, match="capacities"):
        run(k4, ps, profiles, caps3, cfg)
    with pytest.raises(DomainError, match="entries"):
        run(k4, ps, profiles, uniform_capacities(ps, 1, (8,)), cfg)
    with pytest.raises(DomainError, match="device"):
        run(k4, ps, [unit_profile("a")], uniform_capacities(ps, 1, cfg.f_dim),
            cfg)
    with pytest.raises(DomainError, match="RapaResult or PartitionSet"):
        run(k4, "partition", profiles, uniform_capacities(ps, 1, cfg.f_dim),
            cfg)
