"""Halo-aware graph partitioning and two-level feature-cache simulation."""

from .cache import (CacheCapacities, CacheSystem, compute_capacities,
                    feature_bytes, uniform_capacities)
from .devices import (CostBreakdown, DeviceProfile, MemModel,
                      NormalizedProfiles, comm_cost, comp_cost,
                      load_device_profiles, memory_requirement, normalize,
                      objective, reference_profiles)
from .errors import DomainError, HalopartError, ParseError
from .graph import (Graph, HaloReport, PartitionSet, build_partition_set,
                    halo_stats, khop_halo, load_edge_list)
from .partitioner import (Assignment, InfluenceTable, RapaResult,
                          export_assignment, import_rapa_result,
                          influence_scores, prepartition, prune_halo,
                          rapa_refine)
from .simulator import (ComparisonRow, ComparisonTable, EpochDeviceRecord,
                        SimConfig, SimReport, compare_policies, run,
                        sweep_capacity)
from .synth import erdos_renyi

__version__ = "0.1.0"

__all__ = [
    "Assignment", "CacheCapacities", "CacheSystem", "ComparisonRow",
    "ComparisonTable", "CostBreakdown", "DeviceProfile", "DomainError",
    "EpochDeviceRecord", "Graph", "HaloReport", "HalopartError",
    "InfluenceTable", "MemModel", "NormalizedProfiles", "ParseError",
    "PartitionSet", "RapaResult", "SimConfig", "SimReport",
    "build_partition_set", "comm_cost", "comp_cost", "compare_policies",
    "compute_capacities", "erdos_renyi", "export_assignment", "feature_bytes",
    "halo_stats", "import_rapa_result", "influence_scores", "khop_halo",
    "load_device_profiles", "load_edge_list", "memory_requirement",
    "normalize", "objective", "prepartition", "prune_halo", "rapa_refine",
    "reference_profiles", "run", "sweep_capacity", "uniform_capacities",
]
