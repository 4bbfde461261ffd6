"""Device profiles and the relative cost model for heterogeneous training.

All times are microbenchmark measurements of the same unit workload, so only
their ratios matter. Dividing each metric by the fleet-wide slowest device
turns absolute seconds into dimensionless fractions in (0, 1]: the slowest
device scores 1.0 per metric and a device twice as fast scores 0.5.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Sequence

from .errors import DomainError, ParseError

_TIME_FIELDS = ("mm_s", "spmm_s", "h2d_s", "d2h_s", "idt_s")


@dataclass(frozen=True)
class DeviceProfile:
    """One accelerator: label, five benchmark times, and a memory budget.

    mm_s    dense matmul seconds per unit work
    spmm_s  sparse-dense matmul seconds per unit work
    h2d_s   host-to-device transfer seconds per unit payload
    d2h_s   device-to-host transfer seconds per unit payload
    idt_s   inter-device transfer seconds per unit payload
    mem_gb  usable device memory in GiB
    """

    id: str
    mm_s: float
    spmm_s: float
    h2d_s: float
    d2h_s: float
    idt_s: float
    mem_gb: float

    def __post_init__(self) -> None:
        if self.mem_gb <= 0:
            raise DomainError(f"{self.id}: mem_gb must be positive")
        for name in _TIME_FIELDS:
            if getattr(self, name) <= 0:
                raise DomainError(f"{self.id}: {name} must be positive")


@dataclass(frozen=True)
class NormalizedProfiles:
    """Per-device ratios against the slowest device, aligned with device_ids.

    `comm_mix(i, P)` folds the three transfer ratios into the expected cost
    of moving one boundary payload unit when P devices cooperate: a 1/P
    share of the traffic goes peer-to-peer, the rest round-trips through
    host memory.
    """

    device_ids: tuple[str, ...]
    r_mm: tuple[float, ...]
    r_spmm: tuple[float, ...]
    r_h2d: tuple[float, ...]
    r_d2h: tuple[float, ...]
    r_idt: tuple[float, ...]
    mem_gb: tuple[float, ...]

    @property
    def n_devices(self) -> int:
        return len(self.device_ids)

    def comm_mix(self, device: int, P: int) -> float:
        if P < 1:
            raise DomainError(f"P must be >= 1, got {P}")
        direct = 1.0 / P
        return ((self.r_h2d[device] + self.r_d2h[device]) * (1.0 - direct)
                + self.r_idt[device] * direct)

    def slowness(self, device: int) -> float:
        """Sum of the five ratios; a crude fast-to-slow total order."""
        return (self.r_mm[device] + self.r_spmm[device] + self.r_h2d[device]
                + self.r_d2h[device] + self.r_idt[device])


def normalize(profiles: Sequence[DeviceProfile]) -> NormalizedProfiles:
    """Divide every metric by its maximum over the device set."""
    if not profiles:
        raise DomainError("need at least one device profile")
    ids = tuple(p.id for p in profiles)
    if len(set(ids)) != len(ids):
        raise DomainError("duplicate device id in profile list")
    ratios = {}
    for name in _TIME_FIELDS:
        worst = max(getattr(p, name) for p in profiles)
        ratios[name] = tuple(getattr(p, name) / worst for p in profiles)
    return NormalizedProfiles(
        device_ids=ids,
        r_mm=ratios["mm_s"],
        r_spmm=ratios["spmm_s"],
        r_h2d=ratios["h2d_s"],
        r_d2h=ratios["d2h_s"],
        r_idt=ratios["idt_s"],
        mem_gb=tuple(p.mem_gb for p in profiles),
    )


def comm_cost(e_outer: int, np: NormalizedProfiles, device: int, P: int) -> float:
    """Relative time for `e_outer` boundary payload exchanges on one device.

    Traffic splits between the host-staged path, a (1 - 1/P) share paying
    both H2D and D2H, and the direct peer path, a 1/P share paying IDT.
    """
    if e_outer < 0:
        raise DomainError("e_outer must be >= 0")
    return e_outer * np.comm_mix(device, P)


def comp_cost(e_all: int, v_inner: int, np: NormalizedProfiles,
              device: int, alpha: float) -> float:
    """Relative compute time: alpha blends sparse work into dense work.

    The sparse term grows with every edge incident to the resident subgraph
    (aggregation reads halo features too); the dense term grows with owned
    vertices only.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    if e_all < 0 or v_inner < 0:
        raise DomainError("edge/vertex counts must be >= 0")
    return (alpha * e_all * np.r_spmm[device]
            + (1.0 - alpha) * v_inner * np.r_mm[device])


def objective(lambdas: Sequence[float]) -> tuple[float, float, float]:
    """(max, population std, max + std) of a per-partition cost list.

    The sum penalizes the bottleneck device and imbalance among the rest at
    the same time; population (not sample) std keeps it defined for a
    single partition.
    """
    if not lambdas:
        raise DomainError("need at least one lambda")
    lam_max = max(lambdas)
    mean = sum(lambdas) / len(lambdas)
    std = math.sqrt(sum((x - mean) ** 2 for x in lambdas) / len(lambdas))
    return lam_max, std, lam_max + std


@dataclass(frozen=True)
class CostBreakdown:
    """Per-partition comm/comp costs and the objective they induce."""

    comm: tuple[float, ...]
    comp: tuple[float, ...]
    lam: tuple[float, ...]
    lambda_max: float
    std_lambda: float

    def __post_init__(self) -> None:
        if not (len(self.comm) == len(self.comp) == len(self.lam)):
            raise DomainError("comm/comp/lam lengths differ")

    @classmethod
    def from_costs(cls, comm: Sequence[float], comp: Sequence[float]) -> "CostBreakdown":
        lam = tuple(cm + cp for cm, cp in zip(comm, comp))
        lam_max, std, _ = objective(lam)
        return cls(comm=tuple(comm), comp=tuple(comp), lam=lam,
                   lambda_max=lam_max, std_lambda=std)

    @property
    def value(self) -> float:
        return self.lambda_max + self.std_lambda


@dataclass(frozen=True)
class MemModel:
    """Bytes-per-element constants for the residency estimate.

    Defaults: 8 B per vertex record, 16 B per adjacency edge (two int64
    endpoints), 4 B per feature dimension per vertex (float32), and a flat
    64 MiB runtime reserve. Every knob is overridable per experiment.
    """

    m_vertex: float = 8.0
    m_edge: float = 16.0
    m_feat: float = 4.0
    beta: float = 64.0 * 1024 * 1024


def memory_requirement(v_count: int, e_count: int, f_dim: float,
                       mem_model: MemModel = MemModel()) -> float:
    """Bytes needed to host a subgraph: structure + features + reserve.

    The feature term scales with the resident vertex count (features exist
    per vertex), with `f_dim` the total feature width being held.
    """
    if v_count < 0 or e_count < 0:
        raise DomainError("counts must be >= 0")
    return (v_count * mem_model.m_vertex + e_count * mem_model.m_edge
            + f_dim * mem_model.m_feat * v_count + mem_model.beta)


def _parse_profile_obj(obj: dict, where: str) -> DeviceProfile:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    try:
        return DeviceProfile(
            id=str(obj["id"]),
            mm_s=float(obj["mm_s"]),
            spmm_s=float(obj["spmm_s"]),
            h2d_s=float(obj["h2d_s"]),
            d2h_s=float(obj["d2h_s"]),
            idt_s=float(obj["idt_s"]),
            mem_gb=float(obj["mem_gb"]),
        )
    except KeyError as exc:
        raise ParseError(f"{where}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def load_device_profiles(source: str | Path | IO) -> list[DeviceProfile]:
    """Read a JSON array of device-profile objects."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_device_profiles(fh)
    try:
        data = json.load(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ParseError("expected a top-level JSON array of profiles")
    if not data:
        raise ParseError("profile array is empty")
    return [_parse_profile_obj(obj, f"[{i}]") for i, obj in enumerate(data)]


def reference_profiles() -> list[DeviceProfile]:
    """The ten-device benchmark fleet bundled with the package."""
    ref = resources.files("halopart.data").joinpath("reference_devices.json")
    with ref.open("r", encoding="utf-8") as fh:
        return load_device_profiles(fh)
