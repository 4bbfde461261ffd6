"""Command-line interface: partition, simulate, cache-bench.

Every invocation resolves its knobs from defaults, an optional JSON config
file, and command-line flags (flags win), runs the work fully in memory, and
only then writes the artifacts into --out under fixed names, the manifest
last. A failure while writing removes everything already written, so exit
code 0 means the output set is complete. The manifest records the resolved
configuration, input digests, and tool version; identical manifests imply
byte-identical artifacts, since no artifact embeds timestamps or unseeded
randomness.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import __version__
from .cache import compute_capacities, uniform_capacities
from .devices import MemModel, load_device_profiles
from .errors import DomainError, HalopartError, ParseError
from .graph import build_partition_set, halo_stats, load_edge_list
from .partitioner import export_assignment, import_rapa_result, prepartition, rapa_refine
from .simulator import SimConfig, compare_policies, run

_METHOD_ALIASES = {"random": "random", "greedy": "greedy_multilevel",
                   "import": "imported"}

_COMMON_DEFAULTS = {
    "graph": None,
    "devices": None,          # None -> bundled reference profiles
    "out": ".",
    "seed": 0,
    "alpha": 0.5,
    "fdim": [256, 256, 256],
    "compact_ids": False,
}

_PARTITION_DEFAULTS = {
    **_COMMON_DEFAULTS,
    "partitions": 2,
    "method": "random",
    "hops": 1,
    "epsilon": "auto",
    "max_iters": 100_000,
    "import_assignment": None,
}

_SIMULATE_DEFAULTS = {
    **_COMMON_DEFAULTS,
    "partition_result": None,
    "policy": "jaca",
    "epochs": 200,
    "staleness": -1,
    "prefetch_depth": 0,
    "capacity": "auto",
    "layers": 3,
    "unit_time": 1.0,
    "mem_cpu": 64.0,          # GiB of host cache memory for capacity=auto
    "mem_gpu_res": 1024.0,    # MiB reserved per device
    "mem_cpu_res": 2048.0,    # MiB reserved on the host
    "topk": -1,
}

_BENCH_DEFAULTS = {
    **_SIMULATE_DEFAULTS,
    "policies": ["jaca", "fifo", "lru"],
    "capacities": None,
}


def _as_int_list(value) -> list[int]:
    if isinstance(value, str):
        value = [x for x in value.replace(",", " ").split() if x]
    try:
        return [int(x) for x in value]
    except (TypeError, ValueError):
        raise ParseError(f"expected a list of integers, got {value!r}") from None


def _as_str_list(value) -> list[str]:
    if isinstance(value, str):
        return [x for x in value.replace(",", " ").split() if x]
    return [str(x) for x in value]


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    file_cfg = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ParseError(f"{args.config}: config must be a JSON object")
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ParseError(f"{args.config}: unknown keys {sorted(unknown)}")
    opts = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            opts[key] = flag
        elif key in file_cfg:
            opts[key] = file_cfg[key]
        else:
            opts[key] = default
    return opts


def _require(opts: dict, key: str, flag: str) -> None:
    if opts[key] is None:
        raise DomainError(f"{flag} is required (flag or config file)")


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_profiles(devices_opt):
    if devices_opt is None:
        ref = resources.files("halopart.data").joinpath("reference_devices.json")
        data = ref.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        with ref.open("r", encoding="utf-8") as fh:
            return load_device_profiles(fh), "builtin:reference_devices.json", digest
    path = Path(devices_opt)
    return load_device_profiles(path), str(devices_opt), _sha256_file(path)


def _canon_json(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _emit(out_dir: str, artifacts: dict[str, bytes], manifest: dict) -> None:
    """Write all artifacts, manifest last; on failure remove what was written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest["outputs"] = sorted(artifacts) + ["manifest.json"]
    items = list(artifacts.items()) + [("manifest.json", _canon_json(manifest))]
    written: list[Path] = []
    try:
        for name, data in items:
            target = out / name
            target.write_bytes(data)
            written.append(target)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise


def _manifest(command: str, opts: dict, inputs: dict[str, tuple[str, str]]) -> dict:
    config = {k: v for k, v in opts.items() if k != "out"}
    return {
        "tool": "halopart",
        "tool_version": __version__,
        "command": command,
        "config": config,
        "inputs": {name: {"path": path, "sha256": digest}
                   for name, (path, digest) in inputs.items()},
    }


# --------------------------------------------------------------------------


def cmd_partition(args: argparse.Namespace) -> int:
    opts = _resolve(args, _PARTITION_DEFAULTS)
    _require(opts, "graph", "--graph")
    if opts["method"] not in _METHOD_ALIASES:
        raise DomainError(f"--method must be one of {sorted(_METHOD_ALIASES)}")
    opts["fdim"] = _as_int_list(opts["fdim"])

    graph_path = Path(opts["graph"])
    g = load_edge_list(graph_path, compact_ids=bool(opts["compact_ids"]))
    profiles, dev_path, dev_digest = _load_profiles(opts["devices"])
    P = int(opts["partitions"])
    if len(profiles) < P:
        raise DomainError(f"device file has {len(profiles)} profiles, need {P}")
    profiles = profiles[:P]

    method = _METHOD_ALIASES[opts["method"]]
    source = opts["import_assignment"]
    if method == "imported":
        _require(opts, "import_assignment", "--import-assignment")
    assignment = prepartition(g, P, method=method, seed=int(opts["seed"]),
                              source=source)
    ps = build_partition_set(g, assignment, hops=int(opts["hops"]))
    report = halo_stats(ps)

    epsilon = None if opts["epsilon"] in (None, "auto") else float(opts["epsilon"])
    result = rapa_refine(ps, profiles, alpha=float(opts["alpha"]),
                         epsilon=epsilon, mem_model=MemModel(),
                         f_dim=float(sum(opts["fdim"])),
                         max_iters=int(opts["max_iters"]))

    artifacts = {
        "assignment.json": _canon_json({
            "method": assignment.method,
            "P": P,
            "seed": int(opts["seed"]),
            "parts": assignment.parts.tolist(),
        }),
        "rapa.json": export_assignment(result),
        "halo_stats.csv": report.to_csv().encode("utf-8"),
    }
    inputs = {"graph": (str(opts["graph"]), _sha256_file(graph_path)),
              "devices": (dev_path, dev_digest)}
    if method == "imported":
        inputs["assignment"] = (str(source), _sha256_file(Path(source)))
    _emit(opts["out"], artifacts, _manifest("partition", opts, inputs))
    if not result.feasible:
        print("refinement finished infeasible (constraints not met); "
              "see rapa.json", file=sys.stderr)
    return 0


def _sim_inputs(opts):
    _require(opts, "graph", "--graph")
    _require(opts, "partition_result", "--partition-result")
    opts["fdim"] = _as_int_list(opts["fdim"])
    graph_path = Path(opts["graph"])
    g = load_edge_list(graph_path, compact_ids=bool(opts["compact_ids"]))
    result_path = Path(opts["partition_result"])
    result, ps = import_rapa_result(result_path)
    profiles, dev_path, dev_digest = _load_profiles(opts["devices"])
    if len(profiles) < ps.P:
        raise DomainError(f"device file has {len(profiles)} profiles, need {ps.P}")
    profiles = profiles[:ps.P]
    if max(result.sigma) >= len(profiles):
        raise DomainError("partition result names more devices than the profile list")
    inputs = {"graph": (str(opts["graph"]), _sha256_file(graph_path)),
              "partition_result": (str(opts["partition_result"]),
                                   _sha256_file(result_path)),
              "devices": (dev_path, dev_digest)}
    return g, result, ps, profiles, inputs


def _sim_caps(opts, ps, profiles, result):
    fdim, L = opts["fdim"], int(opts["layers"])
    if str(opts["capacity"]) == "auto":
        mem_gpu = [profiles[result.sigma[i]].mem_gb for i in range(ps.P)]
        return compute_capacities(ps, k=int(opts["topk"]), mem_gpu=mem_gpu,
                                  mem_gpu_res=float(opts["mem_gpu_res"]),
                                  mem_cpu=float(opts["mem_cpu"]),
                                  mem_cpu_res=float(opts["mem_cpu_res"]),
                                  f_dim=fdim, L=L)
    return uniform_capacities(ps, int(opts["capacity"]), fdim)


def _sim_config(opts, policy: str) -> SimConfig:
    return SimConfig(epochs=int(opts["epochs"]), alpha=float(opts["alpha"]),
                     staleness_bound=int(opts["staleness"]),
                     prefetch_depth=int(opts["prefetch_depth"]), policy=policy,
                     f_dim=tuple(opts["fdim"]), L=int(opts["layers"]),
                     seed=int(opts["seed"]), unit_time=float(opts["unit_time"]))


def cmd_simulate(args: argparse.Namespace) -> int:
    opts = _resolve(args, _SIMULATE_DEFAULTS)
    g, result, ps, profiles, inputs = _sim_inputs(opts)
    caps = _sim_caps(opts, ps, profiles, result)
    cfg = _sim_config(opts, str(opts["policy"]))
    report = run(g, result, profiles, caps, cfg)

    manifest = _manifest("simulate", opts, inputs)
    manifest["config"]["resolved_capacities"] = {
        "c_cpu": caps.c_cpu, "c_gpu": list(caps.c_gpu),
        "bytes_per_entry": caps.bytes_per_entry}
    artifacts = {"sim_report.json": report.to_json().encode("utf-8"),
                 "sim_report.csv": report.to_csv().encode("utf-8")}
    _emit(opts["out"], artifacts, manifest)
    return 0


def cmd_cache_bench(args: argparse.Namespace) -> int:
    opts = _resolve(args, _BENCH_DEFAULTS)
    _require(opts, "capacities", "--capacities")
    opts["capacities"] = _as_int_list(opts["capacities"])
    opts["policies"] = _as_str_list(opts["policies"])
    g, result, ps, profiles, inputs = _sim_inputs(opts)
    cfg = _sim_config(opts, opts["policies"][0])
    table = compare_policies(g, result, profiles, cfg,
                             policies=opts["policies"],
                             capacities=opts["capacities"])
    _emit(opts["out"], {"compare.csv": table.to_csv().encode("utf-8")},
          _manifest("cache-bench", opts, inputs))
    return 0


# --------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--graph", help="edge-list file ('u v' per line)")
    p.add_argument("--devices", help="device profile JSON (default: bundled fleet)")
    p.add_argument("--out", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="seed for all randomness")
    p.add_argument("--alpha", type=float, help="sparse/dense compute blend in [0,1]")
    p.add_argument("--fdim", help="per-layer feature widths, e.g. 256,256,64")
    p.add_argument("--compact-ids", action="store_true", default=None,
                   help="remap non-contiguous vertex ids")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--partition-result", help="rapa.json from the partition command")
    p.add_argument("--epochs", type=int)
    p.add_argument("--staleness", type=int,
                   help="max epoch age served as a hit; negative = never expires")
    p.add_argument("--prefetch-depth", type=int)
    p.add_argument("--capacity", help="'auto' (adaptive) or an entry count")
    p.add_argument("--layers", type=int)
    p.add_argument("--unit-time", type=float)
    p.add_argument("--mem-cpu", type=float, help="host cache GiB for --capacity auto")
    p.add_argument("--mem-gpu-res", type=float, help="reserved MiB per device")
    p.add_argument("--mem-cpu-res", type=float, help="reserved MiB on the host")
    p.add_argument("--topk", type=int, help="halo vertices considered per device; -1 = all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halopart",
        description="Partition graphs for heterogeneous devices and simulate "
                    "cached halo-feature exchange.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a graph and refine the "
                                         "device mapping")
    _add_common(p)
    p.add_argument("--partitions", type=int, help="number of subgraphs/devices")
    p.add_argument("--method", choices=sorted(_METHOD_ALIASES),
                   help="initial partitioning method")
    p.add_argument("--hops", type=int, help="halo expansion depth")
    p.add_argument("--epsilon", help="cost-spread bound, or 'auto'")
    p.add_argument("--max-iters", type=int, help="halo-pruning step limit")
    p.add_argument("--import-assignment",
                   help="assignment file for --method import")
    p.set_defaults(func=cmd_partition)

    s = sub.add_parser("simulate", help="simulate training over a partition result")
    _add_common(s)
    _add_sim_flags(s)
    s.add_argument("--policy", choices=("jaca", "fifo", "lru"))
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("cache-bench", help="replay one workload under several "
                                           "policies and capacities")
    _add_common(b)
    _add_sim_flags(b)
    b.add_argument("--policies", help="comma list from jaca,fifo,lru")
    b.add_argument("--capacities", help="comma list of entry counts")
    b.set_defaults(func=cmd_cache_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HalopartError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
