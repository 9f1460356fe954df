"""Cluster hardware description, validation, and scaling arithmetic.

Nodes are described at the level a procurement sheet would use: DIMM
population per socket, aggregate node bandwidths, flop rate, and network
injection bandwidth.  Aggregate reports multiply per-node figures by the
node count and render them with the truncation rule under
``format_scaled`` (truncate toward zero, precision keyed to magnitude).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import (
    ClusterValidationError,
    DlmRequiresDram,
    DuplicateNodeId,
    HeterogeneousCluster,
    NonPositiveParameter,
    SlotOverflow,
    UnitError,
)
from .memory import MemoryMode
from .units import SECOND_NS, parse_bytes, parse_duration_ns, parse_flops, parse_rate

DEFAULT_MODE_SWITCH_NS = 300 * SECOND_NS

# Projected density ratio of persistent DIMMs vs DRAM DIMMs; outside this
# band a cluster is unusual but not invalid.
DENSITY_RATIO_RANGE = (2.0, 5.0)


@dataclass(frozen=True)
class NodeSpec:
    node_id: int
    dram_dimm_bytes: int
    bapm_dimm_bytes: int
    dram_dimms_per_socket: int
    bapm_dimms_per_socket: int
    dram_bw: int
    bapm_bw: int
    flops: int
    link_bw: int
    dram_latency_ns: int = 100
    bapm_latency_ratio: float = 5.0
    sockets: int = 2
    channels_per_socket: int = 6
    slots_per_channel: int = 2
    initial_mode: MemoryMode = MemoryMode.SLM

    @property
    def dram_capacity(self) -> int:
        return self.sockets * self.dram_dimms_per_socket * self.dram_dimm_bytes

    @property
    def bapm_capacity(self) -> int:
        return self.sockets * self.bapm_dimms_per_socket * self.bapm_dimm_bytes

    @property
    def has_bapm(self) -> bool:
        return self.bapm_dimms_per_socket > 0 and self.bapm_dimm_bytes > 0


@dataclass(frozen=True)
class ClusterSpec:
    nodes: tuple[NodeSpec, ...]
    external_fs_bw: int
    external_fs_capacity: int
    mode_switch_ns: int = DEFAULT_MODE_SWITCH_NS
    dfs_members: tuple[int, ...] | None = None
    dfs_fraction: float = 1.0
    # flat full-bisection network is the only model in v1
    bisection_model: str = "flat"

    def node(self, node_id: int) -> NodeSpec:
        return self.nodes[node_id]


@dataclass(frozen=True)
class AggregateReport:
    node_count: int
    flops_total: int
    bapm_bytes_total: int
    bapm_bw_total: int

    @property
    def compute_pflops(self) -> str:
        return format_scaled(self.flops_total, 15)

    @property
    def bapm_capacity_pb(self) -> str:
        return format_scaled(self.bapm_bytes_total, 15)

    @property
    def bapm_io_bw_tbs(self) -> str:
        return format_scaled(self.bapm_bw_total, 12)


def format_scaled(raw: int, exp: int) -> str:
    """Render raw * 10^-exp, truncating toward zero.

    Precision follows the magnitude of the displayed value: >= 5 shows an
    integer, [0.1, 5) one decimal, below 0.1 three decimals; trailing
    zeros (and a bare trailing dot) are stripped.
    """
    if raw < 0:
        raise NonPositiveParameter("negative quantity in report")
    unit = 10**exp
    if raw == 0:
        return "0"
    if raw >= 5 * unit:
        return str(raw // unit)
    if 10 * raw >= unit:
        tenths = 10 * raw // unit
        text = f"{tenths // 10}.{tenths % 10}"
    else:
        thousandths = 1000 * raw // unit
        text = f"0.{thousandths:03d}"
    return text.rstrip("0").rstrip(".") or "0"


def collect_validation_problems(spec: ClusterSpec) -> tuple[list, list[str]]:
    """All errors and (non-fatal) warnings for a cluster description."""
    errors: list = []
    warnings: list[str] = []
    seen: set[int] = set()
    for i, node in enumerate(spec.nodes):
        tag = f"node {node.node_id}"
        if node.node_id in seen:
            errors.append(DuplicateNodeId(f"{tag}: id repeated"))
        seen.add(node.node_id)
        if node.node_id != i:
            errors.append(DuplicateNodeId(f"{tag}: ids must be dense from 0 (position {i})"))
        slots = node.channels_per_socket * node.slots_per_channel
        if node.dram_dimms_per_socket + node.bapm_dimms_per_socket > slots:
            errors.append(SlotOverflow(
                f"{tag}: {node.dram_dimms_per_socket + node.bapm_dimms_per_socket} DIMMs "
                f"per socket exceeds {slots} slots"
            ))
        for name in ("sockets", "channels_per_socket", "slots_per_channel",
                     "dram_dimm_bytes", "dram_dimms_per_socket", "dram_bw",
                     "bapm_bw", "flops", "link_bw", "dram_latency_ns"):
            if getattr(node, name) <= 0:
                errors.append(NonPositiveParameter(f"{tag}: {name} must be positive"))
        if node.bapm_dimms_per_socket < 0 or node.bapm_dimm_bytes < 0:
            errors.append(NonPositiveParameter(f"{tag}: negative B-APM population"))
        if node.bapm_latency_ratio < 1.0:
            errors.append(NonPositiveParameter(f"{tag}: bapm_latency_ratio must be >= 1"))
        if node.initial_mode is MemoryMode.DLM and node.dram_dimms_per_socket < 1:
            errors.append(DlmRequiresDram(f"{tag}: DLM configured without DRAM DIMMs"))
        if node.has_bapm and node.dram_dimm_bytes > 0:
            ratio = node.bapm_dimm_bytes / node.dram_dimm_bytes
            lo, hi = DENSITY_RATIO_RANGE
            if not lo <= ratio <= hi:
                warnings.append(
                    f"{tag}: B-APM/DRAM DIMM density ratio {ratio:.2f} outside [{lo}, {hi}]"
                )
    if spec.external_fs_bw <= 0:
        errors.append(NonPositiveParameter("external_fs_bw must be positive"))
    if spec.external_fs_capacity <= 0:
        errors.append(NonPositiveParameter("external_fs_capacity must be positive"))
    if spec.mode_switch_ns <= 0:
        errors.append(NonPositiveParameter("mode_switch_ns must be positive"))
    if spec.dfs_members is not None:
        for m in spec.dfs_members:
            if m >= len(spec.nodes) or m < 0:
                errors.append(DuplicateNodeId(f"distributed FS member {m} is not a node"))
    return errors, warnings


def validate_cluster(spec: ClusterSpec) -> ClusterSpec:
    """Return the spec unchanged, raising ClusterValidationError on problems."""
    errors, _ = collect_validation_problems(spec)
    if errors:
        raise ClusterValidationError(errors)
    return spec


def aggregate_metrics(spec: ClusterSpec) -> AggregateReport:
    """Cluster-level totals; requires homogeneous nodes."""
    if not spec.nodes:
        return AggregateReport(0, 0, 0, 0)
    first = spec.nodes[0]
    profile = (first.flops, first.bapm_capacity, first.bapm_bw)
    for node in spec.nodes[1:]:
        if (node.flops, node.bapm_capacity, node.bapm_bw) != profile:
            raise HeterogeneousCluster(
                "aggregate report requires identical per-node flops, capacity, bandwidth"
            )
    n = len(spec.nodes)
    return AggregateReport(n, n * first.flops, n * first.bapm_capacity, n * first.bapm_bw)


def scaling_report(node_count: int, bapm_per_node: int, flops_per_node: int,
                   bapm_bw_per_node: int) -> AggregateReport:
    """Aggregate figures for a hypothetical homogeneous system."""
    if node_count < 0:
        raise NonPositiveParameter("node count must be >= 0")
    for v, name in ((bapm_per_node, "bapm_per_node"), (flops_per_node, "flops_per_node"),
                    (bapm_bw_per_node, "bapm_bw_per_node")):
        if v <= 0:
            raise NonPositiveParameter(f"{name} must be positive")
    return AggregateReport(
        node_count,
        node_count * flops_per_node,
        node_count * bapm_per_node,
        node_count * bapm_bw_per_node,
    )


def crossover_nodes(target_bw: int, per_node_bw: int) -> int:
    """Smallest node count whose aggregate bandwidth reaches target_bw."""
    if target_bw <= 0 or per_node_bw <= 0:
        raise NonPositiveParameter("bandwidths must be positive")
    return -(-target_bw // per_node_bw)


# --- config file ------------------------------------------------------------

def _node_from_dict(raw: dict, node_id: int) -> NodeSpec:
    try:
        return NodeSpec(
            node_id=node_id,
            sockets=int(raw.get("sockets", 2)),
            channels_per_socket=int(raw.get("channels_per_socket", 6)),
            slots_per_channel=int(raw.get("slots_per_channel", 2)),
            dram_dimm_bytes=parse_bytes(raw["dram_dimm"]),
            bapm_dimm_bytes=parse_bytes(raw.get("bapm_dimm", 0)),
            dram_dimms_per_socket=int(raw.get("dram_dimms_per_socket", 6)),
            bapm_dimms_per_socket=int(raw.get("bapm_dimms_per_socket", 0)),
            dram_bw=parse_rate(raw["dram_bw"]),
            bapm_bw=parse_rate(raw.get("bapm_bw", raw["dram_bw"])),
            flops=parse_flops(raw["flops"]),
            link_bw=parse_rate(raw["link_bw"]),
            dram_latency_ns=parse_duration_ns(raw.get("dram_latency", "100ns")),
            bapm_latency_ratio=float(raw.get("bapm_latency_ratio", 5.0)),
            initial_mode=MemoryMode(raw.get("mode", "SLM")),
        )
    except KeyError as exc:
        raise UnitError(f"node entry missing required field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise UnitError(f"node entry: {exc}") from None


def cluster_from_dict(raw: dict) -> ClusterSpec:
    if not isinstance(raw, dict):
        raise UnitError("cluster config must be a JSON object")
    try:
        ext = raw["external_fs"]
        ext_bw = parse_rate(ext["bandwidth"])
        ext_cap = parse_bytes(ext["capacity"])
    except (KeyError, TypeError):
        raise UnitError("cluster config missing external_fs.bandwidth/capacity") from None
    nodes: list[NodeSpec] = []
    for entry in raw.get("nodes", []):
        count = int(entry.get("count", 1))
        for _ in range(count):
            nodes.append(_node_from_dict(entry, len(nodes)))
    dfs = raw.get("distributed_fs")
    members = tuple(dfs["members"]) if dfs and "members" in dfs else (
        tuple(range(len(nodes))) if dfs else None)
    spec = ClusterSpec(
        nodes=tuple(nodes),
        external_fs_bw=ext_bw,
        external_fs_capacity=ext_cap,
        mode_switch_ns=parse_duration_ns(raw.get("mode_switch", "300s")),
        dfs_members=members,
        dfs_fraction=float(dfs.get("fraction", 1.0)) if dfs else 1.0,
    )
    return validate_cluster(spec)


def load_cluster(path) -> ClusterSpec:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UnitError(f"cluster config {path}: invalid JSON ({exc})") from None
    return cluster_from_dict(raw)


def uniform_cluster(n: int, *, bapm_per_node: int = 3 * 10**12,
                    flops_per_node: int = 2 * 10**12,
                    bapm_bw: int = 20 * 10**9,
                    dram_bw: int = 100 * 10**9,
                    link_bw: int = 12_500_000_000,
                    external_fs_bw: int = 100 * 10**9,
                    external_fs_capacity: int = 10**16,
                    mode_switch_ns: int = DEFAULT_MODE_SWITCH_NS,
                    dfs_members: tuple[int, ...] | None = None,
                    mode: MemoryMode = MemoryMode.SLM) -> ClusterSpec:
    """Homogeneous cluster helper used by scenarios and tests."""
    dimms_per_node = 6 * 2  # 6 B-APM DIMMs per socket, 2 sockets
    if bapm_per_node % dimms_per_node:
        raise NonPositiveParameter("bapm_per_node must split across 12 DIMMs")
    nodes = tuple(
        NodeSpec(
            node_id=i,
            dram_dimm_bytes=16 * 10**9,
            bapm_dimm_bytes=bapm_per_node // dimms_per_node,
            dram_dimms_per_socket=6,
            bapm_dimms_per_socket=6,
            dram_bw=dram_bw,
            bapm_bw=bapm_bw,
            flops=flops_per_node,
            link_bw=link_bw,
            initial_mode=mode,
        )
        for i in range(n)
    )
    return ClusterSpec(
        nodes=nodes,
        external_fs_bw=external_fs_bw,
        external_fs_capacity=external_fs_capacity,
        mode_switch_ns=mode_switch_ns,
        dfs_members=dfs_members,
    )
