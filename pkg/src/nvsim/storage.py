"""Storage tiers, datasets, replicas, and transfer path bottlenecks.

Three tiers exist: per-node local filesystems and the distributed
filesystem both live on node B-APM (so their replicas debit the owning
node's capacity pool), while the external filesystem is a single
aggregate pool.  Replication is whole-dataset; a staging replica holds
its capacity from the moment the transfer starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cluster import ClusterSpec
from .errors import (
    InsufficientCapacity,
    MemberWithoutBapm,
    TierFull,
    UnknownDataset,
)
from .jobs import TIER_DFS, TIER_EXTERNAL, TIER_LOCAL

# engine resource ids
EXT_RID = "ext"


def link_rid(node_id: int) -> str:
    return f"link:{node_id}"


def bapm_rid(node_id: int) -> str:
    return f"bapm:{node_id}"


@dataclass
class Replica:
    dataset_id: str
    tier: str                   # local-fs | distributed-fs | external-fs
    node_id: int | None         # physical resident node for B-APM tiers
    bytes: int
    state: str = "resident"     # staging | resident | scrubbed
    expiry_ns: int | None = None
    staged_for: str | None = None   # job that caused this replica to exist
    pinned_by: set = field(default_factory=set)
    active_readers: int = 0
    pending_scrub: bool = False

    @property
    def on_node(self) -> bool:
        return self.node_id is not None


@dataclass
class DataSet:
    dataset_id: str
    bytes: int
    owner: str
    workflow_tag: str | None = None
    replicas: list[Replica] = field(default_factory=list)

    def resident_replicas(self):
        return [r for r in self.replicas if r.state == "resident"]


def mount_distributed_fs(cluster: ClusterSpec, members: tuple[int, ...],
                         fraction: float = 1.0) -> int:
    """Validate membership and return the tier's byte capacity."""
    capacity = 0
    for nid in members:
        node = cluster.node(nid)
        if not node.has_bapm:
            raise MemberWithoutBapm(f"node {nid} has no B-APM DIMMs")
        capacity += int(node.bapm_capacity * fraction)
    return capacity


class StorageState:
    """Capacity accounting for every tier plus the dataset/replica registry."""

    def __init__(self, cluster: ClusterSpec):
        self.cluster = cluster
        self.datasets: dict[str, DataSet] = {}
        self.node_replica_bytes = {n.node_id: 0 for n in cluster.nodes}
        self.local_used = {n.node_id: 0 for n in cluster.nodes}
        self.external_used = 0
        self.scrubbed_bytes = {n.node_id: 0 for n in cluster.nodes}
        if cluster.dfs_members is not None:
            self.dfs_members: tuple[int, ...] | None = tuple(cluster.dfs_members)
            self.dfs_capacity = mount_distributed_fs(
                cluster, self.dfs_members, cluster.dfs_fraction)
        else:
            self.dfs_members = None
            self.dfs_capacity = 0
        self.dfs_used = 0

    # --- capacity queries ----------------------------------------------------

    def node_pool_free(self, node_id: int, charged: int) -> int:
        cap = self.cluster.node(node_id).bapm_capacity
        return cap - self.node_replica_bytes[node_id] - charged

    def dataset(self, dataset_id: str) -> DataSet:
        try:
            return self.datasets[dataset_id]
        except KeyError:
            raise UnknownDataset(f"dataset {dataset_id!r} not declared") from None

    def add_dataset(self, dataset_id: str, nbytes: int, owner: str,
                    workflow_tag: str | None = None) -> DataSet:
        ds = self.datasets.get(dataset_id)
        if ds is None:
            ds = DataSet(dataset_id, nbytes, owner, workflow_tag)
            self.datasets[dataset_id] = ds
        return ds

    # --- replica lifecycle ----------------------------------------------------

    def _debit(self, tier: str, node_id: int | None, nbytes: int) -> None:
        if tier == TIER_EXTERNAL:
            if self.external_used + nbytes > self.cluster.external_fs_capacity:
                raise TierFull("external filesystem capacity exceeded")
            self.external_used += nbytes
            return
        if tier == TIER_DFS:
            if self.dfs_members is None:
                raise TierFull("no distributed filesystem is mounted")
            if self.dfs_used + nbytes > self.dfs_capacity:
                raise TierFull("distributed filesystem capacity exceeded")
            self.dfs_used += nbytes
        else:
            self.local_used[node_id] += nbytes
        self.node_replica_bytes[node_id] += nbytes

    def _credit(self, replica: Replica) -> None:
        if replica.tier == TIER_EXTERNAL:
            self.external_used -= replica.bytes
            return
        if replica.tier == TIER_DFS:
            self.dfs_used -= replica.bytes
        else:
            self.local_used[replica.node_id] -= replica.bytes
        self.node_replica_bytes[replica.node_id] -= replica.bytes

    def place_replica(self, dataset_id: str, tier: str, node_id: int | None,
                      state: str = "resident", staged_for: str | None = None) -> Replica:
        ds = self.dataset(dataset_id)
        self._debit(tier, node_id, ds.bytes)
        replica = Replica(dataset_id, tier, node_id, ds.bytes, state=state,
                          staged_for=staged_for)
        ds.replicas.append(replica)
        return replica

    def scrub_replica(self, replica: Replica) -> None:
        if replica.state == "scrubbed":
            return
        self._credit(replica)
        if replica.on_node:
            self.scrubbed_bytes[replica.node_id] += replica.bytes
        replica.state = "scrubbed"
        replica.pinned_by.clear()
        ds = self.datasets[replica.dataset_id]
        ds.replicas.remove(replica)

    def abort_staging(self, replica: Replica) -> None:
        """Release a partially staged replica without counting it scrubbed."""
        if replica.state != "staging":
            return
        self._credit(replica)
        replica.state = "scrubbed"
        self.datasets[replica.dataset_id].replicas.remove(replica)

    # --- placement -------------------------------------------------------------

    def choose_dfs_member(self, nbytes: int, charged_of) -> int:
        """Member with most free pool space (ties to the lowest id)."""
        if self.dfs_members is None:
            raise TierFull("no distributed filesystem is mounted")
        best = None
        best_free = None
        for nid in sorted(self.dfs_members):
            free = self.node_pool_free(nid, charged_of(nid))
            if free >= nbytes and (best_free is None or free > best_free):
                best, best_free = nid, free
        if best is None:
            raise InsufficientCapacity(
                f"no distributed-fs member can hold {nbytes} bytes")
        return best

    def replicas_on_node(self, node_id: int):
        out = []
        for ds in self.datasets.values():
            for rep in ds.replicas:
                if rep.node_id == node_id and rep.state != "scrubbed":
                    out.append(rep)
        return out


# --- transfer bottleneck sets --------------------------------------------------

def stage_in_resources(src_node: int | None, dst_node: int) -> tuple[str, ...]:
    """external/node source -> node B-APM: source share, dst link, dst ingest."""
    if src_node is None:
        return (EXT_RID, link_rid(dst_node), bapm_rid(dst_node))
    if src_node == dst_node:
        return (bapm_rid(dst_node),)
    return (bapm_rid(src_node), link_rid(src_node),
            link_rid(dst_node), bapm_rid(dst_node))


def stage_out_resources(src_node: int) -> tuple[str, ...]:
    return (bapm_rid(src_node), link_rid(src_node), EXT_RID)


def move_resources(src_node: int, dst_node: int) -> tuple[str, ...]:
    return (link_rid(src_node), link_rid(dst_node), bapm_rid(dst_node))


def io_read_resources(reader_node: int, replica_node: int | None) -> tuple[str, ...]:
    if replica_node is None:
        return (link_rid(reader_node), EXT_RID)
    if replica_node == reader_node:
        return (bapm_rid(reader_node),)
    return (bapm_rid(replica_node), link_rid(replica_node), link_rid(reader_node))


def io_write_resources(writer_node: int, target_node: int | None) -> tuple[str, ...]:
    if target_node is None:
        return (link_rid(writer_node), EXT_RID)
    if target_node == writer_node:
        return (bapm_rid(writer_node),)
    return (link_rid(writer_node), link_rid(target_node), bapm_rid(target_node))


def min_path_bandwidth(cluster: ClusterSpec, resources: tuple[str, ...]) -> int:
    """Uncontended line rate of a path; the ideal-time baseline for metrics."""
    caps = []
    for rid in resources:
        if rid == EXT_RID:
            caps.append(cluster.external_fs_bw)
        else:
            kind, nid = rid.split(":")
            node = cluster.node(int(nid))
            caps.append(node.link_bw if kind == "link" else node.bapm_bw)
    return min(caps)
