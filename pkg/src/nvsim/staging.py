"""Data-scheduler operations: staging, node-to-node moves, access paths.

All movement is asynchronous: each operation registers transfers with
the engine and returns immediately; completion callbacks update replica
states.  Staging replicas hold destination capacity from the moment the
transfer starts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AccessDenied, InsufficientCapacity, UnknownDataset
from .jobs import TIER_DFS, TIER_EXTERNAL, TIER_LOCAL
from .storage import (
    Replica,
    io_read_resources,
    min_path_bandwidth,
    move_resources,
    stage_in_resources,
    stage_out_resources,
)

SECOND_NS = 10**9


@dataclass(frozen=True)
class AccessPath:
    kind: str                    # local | remote-bapm | external
    reader_node: int
    replica: Replica | None     # None for the external fallback

    @property
    def source_node(self) -> int | None:
        return self.replica.node_id if self.replica is not None else None


def check_access(sim, principal: str, dataset_id: str) -> None:
    ds = sim.storage.dataset(dataset_id)
    if ds.owner == principal:
        return
    if principal in sim.grants.get(ds.owner, ()):
        return
    raise AccessDenied(
        f"{principal!r} may not access dataset {dataset_id!r} owned by {ds.owner!r}")


def _location(replica: Replica | None) -> str:
    if replica is None or replica.tier == TIER_EXTERNAL:
        return TIER_EXTERNAL
    if replica.tier == TIER_DFS:
        return f"{TIER_DFS}:{replica.node_id}"
    return f"node:{replica.node_id}"


def pick_source(ds) -> Replica:
    """Node replicas are preferred over the external copy (lowest id wins)."""
    node_reps = sorted(
        (r for r in ds.resident_replicas() if r.on_node and not r.pending_scrub),
        key=lambda r: r.node_id)
    if node_reps:
        return node_reps[0]
    for rep in ds.resident_replicas():
        if rep.tier == TIER_EXTERNAL:
            return rep
    raise UnknownDataset(f"dataset {ds.dataset_id!r} has no readable replica")


def ideal_ns(sim, nbytes: int, resources: tuple[str, ...]) -> int:
    """Uncontended transfer duration, the baseline for slowdown metrics."""
    bw = min_path_bandwidth(sim.cluster, resources)
    return -(-nbytes * SECOND_NS // bw)


def stage_in(sim, dataset_id: str, destination: str, dest_node: int | None = None,
             job=None):
    """Copy a dataset onto a node or the distributed FS; source is retained.

    Returns the started transfers ([] when the data is already in place).
    """
    ds = sim.storage.dataset(dataset_id)
    if job is not None:
        check_access(sim, job.owner, dataset_id)
    if destination == TIER_DFS:
        for rep in ds.resident_replicas():
            if rep.tier == TIER_DFS:
                return []
        member = sim.storage.choose_dfs_member(ds.bytes, sim.charged_of)
        dst_tier, dst_node = TIER_DFS, member
    else:
        if dest_node is None:
            raise InsufficientCapacity("stage_in to a node needs a node id")
        for rep in ds.resident_replicas():
            if rep.node_id == dest_node and not rep.pending_scrub:
                return []
        if not sim.cluster.node(dest_node).has_bapm:
            raise InsufficientCapacity(f"node {dest_node} has no B-APM")
        if sim.storage.node_pool_free(dest_node, sim.charged_of(dest_node)) < ds.bytes:
            raise InsufficientCapacity(
                f"node {dest_node} cannot hold {ds.bytes} bytes of {dataset_id!r}")
        dst_tier, dst_node = TIER_LOCAL, dest_node
    source = pick_source(ds)
    replica = sim.storage.place_replica(
        dataset_id, dst_tier, dst_node, state="staging",
        staged_for=job.job_id if job is not None else None)
    sim.log_occupancy(dst_node)
    resources = stage_in_resources(source.node_id, dst_node)
    payload = {
        "dataset": dataset_id,
        "src": _location(source),
        "dst": _location(replica),
    }
    if job is not None:
        payload["job"] = job.job_id

    def done(transfer):
        replica.state = "resident"
        sim.on_stage_in_done(job, transfer, replica)

    transfer = sim.engine.start_transfer(ds.bytes, resources, "stage", payload, done)
    return [transfer]


def stage_out(sim, replica: Replica, retain: bool, job_id: str | None = None):
    """Copy a node/DFS replica to the external FS; scrub the source unless
    it is retained for a workflow."""
    ds = sim.storage.dataset(replica.dataset_id)
    for rep in ds.resident_replicas():
        if rep.tier == TIER_EXTERNAL:
            # already archived; just drop the source if transient
            if not retain:
                sim.request_scrub(replica, "cleanup")
            return None
    dst = sim.storage.place_replica(replica.dataset_id, TIER_EXTERNAL, None,
                                    state="staging")
    payload = {"dataset": replica.dataset_id, "src": _location(replica),
               "dst": TIER_EXTERNAL}
    if job_id is not None:
        payload["job"] = job_id

    def done(transfer):
        dst.state = "resident"
        if not retain:
            sim.request_scrub(replica, "staged-out")
        sim.on_stage_out_done(job_id, transfer)

    return sim.engine.start_transfer(
        ds.bytes, stage_out_resources(replica.node_id), "stage", payload, done)


def move_intra_cluster(sim, dataset_id: str, src_node: int, dst_node: int,
                       job=None):
    """Move a dataset between nodes; the source is scrubbed on completion
    unless retained.  src == dst is a zero-duration no-op."""
    ds = sim.storage.dataset(dataset_id)
    if job is not None:
        check_access(sim, job.owner, dataset_id)
    if src_node == dst_node:
        return None
    src = None
    for rep in ds.resident_replicas():
        if rep.node_id == src_node:
            src = rep
            break
    if src is None:
        raise UnknownDataset(f"dataset {dataset_id!r} has no replica on node {src_node}")
    if not sim.cluster.node(dst_node).has_bapm:
        raise InsufficientCapacity(f"node {dst_node} has no B-APM")
    if sim.storage.node_pool_free(dst_node, sim.charged_of(dst_node)) < ds.bytes:
        raise InsufficientCapacity(f"node {dst_node} cannot hold {ds.bytes} bytes")
    dst = sim.storage.place_replica(dataset_id, TIER_LOCAL, dst_node, state="staging")
    sim.log_occupancy(dst_node)
    payload = {"dataset": dataset_id, "src": _location(src), "dst": _location(dst)}
    if job is not None:
        payload["job"] = job.job_id

    def done(transfer):
        dst.state = "resident"
        retained = src.expiry_ns is not None
        if not retained:
            sim.request_scrub(src, "moved")

    return sim.engine.start_transfer(
        ds.bytes, move_resources(src_node, dst_node), "stage", payload, done)


def resolve_access(sim, job, dataset_id: str, node: int) -> AccessPath | None:
    """Pick the cheapest readable copy: local, then the remote B-APM replica
    with the fewest concurrent readers (ties to the lowest node id), then
    the external FS.  None means the data is gone everywhere."""
    check_access(sim, job.owner, dataset_id)
    ds = sim.storage.dataset(dataset_id)
    candidates = [r for r in ds.resident_replicas() if not r.pending_scrub]
    external = None
    remote = []
    for rep in candidates:
        if rep.tier == TIER_EXTERNAL:
            external = rep
        elif rep.node_id == node:
            return AccessPath("local", node, rep)
        else:
            remote.append(rep)
    if remote:
        best = min(remote, key=lambda r: (r.active_readers, r.node_id))
        return AccessPath("remote-bapm", node, best)
    if external is not None:
        return AccessPath("external", node, external)
    return None


def read_resources(path: AccessPath) -> tuple[str, ...]:
    if path.kind == "external":
        return io_read_resources(path.reader_node, None)
    return io_read_resources(path.reader_node, path.source_node)
