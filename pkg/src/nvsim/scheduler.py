"""Job queueing, walltime-based reservation planning, allocation, cleanup.

Scheduling is plan-driven: every pass rebuilds a reservation schedule
from running jobs' walltime bounds, in queue order.  Under plain FCFS a
job may never be planned before an earlier one; with backfill, later
jobs may fill holes.  A job that would start ahead of a still-waiting
predecessor must additionally have zero footprint (no mode switches, no
data residue, no shared-bandwidth I/O), which is what makes conservative
backfill provably unable to delay the queue head when walltimes are
exact.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    AccessDenied,
    CyclicWorkflow,
    InfeasibleRequest,
    InsufficientCapacity,
    TierFull,
    UnknownDataset,
)
from .jobs import TIER_DFS, TIER_EXTERNAL, TIER_LOCAL, Job, Policy, Workflow
from .memory import MemoryMode
from .staging import check_access, stage_out


@dataclass(frozen=True)
class Plan:
    start: int
    nodes: tuple[int, ...]
    launch: int
    end: int


# --- submission ---------------------------------------------------------------

def validate_workflow(workflow: Workflow) -> None:
    members = set(workflow.job_ids)
    adj: dict[str, list[str]] = {j: [] for j in members}
    indeg = {j: 0 for j in members}
    for pred, succ in workflow.deps:
        if pred not in members or succ not in members:
            raise CyclicWorkflow(
                f"workflow {workflow.workflow_id}: dependency on non-member job")
        adj[pred].append(succ)
        indeg[succ] += 1
    ready = [j for j in sorted(members) if indeg[j] == 0]
    seen = 0
    while ready:
        j = ready.pop()
        seen += 1
        for s in adj[j]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if seen != len(members):
        raise CyclicWorkflow(f"workflow {workflow.workflow_id} has a cycle")


def validate_job_against_cluster(sim, job: Job) -> None:
    job.validate()
    if job.nodes_requested > len(sim.cluster.nodes):
        raise InfeasibleRequest(
            f"job {job.job_id}: requests {job.nodes_requested} nodes, "
            f"cluster has {len(sim.cluster.nodes)}")
    staged_to_node = 0
    for directive in job.stage_in:
        if directive.dataset_id in sim.storage.datasets:
            if directive.destination == "job-nodes":
                staged_to_node += sim.storage.dataset(directive.dataset_id).bytes
        elif directive.dataset_id in sim.promised_outputs:
            if directive.destination == "job-nodes":
                staged_to_node += sim.promised_outputs[directive.dataset_id]
        else:
            raise UnknownDataset(
                f"job {job.job_id}: stages unknown dataset "
                f"{directive.dataset_id!r}")
    max_cap = max((n.bapm_capacity for n in sim.cluster.nodes), default=0)
    if job.bapm_bytes_per_node + staged_to_node > max_cap:
        raise InfeasibleRequest(
            f"job {job.job_id}: {job.bapm_bytes_per_node + staged_to_node} bytes "
            f"per node exceeds the largest node B-APM ({max_cap})")
    if job.required_mode is MemoryMode.DLM and not any(
            n.dram_dimms_per_socket >= 1 and n.has_bapm for n in sim.cluster.nodes):
        raise InfeasibleRequest(f"job {job.job_id}: no node supports DLM")
    for did in job.inputs:
        if did in sim.storage.datasets:
            check_access(sim, job.owner, did)  # AccessDenied without a grant
        elif did not in sim.promised_outputs:
            raise UnknownDataset(f"job {job.job_id}: unknown input {did!r}")


def submit(sim, request, now: int | None = None) -> list[str]:
    """Queue a job or register a workflow; returns the queued/gated ids."""
    now = sim.engine.now if now is None else now
    if isinstance(request, Workflow):
        validate_workflow(request)
        sim.workflows[request.workflow_id] = request
        sim.emit("submit", workflow=request.workflow_id, status="registered")
        return [request.workflow_id]
    job: Job = request
    try:
        validate_job_against_cluster(sim, job)
    except (InfeasibleRequest, UnknownDataset, AccessDenied) as exc:
        jrt = sim.register_job(job, status="rejected")
        sim.emit("submit", job=job.job_id, status="rejected", reason=str(exc))
        raise
    jrt = sim.register_job(job)
    preds = sim.unmet_deps(job)
    if preds:
        jrt.status = "pending"
        sim.emit("submit", job=job.job_id, status="pending",
                 waiting_on=",".join(sorted(preds)))
    else:
        sim.enqueue(jrt, now)
        sim.emit("submit", job=job.job_id, status="queued")
    sim.request_schedule_pass()
    return [job.job_id]


# --- feasibility --------------------------------------------------------------

def need_bytes(sim, job: Job, nid: int) -> int:
    """Per-node B-APM bytes the job would occupy on this node: its demand
    (discounted by reusable replicas of its own workflow's inputs) plus
    inputs that would be staged onto it.  A node that must switch modes
    loses its resident data, so nothing there can be reused."""
    demand = job.bapm_bytes_per_node
    to_nodes = {d.dataset_id for d in job.stage_in if d.destination == "job-nodes"}
    survives = sim.nodes[nid].mode is job.required_mode
    reuse = 0
    staged = 0
    for did in job.inputs:
        ds = sim.storage.datasets.get(did)
        if ds is None:
            continue
        here = survives and any(
            r.node_id == nid and r.state == "resident" and not r.pending_scrub
            for r in ds.replicas)
        if here and ds.workflow_tag is not None and ds.workflow_tag == job.workflow_id:
            reuse += ds.bytes
        if did in to_nodes and not here:
            staged += ds.bytes
    return max(0, demand - reuse) + staged


def node_capable(sim, job: Job, nid: int) -> bool:
    spec = sim.cluster.node(nid)
    if job.required_mode is MemoryMode.DLM and spec.dram_dimms_per_socket < 1:
        return False
    if need_bytes(sim, job, nid) > spec.bapm_capacity:
        return False
    return True


def _resident_input_bytes(sim, job: Job, nid: int) -> int:
    total = 0
    for did in job.inputs:
        ds = sim.storage.datasets.get(did)
        if ds and any(r.node_id == nid and r.state == "resident"
                      and not r.pending_scrub for r in ds.replicas):
            total += ds.bytes
    return total


def score_nodes(sim, job: Job, candidates, policy: Policy) -> list[int]:
    """Rank feasible nodes for a job under the configured scorer."""
    if policy.scorer == "data-aware":
        return sorted(candidates,
                      key=lambda nid: (-_resident_input_bytes(sim, job, nid), nid))
    if policy.scorer == "energy-aware":
        def energy(nid):
            moved = sum(
                sim.storage.datasets[did].bytes
                for did in job.inputs
                if did in sim.storage.datasets
                and not any(r.node_id == nid and r.state == "resident"
                            and not r.pending_scrub
                            for r in sim.storage.datasets[did].replicas))
            switch = 1 if sim.nodes[nid].mode is not job.required_mode else 0
            return moved * policy.e_byte + switch * policy.e_switch
        return sorted(candidates, key=lambda nid: (energy(nid), nid))
    return sorted(candidates)


# --- planning ------------------------------------------------------------------

def _overlaps(intervals, start, end) -> bool:
    return any(s < end and start < e for s, e in intervals)


def plan_schedule(sim, policy: Policy, now: int) -> dict[str, Plan]:
    """Walltime-bound reservation schedule for every queued job, in order."""
    busy: dict[int, list[tuple[int, int]]] = {nid: [] for nid in sim.nodes}
    mode_tl: dict[int, list[tuple[int, MemoryMode]]] = {
        nid: [(-1, ns.mode)] for nid, ns in sim.nodes.items()}
    for nid, ns in sim.nodes.items():
        if ns.switch_until is not None and ns.switch_until > now:
            busy[nid].append((now, ns.switch_until))
            mode_tl[nid].append((ns.switch_until, ns.switch_target))
    for jrt in sim.jobs.values():
        if jrt.status not in ("allocated", "running"):
            continue
        release = jrt.release_bound(sim)
        for nid in jrt.nodes:
            busy[nid].append((jrt.alloc_ns, release))
            mode_tl[nid].append((jrt.alloc_ns, jrt.job.required_mode))

    def mode_at(nid: int, t: int) -> MemoryMode:
        mode = mode_tl[nid][0][1]
        for change_t, m in mode_tl[nid]:
            if change_t <= t:
                mode = m
        return mode

    plans: dict[str, Plan] = {}
    floor = now
    for jid in sim.queue:
        job = sim.jobs[jid].job
        capable = [nid for nid in sim.nodes if node_capable(sim, job, nid)]
        fits = [nid for nid in capable
                if sim.storage.node_pool_free(nid, 0) >= need_bytes(sim, job, nid)]
        plan = None
        if len(fits) >= job.nodes_requested and floor < (1 << 62):
            cands = sorted({floor} | {
                e for nid in fits for _, e in busy[nid] if e > floor})
            for t in cands:
                avail = []
                for nid in fits:
                    switch = (sim.cluster.mode_switch_ns
                              if mode_at(nid, t) is not job.required_mode else 0)
                    if _overlaps(busy[nid], t, t + switch + job.walltime_ns):
                        continue
                    avail.append((switch > 0,
                                  sim.storage.node_replica_bytes[nid] > 0,
                                  nid, switch))
                if len(avail) >= job.nodes_requested:
                    avail.sort()
                    chosen = avail[:job.nodes_requested]
                    launch = t + max(c[3] for c in chosen)
                    end = launch + job.walltime_ns
                    nodes = tuple(c[2] for c in chosen)
                    for nid in nodes:
                        busy[nid].append((t, end))
                        mode_tl[nid].append((t, job.required_mode))
                    plan = Plan(t, nodes, launch, end)
                    break
        if plan is not None:
            plans[jid] = plan
        if policy.algorithm == "fcfs":
            # strict order: nobody may start before an earlier queued job
            floor = plan.start if plan is not None else (1 << 62)
    return plans


def backfill_footprint_free(sim, job: Job) -> bool:
    """True when running the job early cannot perturb any other job: no
    retained or shared data, no staging, and only node-local I/O."""
    return (job.workflow_id is None
            and not job.retain_outputs
            and not job.inputs
            and not job.stage_in
            and all(p.tier == TIER_LOCAL for p in job.io_phases)
            and all(o.via == TIER_LOCAL and o.tier == TIER_LOCAL
                    for o in job.outputs))


def schedule_step(sim, policy: Policy | None = None, now: int | None = None) -> list[dict]:
    """One scheduling pass; starts every job whose planned start is now."""
    policy = sim.policy if policy is None else policy
    now = sim.engine.now if now is None else now
    plans = plan_schedule(sim, policy, now)
    allocations = []
    prefix_intact = True
    for jid in list(sim.queue):
        plan = plans.get(jid)
        if plan is None or plan.start != now:
            prefix_intact = False
            continue
        jrt = sim.jobs[jid]
        job = jrt.job
        jumping = not prefix_intact
        if jumping:
            if policy.algorithm != "fcfs-backfill":
                continue
            if not backfill_footprint_free(sim, job):
                continue
            if any(sim.nodes[nid].allocated_to is not None
                   or (sim.nodes[nid].switch_until is not None
                       and sim.nodes[nid].switch_until > now)
                   or sim.nodes[nid].mode is not job.required_mode
                   or sim.storage.node_replica_bytes[nid] != 0
                   for nid in plan.nodes):
                continue
            chosen = plan.nodes
        else:
            feasible = [
                nid for nid in sim.nodes
                if sim.nodes[nid].allocated_to is None
                and (sim.nodes[nid].switch_until is None
                     or sim.nodes[nid].switch_until <= now)
                and node_capable(sim, job, nid)
                and sim.storage.node_pool_free(nid, 0) >= need_bytes(sim, job, nid)
            ]
            if len(feasible) < job.nodes_requested:
                prefix_intact = False
                continue
            ranked = score_nodes(sim, job, feasible, policy)
            chosen = tuple(ranked[:job.nodes_requested])
        sim.allocate_job(jrt, chosen)
        allocations.append({"job": jid, "nodes": chosen})
    return allocations


# --- completion ----------------------------------------------------------------

def complete_job(sim, jrt, status: str, now: int | None = None,
                 reason: str | None = None) -> None:
    """Retention and cleanup when a job leaves the cluster."""
    now = sim.engine.now if now is None else now
    job = jrt.job
    jrt.status = status
    jrt.end_ns = now
    if reason is None:
        sim.emit("job_end", job=job.job_id, status=status)
    else:
        sim.emit("job_end", job=job.job_id, status=status, reason=reason)

    # release nodes and demand charges first; replicas stay accounted
    for nid in jrt.nodes:
        node = sim.nodes[nid]
        node.allocated_to = None
        node.charged_bytes -= jrt.charges.get(nid, 0)
        sim.log_occupancy(nid)
    jrt.charges = {}

    # unpin inputs; retained workflow data gets a fresh expiry
    for did in job.inputs:
        ds = sim.storage.datasets.get(did)
        if ds is None:
            continue
        retain = ds.workflow_tag is not None and ds.workflow_tag == job.workflow_id
        for rep in list(ds.replicas):
            rep.pinned_by.discard(job.job_id)
            if rep.state == "scrubbed" or not rep.on_node:
                continue
            if rep.staged_for == job.job_id or rep.node_id in jrt.nodes \
                    or (retain and rep.tier == TIER_DFS):
                if retain:
                    rep.staged_for = None
                    sim.set_retention(rep, now + sim.retention_ttl(job))
                elif rep.staged_for == job.job_id and rep.expiry_ns is None:
                    sim.request_scrub(rep, "cleanup")
        for rep in list(ds.replicas):
            sim.maybe_deferred_scrub(rep)

    # anonymous phase writes on B-APM tiers are scratch: wipe them
    for did in jrt.scratch_datasets:
        ds = sim.storage.datasets.get(did)
        if ds is None:
            continue
        for rep in list(ds.replicas):
            if rep.on_node:
                sim.request_scrub(rep, "cleanup")

    if status == "completed":
        _materialize_outputs(sim, jrt, now)

    # workflow bookkeeping: successors become ready on success
    if job.workflow_id is not None and status == "completed":
        sim.mark_done(job)
    sim.request_schedule_pass()


def _materialize_outputs(sim, jrt, now: int) -> None:
    job = jrt.job
    for out in job.outputs:
        ds = sim.storage.add_dataset(out.dataset_id, out.bytes, job.owner,
                                     workflow_tag=job.workflow_id)
        retained = job.workflow_id is not None or job.retain_outputs
        if not retained and out.tier != TIER_EXTERNAL:
            # transient scratch product: it never outlives the job
            continue
        replica = _place_output(sim, jrt, out)
        if replica is None:
            continue
        if retained:
            sim.set_retention(replica, now + sim.retention_ttl(job))
        if out.tier == TIER_EXTERNAL and replica.tier != TIER_EXTERNAL:
            sim.track_stage_out(jrt, stage_out(sim, replica, retain=retained,
                                               job_id=job.job_id))


def _place_output(sim, jrt, out):
    """Materialize an output on its via tier; spill to the external FS when
    the job's own nodes cannot hold it."""
    if out.via == TIER_DFS:
        try:
            member = sim.storage.choose_dfs_member(out.bytes, sim.charged_of)
            rep = sim.storage.place_replica(out.dataset_id, TIER_DFS, member)
            sim.log_occupancy(member)
            return rep
        except (TierFull, InsufficientCapacity):
            pass
    else:
        for nid in sorted(jrt.nodes,
                          key=lambda n: (-sim.storage.node_pool_free(n, sim.charged_of(n)), n)):
            if sim.storage.node_pool_free(nid, sim.charged_of(nid)) >= out.bytes:
                rep = sim.storage.place_replica(out.dataset_id, TIER_LOCAL, nid)
                sim.log_occupancy(nid)
                return rep
    # spill: archive straight to the external filesystem
    return sim.storage.place_replica(out.dataset_id, TIER_EXTERNAL, None)
