"""Simulation orchestration: node state, job lifecycle, event wiring.

One Simulation owns one engine, one cluster's node states, the storage
registry, and the scheduler queue.  Everything advances strictly through
engine events; a run is single-threaded and fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import scheduler
from .cluster import ClusterSpec, validate_cluster
from .engine import Engine, Trace
from .errors import (
    AccessDenied,
    InfeasibleRequest,
    InsufficientCapacity,
    NodeBusy,
    SimulationError,
    TierFull,
    UnknownDataset,
    WorkloadError,
)
from .jobs import TIER_DFS, TIER_EXTERNAL, TIER_LOCAL, Job, Policy, Workflow
from .memory import MemoryMode, check_mode_supported, dlm_slowdown
from .staging import (
    ideal_ns,
    read_resources,
    resolve_access,
    stage_in,
)
from .storage import (
    StorageState,
    bapm_rid,
    io_read_resources,
    io_write_resources,
    link_rid,
    EXT_RID,
)
from .units import SECOND_NS

DEFAULT_RETENTION_TTL_NS = 24 * 3600 * SECOND_NS


@dataclass
class NodeState:
    spec: object
    mode: MemoryMode
    switch_until: int | None = None
    switch_target: MemoryMode | None = None
    allocated_to: str | None = None
    charged_bytes: int = 0


@dataclass
class JobRuntime:
    job: Job
    submit_seq: int
    status: str = "registered"   # pending|queued|allocated|running|completed|timeout|failed|rejected
    ready_ns: int | None = None
    alloc_ns: int | None = None
    start_ns: int | None = None
    end_ns: int | None = None
    nodes: tuple[int, ...] = ()
    primary: int | None = None
    charges: dict = field(default_factory=dict)
    pending_switches: set = field(default_factory=set)
    staging_started: bool = False
    pending_stage: dict = field(default_factory=dict)   # tid -> (transfer, replica)
    active_io: dict = field(default_factory=dict)       # tid -> (spec, transfer)
    groups: list = field(default_factory=list)
    group_idx: int = 0
    compute_progress: int = 0
    compute_epoch: int = 0
    io_block_since: int | None = None
    group_ideal: int = 0
    io_wall_ns: int = 0
    io_ideal_ns: int = 0
    scratch_datasets: list = field(default_factory=list)
    stage_out_tids: set = field(default_factory=set)
    last_dfs_node: int | None = None
    dlm_factor: Fraction = Fraction(1)

    def release_bound(self, sim) -> int:
        """Latest possible node release: walltime past the (projected) start."""
        if self.start_ns is not None:
            return self.start_ns + self.job.walltime_ns
        base = self.alloc_ns if self.alloc_ns is not None else sim.engine.now
        for nid in self.pending_switches:
            su = sim.nodes[nid].switch_until
            if su is not None and su > base:
                base = su
        return base + self.job.walltime_ns


class Simulation:
    def __init__(self, cluster: ClusterSpec, workload=None, policy: Policy | None = None,
                 seed: int = 0, check_invariants: bool = False,
                 gate_staging: bool = True,
                 default_retention_ttl_ns: int = DEFAULT_RETENTION_TTL_NS):
        self.cluster = validate_cluster(cluster)
        self.policy = policy if policy is not None else Policy()
        self.seed = seed
        self.gate_staging = gate_staging
        self.default_retention_ttl_ns = default_retention_ttl_ns
        hook = self._check_invariants if check_invariants else None
        self.engine = Engine(post_event_hook=hook)
        self.nodes = {
            n.node_id: NodeState(spec=n, mode=n.initial_mode) for n in cluster.nodes}
        self.storage = StorageState(cluster)
        for node in cluster.nodes:
            self.engine.add_resource(link_rid(node.node_id), node.link_bw)
            self.engine.add_resource(bapm_rid(node.node_id), node.bapm_bw)
        self.engine.add_resource(EXT_RID, cluster.external_fs_bw)
        self.grants: dict[str, tuple[str, ...]] = {}
        self.workflows: dict[str, Workflow] = {}
        self.jobs: dict[str, JobRuntime] = {}
        self.promised_outputs: dict[str, int] = {}
        self.queue: list[str] = []
        self.occupancy_log: list[tuple[int, int, int]] = []
        self.switch_count = 0
        self.bytes_moved = 0
        self._scratch_seq = 0
        self._pass_pending_at: int | None = None
        if workload is not None:
            self._load_workload(workload)

    # --- setup ------------------------------------------------------------------

    def _load_workload(self, workload) -> None:
        self.grants = {owner: tuple(who) for owner, who in workload.grants.items()}
        for job in workload.jobs:
            for out in job.outputs:
                self.promised_outputs[out.dataset_id] = out.bytes
        for ds in workload.datasets:
            self.storage.add_dataset(ds.dataset_id, ds.bytes, ds.owner, ds.workflow)
            if ds.location == TIER_EXTERNAL:
                self.storage.place_replica(ds.dataset_id, TIER_EXTERNAL, None)
            elif ds.location == TIER_DFS:
                member = self.storage.choose_dfs_member(ds.bytes, self.charged_of)
                self.storage.place_replica(ds.dataset_id, TIER_DFS, member)
            else:
                nid = ds.location_node
                if self.storage.node_pool_free(nid, 0) < ds.bytes:
                    raise WorkloadError(
                        f"dataset {ds.dataset_id!r} does not fit on node {nid}")
                self.storage.place_replica(ds.dataset_id, TIER_LOCAL, nid)
        for wf in workload.workflows:
            self.engine.schedule(0, lambda w=wf: scheduler.submit(self, w))
        for job in workload.jobs:
            self.engine.schedule(job.submit_ns,
                                 lambda j=job: self._submit_from_workload(j))

    def _submit_from_workload(self, job: Job) -> None:
        try:
            scheduler.submit(self, job)
        except (InfeasibleRequest, UnknownDataset, AccessDenied):
            pass  # recorded as a rejected submit event

    def run(self, until: int | None = None) -> Trace:
        return self.engine.run(until)

    # --- small infrastructure -----------------------------------------------------

    def emit(self, kind: str, **payload):
        return self.engine.emit(kind, **payload)

    def charged_of(self, nid: int) -> int:
        return self.nodes[nid].charged_bytes

    def log_occupancy(self, nid: int | None) -> None:
        if nid is None:
            return
        used = self.storage.node_replica_bytes[nid] + self.nodes[nid].charged_bytes
        self.occupancy_log.append((self.engine.now, nid, used))

    def request_schedule_pass(self) -> None:
        if self._pass_pending_at == self.engine.now:
            return
        self._pass_pending_at = self.engine.now
        self.engine.schedule(self.engine.now, self._run_pass)

    def _run_pass(self) -> None:
        self._pass_pending_at = None
        scheduler.schedule_step(self, self.policy, self.engine.now)

    def register_job(self, job: Job, status: str = "registered") -> JobRuntime:
        if job.job_id in self.jobs:
            raise WorkloadError(f"duplicate job id {job.job_id!r}")
        jrt = JobRuntime(job=job, submit_seq=len(self.jobs), status=status)
        self.jobs[job.job_id] = jrt
        if status != "rejected":
            for out in job.outputs:
                self.promised_outputs[out.dataset_id] = out.bytes
        return jrt

    def enqueue(self, jrt: JobRuntime, now: int) -> None:
        jrt.ready_ns = now
        jrt.status = "queued"
        self.queue.append(jrt.job.job_id)
        self.queue.sort(key=lambda jid: (self.jobs[jid].ready_ns,
                                         self.jobs[jid].submit_seq))

    def unmet_deps(self, job: Job) -> set[str]:
        if job.workflow_id is None:
            return set()
        wf = self.workflows.get(job.workflow_id)
        if wf is None:
            return set()
        unmet = set()
        for pred, succ in wf.deps:
            if succ != job.job_id:
                continue
            prt = self.jobs.get(pred)
            if prt is None or prt.status != "completed":
                unmet.add(pred)
        return unmet

    def mark_done(self, job: Job) -> None:
        wf = self.workflows.get(job.workflow_id)
        if wf is None:
            return
        for pred, succ in wf.deps:
            if pred != job.job_id:
                continue
            srt = self.jobs.get(succ)
            if srt is not None and srt.status == "pending" \
                    and not self.unmet_deps(srt.job):
                self.enqueue(srt, self.engine.now)

    def retention_ttl(self, job: Job) -> int:
        if job.workflow_id is not None and job.workflow_id in self.workflows:
            return self.workflows[job.workflow_id].retention_ttl_ns
        return self.default_retention_ttl_ns

    # --- replica retention / scrubbing ----------------------------------------------

    def set_retention(self, replica, expiry_ns: int) -> None:
        if replica.expiry_ns is not None and replica.expiry_ns >= expiry_ns:
            return
        replica.expiry_ns = expiry_ns
        self.engine.schedule(expiry_ns,
                             lambda: self._on_expiry(replica, expiry_ns))

    def _on_expiry(self, replica, scheduled_ns: int) -> None:
        if replica.state == "scrubbed" or replica.expiry_ns != scheduled_ns:
            return
        self.emit("expiry", dataset=replica.dataset_id, node=replica.node_id,
                  tier=replica.tier)
        self.request_scrub(replica, "expired")
        self.request_schedule_pass()

    def request_scrub(self, replica, reason: str) -> None:
        if replica.state == "scrubbed":
            return
        if replica.pinned_by or replica.active_readers > 0:
            replica.pending_scrub = True
            replica.pending_reason = reason
            return
        self._do_scrub(replica, reason)

    def maybe_deferred_scrub(self, replica) -> None:
        if replica.state != "scrubbed" and replica.pending_scrub \
                and not replica.pinned_by and replica.active_readers == 0:
            self._do_scrub(replica, getattr(replica, "pending_reason", "expired"))

    def force_scrub(self, replica, reason: str) -> None:
        if replica.state != "scrubbed":
            self._do_scrub(replica, reason)

    def _do_scrub(self, replica, reason: str) -> None:
        nid = replica.node_id
        self.emit("scrub", dataset=replica.dataset_id, node=nid,
                  tier=replica.tier, bytes=replica.bytes, reason=reason)
        self.storage.scrub_replica(replica)
        self.log_occupancy(nid)

    def _release_reader(self, replica) -> None:
        if replica.state == "scrubbed":
            return
        replica.active_readers -= 1
        self.maybe_deferred_scrub(replica)

    # --- memory modes ------------------------------------------------------------------

    def set_mode(self, nid: int, mode: MemoryMode) -> None:
        """Operator-initiated mode change on an idle node."""
        node = self.nodes[nid]
        if node.allocated_to is not None or (
                node.switch_until is not None and node.switch_until > self.engine.now):
            raise NodeBusy(f"node {nid} is busy")
        check_mode_supported(node.spec, mode)
        if node.mode is mode:
            self.emit("mode_switch_start", node=nid, frm=mode.value, to=mode.value)
            self.emit("mode_switch_end", node=nid, mode=mode.value)
            return
        self._begin_switch(nid, mode, job_id=None)

    def _begin_switch(self, nid: int, mode: MemoryMode, job_id: str | None) -> None:
        node = self.nodes[nid]
        check_mode_supported(node.spec, mode)
        payload = {"node": nid, "frm": node.mode.value, "to": mode.value}
        if job_id is not None:
            payload["job"] = job_id
        self.emit("mode_switch_start", **payload)
        self.switch_count += 1
        # reconfiguration wipes the module: every resident replica dies
        for rep in list(self.storage.replicas_on_node(nid)):
            self.force_scrub(rep, "mode-switch")
        node.switch_until = self.engine.now + self.cluster.mode_switch_ns
        node.switch_target = mode
        self.engine.schedule(node.switch_until, lambda: self._on_switch_end(nid))

    def _on_switch_end(self, nid: int) -> None:
        node = self.nodes[nid]
        node.mode = node.switch_target
        node.switch_until = None
        node.switch_target = None
        self.emit("mode_switch_end", node=nid, mode=node.mode.value)
        jid = node.allocated_to
        if jid is not None:
            jrt = self.jobs[jid]
            jrt.pending_switches.discard(nid)
            if not jrt.pending_switches and jrt.status == "allocated":
                self._start_staging(jrt)
        else:
            self.request_schedule_pass()

    # --- allocation & job pipeline --------------------------------------------------------

    def allocate_job(self, jrt: JobRuntime, nodes: tuple[int, ...]) -> None:
        job = jrt.job
        now = self.engine.now
        self.queue.remove(job.job_id)
        jrt.status = "allocated"
        jrt.alloc_ns = now
        jrt.nodes = tuple(nodes)
        jrt.primary = nodes[0]
        for nid in nodes:
            node = self.nodes[nid]
            charge = self._charged_demand(job, nid)
            node.allocated_to = job.job_id
            node.charged_bytes += charge
            jrt.charges[nid] = charge
            self.log_occupancy(nid)
        self.emit("allocate", job=job.job_id,
                  nodes=",".join(str(n) for n in nodes),
                  modes=",".join(self.nodes[n].mode.value for n in nodes),
                  dfs=self.storage.dfs_members is not None)
        for did in job.inputs:
            ds = self.storage.datasets.get(did)
            if ds is None:
                continue
            for rep in ds.replicas:
                if rep.state != "scrubbed":
                    rep.pinned_by.add(job.job_id)
        switches = [nid for nid in nodes
                    if self.nodes[nid].mode is not job.required_mode]
        jrt.pending_switches = set(switches)
        for nid in switches:
            self._begin_switch(nid, job.required_mode, job_id=job.job_id)
        if not switches:
            self._start_staging(jrt)

    def _charged_demand(self, job: Job, nid: int) -> int:
        demand = job.bapm_bytes_per_node
        if self.nodes[nid].mode is not job.required_mode:
            return demand  # resident data will not survive the switch
        reuse = 0
        for did in job.inputs:
            ds = self.storage.datasets.get(did)
            if ds is None or ds.workflow_tag is None \
                    or ds.workflow_tag != job.workflow_id:
                continue
            if any(r.node_id == nid and r.state == "resident"
                   and not r.pending_scrub for r in ds.replicas):
                reuse += ds.bytes
        return max(0, demand - reuse)

    def _start_staging(self, jrt: JobRuntime) -> None:
        if jrt.staging_started or jrt.status != "allocated":
            return
        jrt.staging_started = True
        job = jrt.job
        for directive in job.stage_in:
            dest_node = jrt.primary if directive.destination == "job-nodes" else None
            try:
                transfers = stage_in(self, directive.dataset_id,
                                     directive.destination, dest_node, job)
            except (InsufficientCapacity, TierFull, UnknownDataset,
                    AccessDenied) as exc:
                self._fail(jrt, str(exc))
                return
            if self.gate_staging:
                for t in transfers:
                    jrt.pending_stage[t.tid] = t
        self._maybe_launch(jrt)

    def on_stage_in_done(self, job: Job | None, transfer, replica) -> None:
        self.log_occupancy(replica.node_id)
        if job is None:
            return
        replica.pinned_by.add(job.job_id)
        jrt = self.jobs.get(job.job_id)
        if jrt is None:
            return
        jrt.pending_stage.pop(transfer.tid, None)
        self.bytes_moved += transfer.size
        if jrt.status == "allocated":
            self._maybe_launch(jrt)

    def on_stage_out_done(self, job_id: str | None, transfer) -> None:
        self.bytes_moved += transfer.size
        if job_id is not None and job_id in self.jobs:
            self.jobs[job_id].stage_out_tids.discard(transfer.tid)
        self.request_schedule_pass()

    def track_stage_out(self, jrt: JobRuntime, transfer) -> None:
        if transfer is not None:
            jrt.stage_out_tids.add(transfer.tid)

    def _maybe_launch(self, jrt: JobRuntime) -> None:
        if jrt.status != "allocated" or jrt.pending_switches:
            return
        if not jrt.staging_started or jrt.pending_stage:
            return
        self._launch(jrt)

    def _launch(self, jrt: JobRuntime) -> None:
        job = jrt.job
        now = self.engine.now
        jrt.status = "running"
        jrt.start_ns = now
        self.emit("job_start", job=job.job_id,
                  nodes=",".join(str(n) for n in jrt.nodes))
        if job.required_mode is MemoryMode.DLM:
            jrt.dlm_factor = dlm_slowdown(self.nodes[jrt.primary].spec,
                                          job.dlm_hit_rate)
        offsets: dict[int, list] = {}
        for phase in job.io_phases:
            offsets.setdefault(phase.offset_ns, []).append(phase)
        jrt.groups = sorted(offsets.items())
        deadline = now + job.walltime_ns
        self.engine.schedule(deadline, lambda: self._kill(jrt, deadline))
        specs = []
        for did in job.inputs:
            try:
                path = resolve_access(self, job, did, jrt.primary)
            except AccessDenied as exc:
                self._fail(jrt, str(exc))
                return
            if path is None:
                self._fail(jrt, f"data lost: no replica of {did!r} remains")
                return
            ds = self.storage.dataset(did)
            resources = read_resources(path)
            tier = path.replica.tier if path.replica is not None else TIER_EXTERNAL
            path.replica.active_readers += 1
            specs.append({
                "bytes": ds.bytes,
                "resources": resources,
                "replica": path.replica,
                "payload": {"job": job.job_id, "dataset": did, "direction": "read",
                            "tier": tier, "path": path.kind, "node": jrt.primary,
                            "ideal_ns": ideal_ns(self, ds.bytes, resources)},
            })
        if specs:
            self._start_io_group(jrt, specs)
        else:
            self._advance_compute(jrt)

    def _start_io_group(self, jrt: JobRuntime, specs: list[dict]) -> None:
        jrt.io_block_since = self.engine.now
        jrt.group_ideal = max(spec["payload"]["ideal_ns"] for spec in specs)
        for spec in specs:
            transfer = self.engine.start_transfer(
                spec["bytes"], spec["resources"], "io", spec["payload"],
                on_complete=lambda t, s=spec: self._on_io_done(jrt, s, t))
            jrt.active_io[transfer.tid] = (spec, transfer)

    def _on_io_done(self, jrt: JobRuntime, spec: dict, transfer) -> None:
        self.bytes_moved += transfer.size
        if spec.get("replica") is not None:
            self._release_reader(spec["replica"])
        if spec.get("written") is not None:
            spec["written"].state = "resident"
            self.log_occupancy(spec["written"].node_id)
        jrt.active_io.pop(transfer.tid, None)
        if jrt.status != "running":
            return
        if not jrt.active_io:
            jrt.io_wall_ns += self.engine.now - jrt.io_block_since
            jrt.io_ideal_ns += jrt.group_ideal
            jrt.io_block_since = None
            self._advance_compute(jrt)

    def _advance_compute(self, jrt: JobRuntime) -> None:
        if jrt.status != "running":
            return
        job = jrt.job
        boundary = (jrt.groups[jrt.group_idx][0]
                    if jrt.group_idx < len(jrt.groups) else job.compute_ns)
        if boundary == jrt.compute_progress:
            self._on_compute_boundary(jrt, boundary, jrt.compute_epoch)
            return
        seg = boundary - jrt.compute_progress
        scaled = seg * jrt.dlm_factor
        dur = -(-scaled.numerator // scaled.denominator)
        jrt.compute_epoch += 1
        epoch = jrt.compute_epoch
        self.engine.schedule(
            self.engine.now + dur,
            lambda: self._on_compute_boundary(jrt, boundary, epoch))

    def _on_compute_boundary(self, jrt: JobRuntime, boundary: int, epoch: int) -> None:
        if jrt.status != "running" or epoch != jrt.compute_epoch:
            return
        jrt.compute_progress = boundary
        if jrt.group_idx < len(jrt.groups) and jrt.groups[jrt.group_idx][0] == boundary:
            phases = jrt.groups[jrt.group_idx][1]
            jrt.group_idx += 1
            specs = []
            for phase in phases:
                spec = self._phase_spec(jrt, phase)
                if spec is None:
                    return  # job failed while building the phase
                specs.append(spec)
            self._start_io_group(jrt, specs)
            return
        if boundary >= jrt.job.compute_ns:
            self._finish(jrt, "completed")
            return
        self._advance_compute(jrt)

    def _phase_spec(self, jrt: JobRuntime, phase) -> dict | None:
        job = jrt.job
        primary = jrt.primary
        payload = {"job": job.job_id, "direction": phase.direction,
                   "tier": phase.tier, "node": primary,
                   "checkpoint": phase.checkpoint}
        written = None
        if phase.tier == TIER_LOCAL:
            resources = (bapm_rid(primary),)
            payload["path"] = "local"
        elif phase.tier == TIER_EXTERNAL:
            if phase.direction == "write":
                resources = io_write_resources(primary, None)
                written = self._scratch_replica(jrt, phase.bytes, TIER_EXTERNAL, None)
                if written is None:
                    return None
            else:
                resources = io_read_resources(primary, None)
            payload["path"] = "external"
        else:  # distributed-fs
            if phase.direction == "write":
                try:
                    member = self.storage.choose_dfs_member(phase.bytes,
                                                            self.charged_of)
                except (TierFull, InsufficientCapacity) as exc:
                    self._fail(jrt, str(exc))
                    return None
                written = self._scratch_replica(jrt, phase.bytes, TIER_DFS, member)
                if written is None:
                    return None
                jrt.last_dfs_node = member
                resources = io_write_resources(primary, member)
            else:
                member = jrt.last_dfs_node
                if member is None:
                    member = min(self.storage.dfs_members or (primary,))
                resources = io_read_resources(primary, member)
            payload["path"] = "local" if member == primary else "remote-bapm"
        payload["ideal_ns"] = ideal_ns(self, phase.bytes, resources)
        spec = {"bytes": phase.bytes, "resources": resources, "payload": payload,
                "replica": None, "written": written}
        return spec

    def _scratch_replica(self, jrt: JobRuntime, nbytes: int, tier: str,
                         node: int | None):
        self._scratch_seq += 1
        did = f"{jrt.job.job_id}.w{self._scratch_seq}"
        self.storage.add_dataset(did, nbytes, jrt.job.owner)
        try:
            rep = self.storage.place_replica(did, tier, node, state="staging")
        except (TierFull, InsufficientCapacity) as exc:
            self._fail(jrt, str(exc))
            return None
        jrt.scratch_datasets.append(did)
        self.log_occupancy(node)
        return rep

    def _kill(self, jrt: JobRuntime, deadline: int) -> None:
        if jrt.status != "running" or self.engine.now < deadline:
            return
        self._teardown_io(jrt, "killed")
        jrt.compute_epoch += 1
        self._finish(jrt, "timeout")

    def _teardown_io(self, jrt: JobRuntime, reason: str) -> None:
        for tid, (spec, transfer) in list(jrt.active_io.items()):
            self.engine.cancel_transfer(transfer, reason)
            if spec.get("replica") is not None:
                self._release_reader(spec["replica"])
            if spec.get("written") is not None:
                self.storage.abort_staging(spec["written"])
                self.log_occupancy(spec["written"].node_id)
        jrt.active_io.clear()
        for tid, transfer in list(jrt.pending_stage.items()):
            self.engine.cancel_transfer(transfer, reason)
        jrt.pending_stage.clear()

    def _finish(self, jrt: JobRuntime, status: str) -> None:
        scheduler.complete_job(self, jrt, status)

    def _fail(self, jrt: JobRuntime, reason: str) -> None:
        self._teardown_io(jrt, "aborted")
        jrt.compute_epoch += 1
        scheduler.complete_job(self, jrt, "failed", reason=reason)

    # --- invariant checking -----------------------------------------------------------

    def _check_invariants(self, engine) -> None:
        for nid, node in self.nodes.items():
            used = self.storage.node_replica_bytes[nid] + node.charged_bytes
            cap = node.spec.bapm_capacity
            if node.charged_bytes < 0 or used < 0 or used > cap:
                raise SimulationError(
                    f"node {nid} B-APM oversubscribed: {used} of {cap}")
        ext = dfs = 0
        local = {nid: 0 for nid in self.nodes}
        per_node = {nid: 0 for nid in self.nodes}
        for ds in self.storage.datasets.values():
            for rep in ds.replicas:
                if rep.state == "scrubbed":
                    raise SimulationError("scrubbed replica still registered")
                if rep.tier == TIER_EXTERNAL:
                    ext += rep.bytes
                elif rep.tier == TIER_DFS:
                    dfs += rep.bytes
                    per_node[rep.node_id] += rep.bytes
                else:
                    local[rep.node_id] += rep.bytes
                    per_node[rep.node_id] += rep.bytes
        if ext != self.storage.external_used:
            raise SimulationError("external tier accounting drift")
        if dfs != self.storage.dfs_used:
            raise SimulationError("distributed tier accounting drift")
        for nid in self.nodes:
            if local[nid] != self.storage.local_used[nid]:
                raise SimulationError(f"local tier accounting drift on node {nid}")
            if per_node[nid] != self.storage.node_replica_bytes[nid]:
                raise SimulationError(f"node pool accounting drift on node {nid}")
        for rid, cap in engine.resources.items():
            if engine.resource_load(rid) > cap:
                raise SimulationError(f"resource {rid} over capacity")

    # --- inspection helpers -------------------------------------------------------------

    def node_replicas(self, nid: int):
        return self.storage.replicas_on_node(nid)

    def summary(self) -> dict:
        makespan = self.engine.now
        done = [j for j in self.jobs.values() if j.status == "completed"]
        energy = (self.bytes_moved * self.policy.e_byte
                  + self.switch_count * self.policy.e_switch)
        agg_bw = (self.bytes_moved * SECOND_NS // makespan) if makespan else 0
        return {
            "makespan_ns": makespan,
            "jobs_total": len(self.jobs),
            "jobs_completed": len(done),
            "bytes_moved": self.bytes_moved,
            "mode_switches": self.switch_count,
            "energy_j": energy,
            "aggregate_bw_bytes_per_s": agg_bw,
            "bytes_scrubbed": sum(self.storage.scrubbed_bytes.values()),
        }
