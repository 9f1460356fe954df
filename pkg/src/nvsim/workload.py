"""Workload files and synthetic workload generation.

The on-disk format is JSON with explicit unit strings and a
format_version field; parse errors carry a field path.  The generator
sizes each job's declared I/O so that, at a stated reference bandwidth,
I/O takes a uniformly drawn fraction of total runtime (the observed
5-20% band by default).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .cluster import ClusterSpec
from .errors import UnitError, UnknownDataset, WorkloadSyntaxError
from .jobs import (
    TIER_DFS,
    TIER_EXTERNAL,
    TIER_LOCAL,
    IoPhase,
    Job,
    OutputSpec,
    StageDirective,
    Workflow,
)
from .memory import MemoryMode
from .units import SECOND_NS, parse_bytes, parse_duration_ns

FORMAT_VERSION = 1


@dataclass(frozen=True)
class DataSetSpec:
    dataset_id: str
    bytes: int
    owner: str
    workflow: str | None = None
    location: str = TIER_EXTERNAL       # external-fs | distributed-fs | node
    location_node: int | None = None


@dataclass(frozen=True)
class WorkloadSpec:
    jobs: tuple[Job, ...] = ()
    workflows: tuple[Workflow, ...] = ()
    datasets: tuple[DataSetSpec, ...] = ()
    grants: dict = field(default_factory=dict)


def _ctx(path: str, exc: Exception) -> WorkloadSyntaxError:
    return WorkloadSyntaxError(f"{path}: {exc}")


def _parse_phase(raw: dict, path: str) -> IoPhase:
    try:
        return IoPhase(
            offset_ns=parse_duration_ns(raw.get("offset", 0)),
            bytes=parse_bytes(raw["bytes"]),
            direction=raw.get("direction", "read"),
            tier=raw.get("tier", TIER_LOCAL),
            checkpoint=bool(raw.get("checkpoint", False)),
        )
    except (KeyError, UnitError) as exc:
        raise _ctx(path, exc) from None


def _parse_job(raw: dict, path: str) -> Job:
    try:
        return Job(
            job_id=str(raw["id"]),
            owner=str(raw.get("owner", "default")),
            submit_ns=parse_duration_ns(raw.get("submit", 0)),
            nodes_requested=int(raw.get("nodes", 1)),
            bapm_bytes_per_node=parse_bytes(raw.get("bapm_per_node", 0)),
            compute_ns=parse_duration_ns(raw["compute"]),
            walltime_ns=parse_duration_ns(raw["walltime"]),
            io_phases=tuple(_parse_phase(p, f"{path}.io_phases[{i}]")
                            for i, p in enumerate(raw.get("io_phases", []))),
            inputs=tuple(raw.get("inputs", [])),
            stage_in=tuple(
                StageDirective(d["dataset"], d.get("to", "job-nodes"))
                for d in raw.get("stage_in", [])),
            outputs=tuple(
                OutputSpec(o["id"], parse_bytes(o["bytes"]),
                           o.get("tier", TIER_LOCAL), o.get("via", TIER_LOCAL))
                for o in raw.get("outputs", [])),
            required_mode=MemoryMode(raw.get("required_mode", "SLM")),
            dlm_hit_rate=float(raw.get("dlm_hit_rate", 1.0)),
            workflow_id=raw.get("workflow"),
            retain_outputs=bool(raw.get("retain_outputs", False)),
        )
    except (KeyError, ValueError, UnitError) as exc:
        raise _ctx(path, exc) from None


def _parse_dataset(raw: dict, path: str) -> DataSetSpec:
    try:
        loc = raw.get("location", TIER_EXTERNAL)
        node = None
        if isinstance(loc, dict):
            node = int(loc["node"])
            loc = "node"
        elif loc not in (TIER_EXTERNAL, TIER_DFS):
            raise UnitError(f"bad location {loc!r}")
        return DataSetSpec(
            dataset_id=str(raw["id"]),
            bytes=parse_bytes(raw["bytes"]),
            owner=str(raw.get("owner", "default")),
            workflow=raw.get("workflow"),
            location=loc,
            location_node=node,
        )
    except (KeyError, UnitError) as exc:
        raise _ctx(path, exc) from None


def workload_from_dict(raw: dict) -> WorkloadSpec:
    if not isinstance(raw, dict):
        raise WorkloadSyntaxError("workload must be a JSON object")
    version = raw.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise WorkloadSyntaxError(f"unsupported format_version {version}")
    datasets = tuple(_parse_dataset(d, f"datasets[{i}]")
                     for i, d in enumerate(raw.get("datasets", [])))
    workflows = tuple(
        Workflow(
            workflow_id=str(w["id"]),
            job_ids=tuple(w.get("jobs", [])),
            deps=tuple((p, s) for p, s in w.get("deps", [])),
            retention_ttl_ns=parse_duration_ns(w.get("retention_ttl", "24h")),
        )
        for w in raw.get("workflows", []))
    jobs = tuple(_parse_job(j, f"jobs[{i}]")
                 for i, j in enumerate(raw.get("jobs", [])))
    grants = {str(owner): tuple(v) for owner, v in raw.get("grants", {}).items()}
    spec = WorkloadSpec(jobs=jobs, workflows=workflows, datasets=datasets,
                        grants=grants)
    validate_workload(spec)
    return spec


def validate_workload(spec: WorkloadSpec) -> None:
    declared = {d.dataset_id for d in spec.datasets}
    produced = {o.dataset_id for j in spec.jobs for o in j.outputs}
    wf_jobs: dict[str, Workflow] = {w.workflow_id: w for w in spec.workflows}
    seen_jobs = set()
    for i, job in enumerate(spec.jobs):
        if job.job_id in seen_jobs:
            raise WorkloadSyntaxError(f"jobs[{i}]: duplicate job id {job.job_id!r}")
        seen_jobs.add(job.job_id)
        job.validate()
        for did in job.inputs:
            if did not in declared and did not in produced:
                raise UnknownDataset(
                    f"jobs[{i}] ({job.job_id}): input {did!r} is neither declared "
                    f"nor produced by any job")
        if job.workflow_id is not None and job.workflow_id not in wf_jobs:
            raise WorkloadSyntaxError(
                f"jobs[{i}] ({job.job_id}): unknown workflow {job.workflow_id!r}")
    for w in spec.workflows:
        for jid in w.job_ids:
            if jid not in seen_jobs:
                raise WorkloadSyntaxError(
                    f"workflow {w.workflow_id}: member {jid!r} is not a job")


def parse_workload(path) -> WorkloadSpec:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WorkloadSyntaxError(f"{path}: invalid JSON ({exc})") from None
    return workload_from_dict(raw)


# --- serialization ---------------------------------------------------------------

def workload_to_dict(spec: WorkloadSpec) -> dict:
    out = {"format_version": FORMAT_VERSION, "datasets": [], "workflows": [],
           "jobs": [], "grants": {k: list(v) for k, v in spec.grants.items()}}
    for d in spec.datasets:
        entry = {"id": d.dataset_id, "bytes": d.bytes, "owner": d.owner}
        if d.workflow is not None:
            entry["workflow"] = d.workflow
        if d.location == "node":
            entry["location"] = {"node": d.location_node}
        elif d.location != TIER_EXTERNAL:
            entry["location"] = d.location
        out["datasets"].append(entry)
    for w in spec.workflows:
        out["workflows"].append({
            "id": w.workflow_id, "jobs": list(w.job_ids),
            "deps": [list(edge) for edge in w.deps],
            "retention_ttl": f"{w.retention_ttl_ns}ns"})
    for j in spec.jobs:
        entry = {
            "id": j.job_id, "owner": j.owner, "submit": f"{j.submit_ns}ns",
            "nodes": j.nodes_requested, "bapm_per_node": j.bapm_bytes_per_node,
            "compute": f"{j.compute_ns}ns", "walltime": f"{j.walltime_ns}ns",
            "required_mode": j.required_mode.value,
            "dlm_hit_rate": j.dlm_hit_rate,
            "retain_outputs": j.retain_outputs,
        }
        if j.workflow_id is not None:
            entry["workflow"] = j.workflow_id
        if j.inputs:
            entry["inputs"] = list(j.inputs)
        if j.stage_in:
            entry["stage_in"] = [{"dataset": d.dataset_id, "to": d.destination}
                                 for d in j.stage_in]
        if j.io_phases:
            entry["io_phases"] = [
                {"offset": f"{p.offset_ns}ns", "bytes": p.bytes,
                 "direction": p.direction, "tier": p.tier,
                 "checkpoint": p.checkpoint}
                for p in j.io_phases]
        if j.outputs:
            entry["outputs"] = [
                {"id": o.dataset_id, "bytes": o.bytes, "tier": o.tier,
                 "via": o.via}
                for o in j.outputs]
        out["jobs"].append(entry)
    return out


def write_workload(spec: WorkloadSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(workload_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- synthesis -------------------------------------------------------------------

@dataclass(frozen=True)
class SynthParams:
    job_count: int = 50
    seed: int = 0
    nodes_range: tuple[int, int] = (1, 4)
    compute_range_s: tuple[int, int] = (60, 600)
    io_fraction: tuple[float, float] = (0.05, 0.20)
    dataset_bytes_max: int = 200 * 10**9
    bapm_demand_range: tuple[int, int] = (10 * 10**9, 500 * 10**9)
    workflow_prob: float = 0.25
    workflow_depth_max: int = 3
    dataset_prob: float = 0.6
    stage_prob: float = 0.7
    output_prob: float = 0.4
    dlm_prob: float = 0.0
    owners: tuple[str, ...] = ("u0", "u1", "u2")
    grant_prob: float = 0.3
    walltime_slack: tuple[float, float] = (1.5, 3.0)
    exact_walltime: bool = False
    include_io: bool = True
    arrival_spacing_s: tuple[int, int] = (0, 30)
    allowed_tiers: tuple[str, ...] = (TIER_LOCAL, TIER_DFS, TIER_EXTERNAL)

    def __post_init__(self):
        lo, hi = self.io_fraction
        if not (0 <= lo <= hi < 1):
            raise WorkloadSyntaxError("io_fraction range must sit inside [0, 1)")


def reference_bandwidth(params: SynthParams, cluster: ClusterSpec) -> int:
    """External-FS fair share per job at the mean expected load."""
    mean_nodes = max(1, (params.nodes_range[0] + params.nodes_range[1]) // 2)
    mean_load = max(1, len(cluster.nodes) // mean_nodes)
    return max(1, cluster.external_fs_bw // mean_load)


def empirical_io_fraction(job: Job, input_bytes: int, ref_bw: int) -> Fraction:
    """Declared-I/O share of runtime when served at the reference bandwidth."""
    io_bytes = sum(p.bytes for p in job.io_phases) + input_bytes
    io_time = Fraction(io_bytes, ref_bw)
    compute_s = Fraction(job.compute_ns, SECOND_NS)
    if io_time == 0 and compute_s == 0:
        return Fraction(0)
    return io_time / (compute_s + io_time)


def synth_workload(params: SynthParams, cluster: ClusterSpec) -> WorkloadSpec:
    """Deterministic random workload; every job is feasible on the cluster."""
    rng = random.Random(params.seed)
    ref_bw = reference_bandwidth(params, cluster)
    max_nodes = len(cluster.nodes)
    min_cap = min(n.bapm_capacity for n in cluster.nodes)
    has_dfs = cluster.dfs_members is not None
    tiers = tuple(t for t in params.allowed_tiers
                  if t != TIER_DFS or has_dfs) or (TIER_LOCAL,)

    datasets: list[DataSetSpec] = []
    produced_bytes: dict[str, int] = {}
    jobs: list[Job] = []
    workflows: list[Workflow] = []
    grants: dict[str, list[str]] = {}
    submit_ns = 0
    made = 0
    while made < params.job_count:
        depth = 1
        wf_id = None
        if params.workflow_prob > 0 and rng.random() < params.workflow_prob:
            depth = rng.randint(2, max(2, params.workflow_depth_max))
            depth = min(depth, params.job_count - made) or 1
            if depth > 1:
                wf_id = f"wf{len(workflows)}"
        owner = rng.choice(params.owners)
        chain_ids = []
        prev_output: str | None = None
        for step in range(depth):
            jid = f"j{made}"
            nodes = rng.randint(params.nodes_range[0],
                                min(params.nodes_range[1], max_nodes))
            compute_s = rng.randint(*params.compute_range_s)
            io_bytes = 0
            if params.include_io:
                f = rng.uniform(*params.io_fraction)
                io_bytes = round(compute_s * f / (1.0 - f) * ref_bw)
            demand = rng.randint(*params.bapm_demand_range)
            demand = min(demand, min_cap // 4)

            inputs: list[str] = []
            stage: list[StageDirective] = []
            phases: list[IoPhase] = []
            input_bytes = 0
            if prev_output is not None:
                inputs.append(prev_output)
                input_bytes = produced_bytes[prev_output]
            elif io_bytes and rng.random() < params.dataset_prob:
                ds_id = f"d{len(datasets)}"
                ds_bytes = min(io_bytes // 2, params.dataset_bytes_max,
                               min_cap // 4)
                if ds_bytes > 0:
                    ds_owner = owner
                    if params.grant_prob > 0 and rng.random() < params.grant_prob:
                        others = [o for o in params.owners if o != owner]
                        if others:
                            ds_owner = rng.choice(others)
                            grants.setdefault(ds_owner, [])
                            if owner not in grants[ds_owner]:
                                grants[ds_owner].append(owner)
                    datasets.append(DataSetSpec(ds_id, ds_bytes, ds_owner))
                    inputs.append(ds_id)
                    input_bytes = ds_bytes
                    if rng.random() < params.stage_prob:
                        dest = TIER_DFS if has_dfs and rng.random() < 0.5 \
                            else "job-nodes"
                        stage.append(StageDirective(ds_id, dest))
            phase_bytes = io_bytes - input_bytes
            if phase_bytes > 0:
                read_part = phase_bytes // 2 if not inputs else 0
                write_part = phase_bytes - read_part
                if read_part > 0:
                    phases.append(IoPhase(0, read_part, "read",
                                          rng.choice(tiers)))
                if write_part > 0:
                    offset = rng.randint(0, compute_s) * SECOND_NS
                    phases.append(IoPhase(offset, write_part, "write",
                                          rng.choice(tiers),
                                          checkpoint=rng.random() < 0.3))

            outputs: list[OutputSpec] = []
            if wf_id is not None and step < depth - 1:
                out_id = f"{jid}.share"
                out_bytes = max(1, min(demand // 2, min_cap // 8))
                outputs.append(OutputSpec(out_id, out_bytes, TIER_LOCAL))
                produced_bytes[out_id] = out_bytes
                prev_output = out_id
            elif params.output_prob > 0 and rng.random() < params.output_prob:
                out_id = f"{jid}.out"
                out_bytes = max(1, min(demand // 2, min_cap // 8))
                via = TIER_DFS if has_dfs and rng.random() < 0.3 else TIER_LOCAL
                outputs.append(OutputSpec(out_id, out_bytes, TIER_EXTERNAL, via))

            staged_to_node = sum(
                next(d.bytes for d in datasets if d.dataset_id == s.dataset_id)
                for s in stage if s.destination == "job-nodes")
            demand = min(demand, min_cap - staged_to_node)
            if params.exact_walltime:
                walltime_s = compute_s
            else:
                walltime_s = int(compute_s * rng.uniform(*params.walltime_slack)) + 120
            mode = MemoryMode.DLM if rng.random() < params.dlm_prob else MemoryMode.SLM
            jobs.append(Job(
                job_id=jid,
                owner=owner,
                submit_ns=submit_ns,
                nodes_requested=nodes,
                bapm_bytes_per_node=max(demand, 0),
                compute_ns=compute_s * SECOND_NS,
                walltime_ns=walltime_s * SECOND_NS,
                io_phases=tuple(phases),
                inputs=tuple(inputs),
                stage_in=tuple(stage),
                outputs=tuple(outputs),
                required_mode=mode,
                dlm_hit_rate=round(rng.uniform(0.5, 1.0), 3),
                workflow_id=wf_id,
                retain_outputs=False,
            ))
            chain_ids.append(jid)
            made += 1
            submit_ns += rng.randint(*params.arrival_spacing_s) * SECOND_NS
        if wf_id is not None:
            deps = tuple((chain_ids[i], chain_ids[i + 1])
                         for i in range(len(chain_ids) - 1))
            workflows.append(Workflow(wf_id, tuple(chain_ids), deps,
                                      retention_ttl_ns=3600 * SECOND_NS))

    spec = WorkloadSpec(jobs=tuple(jobs), workflows=tuple(workflows),
                        datasets=tuple(datasets),
                        grants={k: tuple(v) for k, v in grants.items()})
    validate_workload(spec)
    return spec
