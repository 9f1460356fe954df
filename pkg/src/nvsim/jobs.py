"""Workload domain types: jobs, I/O phases, workflows, scheduling policy."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InfeasibleRequest
from .memory import MemoryMode

TIER_LOCAL = "local-fs"
TIER_DFS = "distributed-fs"
TIER_EXTERNAL = "external-fs"
TIERS = (TIER_LOCAL, TIER_DFS, TIER_EXTERNAL)


@dataclass(frozen=True)
class IoPhase:
    offset_ns: int          # compute progress at which the phase blocks
    bytes: int
    direction: str          # read | write
    tier: str
    checkpoint: bool = False


@dataclass(frozen=True)
class OutputSpec:
    dataset_id: str
    bytes: int
    tier: str               # final destination tier
    via: str = TIER_LOCAL   # where the bytes materialize at job end


@dataclass(frozen=True)
class StageDirective:
    dataset_id: str
    destination: str        # job-nodes | distributed-fs


@dataclass(frozen=True)
class Job:
    job_id: str
    owner: str
    submit_ns: int
    nodes_requested: int
    bapm_bytes_per_node: int
    compute_ns: int
    walltime_ns: int
    io_phases: tuple[IoPhase, ...] = ()
    inputs: tuple[str, ...] = ()
    stage_in: tuple[StageDirective, ...] = ()
    outputs: tuple[OutputSpec, ...] = ()
    required_mode: MemoryMode = MemoryMode.SLM
    dlm_hit_rate: float = 1.0
    workflow_id: str | None = None
    retain_outputs: bool = False

    def validate(self) -> None:
        if self.nodes_requested < 1:
            raise InfeasibleRequest(f"job {self.job_id}: needs at least one node")
        if self.bapm_bytes_per_node < 0:
            raise InfeasibleRequest(f"job {self.job_id}: negative B-APM request")
        if self.walltime_ns < self.compute_ns:
            raise InfeasibleRequest(
                f"job {self.job_id}: walltime below declared compute time")
        if not 0.0 <= self.dlm_hit_rate <= 1.0:
            raise InfeasibleRequest(f"job {self.job_id}: dlm_hit_rate not in [0,1]")
        for phase in self.io_phases:
            if phase.offset_ns > self.compute_ns:
                raise InfeasibleRequest(
                    f"job {self.job_id}: phase offset beyond compute time")
            if phase.direction not in ("read", "write"):
                raise InfeasibleRequest(
                    f"job {self.job_id}: bad phase direction {phase.direction!r}")
            if phase.tier not in TIERS:
                raise InfeasibleRequest(f"job {self.job_id}: bad tier {phase.tier!r}")
        for out in self.outputs:
            if out.via not in (TIER_LOCAL, TIER_DFS):
                raise InfeasibleRequest(
                    f"job {self.job_id}: output via must be local-fs or distributed-fs")
            if out.tier != TIER_EXTERNAL and out.tier != out.via:
                raise InfeasibleRequest(
                    f"job {self.job_id}: output destination must be external-fs "
                    f"or match the tier it is written to")
        declared = set(self.inputs)
        for directive in self.stage_in:
            if directive.dataset_id not in declared:
                raise InfeasibleRequest(
                    f"job {self.job_id}: stage_in of {directive.dataset_id!r} "
                    f"which is not a declared input")
            if directive.destination not in ("job-nodes", TIER_DFS):
                raise InfeasibleRequest(
                    f"job {self.job_id}: bad stage destination "
                    f"{directive.destination!r}")


@dataclass(frozen=True)
class Workflow:
    workflow_id: str
    job_ids: tuple[str, ...]
    deps: tuple[tuple[str, str], ...] = ()   # (predecessor, successor)
    retention_ttl_ns: int = 24 * 3600 * 10**9


@dataclass(frozen=True)
class Policy:
    algorithm: str = "fcfs"          # fcfs | fcfs-backfill
    scorer: str = "none"             # none | data-aware | energy-aware
    e_byte: float = 1e-10            # J per byte moved (energy proxy)
    e_switch: float = 1000.0         # J per mode switch

    def __post_init__(self):
        if self.algorithm not in ("fcfs", "fcfs-backfill"):
            raise InfeasibleRequest(f"unknown policy {self.algorithm!r}")
        if self.scorer not in ("none", "data-aware", "energy-aware"):
            raise InfeasibleRequest(f"unknown scorer {self.scorer!r}")
        if self.e_byte < 0 or self.e_switch < 0:
            raise InfeasibleRequest("scorer weights must be non-negative")
