"""Node memory modes.

SLM exposes DRAM and persistent memory as two separate spaces, with the
persistent space keeping its contents.  DLM turns DRAM into a cache in
front of the persistent DIMMs: only the persistent capacity is visible,
and persistence is no longer guaranteed, so a switch into DLM scrubs
whatever was resident.  Access cost in DLM is modeled as a linear
mixture between DRAM latency and the slower persistent-media latency,
weighted by a per-job cache hit rate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import DlmRequiresDram, HitRateOutOfRange


class MemoryMode(str, enum.Enum):
    SLM = "SLM"
    DLM = "DLM"


@dataclass(frozen=True)
class MemoryView:
    volatile_bytes: int
    persistent_bytes: int
    persistence_guaranteed: bool


def visible_memory(node_spec, mode: MemoryMode) -> MemoryView:
    """Memory spaces an application sees on a node in the given mode."""
    if mode is MemoryMode.SLM:
        return MemoryView(
            volatile_bytes=node_spec.dram_capacity,
            persistent_bytes=node_spec.bapm_capacity,
            persistence_guaranteed=True,
        )
    return MemoryView(
        volatile_bytes=node_spec.bapm_capacity,
        persistent_bytes=0,
        persistence_guaranteed=False,
    )


def check_mode_supported(node_spec, mode: MemoryMode) -> None:
    """DLM needs at least one DRAM DIMM per socket to act as the cache."""
    if mode is MemoryMode.DLM and node_spec.dram_dimms_per_socket < 1:
        raise DlmRequiresDram(
            f"node {node_spec.node_id}: DLM requires >=1 DRAM DIMM per socket"
        )


def effective_latency_ns(node_spec, hit_rate: float) -> float:
    """DLM access latency for a given DRAM-cache hit rate.

    hit_rate 1.0 costs one DRAM access; a miss costs a persistent-media
    access at dram_latency * bapm_latency_ratio.  Monotone non-increasing
    in hit_rate.
    """
    if not 0.0 <= hit_rate <= 1.0:
        raise HitRateOutOfRange(f"hit rate {hit_rate} not in [0, 1]")
    dram = node_spec.dram_latency_ns
    return hit_rate * dram + (1.0 - hit_rate) * dram * node_spec.bapm_latency_ratio


def dlm_slowdown(node_spec, hit_rate: float):
    """Compute-time multiplier for a job running in DLM, as an exact ratio."""
    from fractions import Fraction

    if not 0.0 <= hit_rate <= 1.0:
        raise HitRateOutOfRange(f"hit rate {hit_rate} not in [0, 1]")
    hit = Fraction(hit_rate)
    ratio = Fraction(node_spec.bapm_latency_ratio)
    return hit + (1 - hit) * ratio
