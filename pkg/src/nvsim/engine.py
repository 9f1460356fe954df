"""Deterministic discrete-event core: clock, event queue, transfers, trace.

The clock is fixed-point (integer nanosecond ticks); no floats enter the
timeline.  Concurrent transfers share capacitated resources by max-min
fairness, recomputed whenever a transfer starts or finishes.  Progress
bookkeeping between ticks uses exact rationals so a completed transfer's
integrated rate equals its byte size exactly and completion ticks land
at ceil() of the exact fluid finish time, i.e. always within one tick.

Within one tick, transfer completions are processed before ordinary
events (ordered among themselves by exact finish time), so rate
reallocation happens at the exact instant a transfer drains rather than
at the next tick boundary.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import EventInPast, NonPositiveParameter, SimulationError
from .units import SECOND_NS

# queue priorities: completions first within a tick
_PRIO_COMPLETION = 0
_PRIO_NORMAL = 1

_ZERO = Fraction(0)


@dataclass(frozen=True)
class Event:
    ts: int
    seq: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        record = {"ts": self.ts, "seq": self.seq, "kind": self.kind}
        record.update(self.payload)
        return json.dumps(record, sort_keys=True, separators=(",", ":"))


class Trace:
    """Append-only record of processed events; timestamps never decrease."""

    def __init__(self):
        self.records: list[Event] = []

    def append(self, event: Event) -> None:
        if self.records and event.ts < self.records[-1].ts:
            raise SimulationError(
                f"trace timestamp went backwards: {event.ts} after {self.records[-1].ts}"
            )
        self.records.append(event)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def lines(self):
        for event in self.records:
            yield event.to_json()

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line + "\n")


@dataclass
class Transfer:
    tid: int
    kind: str                      # trace event prefix: stage | io
    size: int
    resources: tuple[str, ...]
    payload: dict
    on_complete: Callable | None = None
    remaining: Fraction = _ZERO
    integrated: Fraction = _ZERO
    rate: Fraction = _ZERO         # bytes/s
    last_t: Fraction = _ZERO       # exact ns
    finish_exact: Fraction = _ZERO
    epoch: int = 0
    done: bool = False
    canceled: bool = False


def waterfill(flows: list[tuple[int, tuple[str, ...]]],
              capacities: dict[str, int]) -> dict[int, Fraction]:
    """Max-min fair rates for flows over capacitated resources.

    Standard bottleneck-freezing: repeatedly find the resource with the
    smallest per-flow fair share among unfrozen flows, freeze its flows
    at that level, and account their usage on every resource they cross.
    Exact rational arithmetic keeps the result platform-independent.
    """
    rates: dict[int, Fraction] = {}
    unfrozen: dict[int, tuple[str, ...]] = dict(flows)
    used: dict[str, Fraction] = {rid: _ZERO for rid in capacities}
    while unfrozen:
        counts: dict[str, int] = {}
        for rids in unfrozen.values():
            for rid in rids:
                counts[rid] = counts.get(rid, 0) + 1
        level = None
        for rid in sorted(counts):
            fair = (capacities[rid] - used[rid]) / counts[rid]
            if level is None or fair < level:
                level = fair
        bottlenecks = {
            rid for rid in counts
            if (capacities[rid] - used[rid]) / counts[rid] == level
        }
        frozen_now = [fid for fid, rids in sorted(unfrozen.items())
                      if any(rid in bottlenecks for rid in rids)]
        for fid in frozen_now:
            rates[fid] = level
            for rid in unfrozen[fid]:
                used[rid] += level
            del unfrozen[fid]
    return rates


class Engine:
    def __init__(self, trace: Trace | None = None,
                 post_event_hook: Callable | None = None):
        self.now: int = 0
        self.trace = trace if trace is not None else Trace()
        self.post_event_hook = post_event_hook
        self._seq = 0
        self._queue: list[tuple[int, int, Fraction, int, Callable]] = []
        self.resources: dict[str, int] = {}
        self.transfers: dict[int, Transfer] = {}
        self._next_tid = 0

    # --- clock / queue -----------------------------------------------------

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def schedule(self, ts: int, fn: Callable, *,
                 _prio: int = _PRIO_NORMAL, _sub: Fraction = _ZERO) -> None:
        if ts < self.now:
            raise EventInPast(f"event at {ts} scheduled at t={self.now}")
        heapq.heappush(self._queue, (ts, _prio, _sub, self._next_seq(), fn))

    def schedule_after(self, delay_ns: int, fn: Callable) -> None:
        self.schedule(self.now + delay_ns, fn)

    def run(self, until: int | None = None) -> Trace:
        while self._queue:
            if until is not None and self._queue[0][0] > until:
                break
            ts, _prio, _sub, _seq, fn = heapq.heappop(self._queue)
            if ts < self.now:
                raise EventInPast(f"queue yielded t={ts} before now={self.now}")
            self.now = ts
            fn()
            if self.post_event_hook is not None:
                self.post_event_hook(self)
        if until is not None and until > self.now:
            self.now = until
        return self.trace

    def emit(self, kind: str, **payload) -> Event:
        event = Event(ts=self.now, seq=self._next_seq(), kind=kind, payload=payload)
        self.trace.append(event)
        return event

    # --- resources / transfers ----------------------------------------------

    def add_resource(self, rid: str, capacity: int) -> None:
        if capacity <= 0:
            raise NonPositiveParameter(f"resource {rid}: capacity must be positive")
        self.resources[rid] = capacity

    def start_transfer(self, size: int, resources: tuple[str, ...], kind: str,
                       payload: dict, on_complete: Callable | None = None) -> Transfer:
        if size < 0:
            raise NonPositiveParameter("transfer size must be >= 0")
        if not resources:
            raise SimulationError("transfer needs at least one bottleneck resource")
        for rid in resources:
            if rid not in self.resources:
                raise SimulationError(f"unknown resource {rid!r}")
        now_exact = Fraction(self.now)
        self._advance(now_exact)
        tid = self._next_tid
        self._next_tid += 1
        transfer = Transfer(
            tid=tid, kind=kind, size=size, resources=tuple(resources),
            payload=dict(payload), on_complete=on_complete,
            remaining=Fraction(size), last_t=now_exact, finish_exact=now_exact,
        )
        self.transfers[tid] = transfer
        self.emit(f"{kind}_start", bytes=size, **transfer.payload)
        if size == 0:
            self.schedule(self.now, lambda: self._finish(transfer, transfer.epoch),
                          _prio=_PRIO_COMPLETION, _sub=now_exact)
        self._reallocate(now_exact)
        return transfer

    def cancel_transfer(self, transfer: Transfer, reason: str = "canceled") -> None:
        if transfer.done or transfer.canceled:
            return
        now_exact = Fraction(self.now)
        self._advance(now_exact)
        transfer.canceled = True
        transfer.epoch += 1
        del self.transfers[transfer.tid]
        self.emit(f"{transfer.kind}_end", bytes=transfer.size, status=reason,
                  **transfer.payload)
        self._reallocate(now_exact)

    def active_rates(self) -> dict[int, Fraction]:
        return {t.tid: t.rate for t in self.transfers.values() if t.remaining > 0}

    def resource_load(self, rid: str) -> Fraction:
        return sum((t.rate for t in self.transfers.values()
                    if t.remaining > 0 and rid in t.resources), _ZERO)

    # --- internals -----------------------------------------------------------

    def _advance(self, to: Fraction) -> None:
        for transfer in self.transfers.values():
            if to > transfer.last_t:
                dt = to - transfer.last_t
                delta = transfer.rate * dt / SECOND_NS
                if delta > transfer.remaining:
                    delta = transfer.remaining
                transfer.remaining -= delta
                transfer.integrated += delta
                transfer.last_t = to

    def _reallocate(self, now_exact: Fraction) -> None:
        active = [t for t in self.transfers.values() if t.remaining > 0]
        if not active:
            return
        rates = waterfill([(t.tid, t.resources) for t in active], self.resources)
        for transfer in active:
            transfer.rate = rates[transfer.tid]
            transfer.epoch += 1
            transfer.finish_exact = (
                transfer.last_t + transfer.remaining / transfer.rate * SECOND_NS
            )
            tick = math.ceil(transfer.finish_exact)
            epoch = transfer.epoch
            self.schedule(tick, lambda t=transfer, e=epoch: self._finish(t, e),
                          _prio=_PRIO_COMPLETION, _sub=transfer.finish_exact)

    def _finish(self, transfer: Transfer, epoch: int) -> None:
        if transfer.done or transfer.canceled or epoch != transfer.epoch:
            return
        self._advance(transfer.finish_exact)
        if transfer.remaining != 0:
            raise SimulationError(
                f"transfer {transfer.tid} fired completion with "
                f"{transfer.remaining} bytes left"
            )
        transfer.done = True
        del self.transfers[transfer.tid]
        if transfer.integrated != transfer.size:
            raise SimulationError(
                f"transfer {transfer.tid}: integrated {transfer.integrated} != "
                f"size {transfer.size}"
            )
        self.emit(f"{transfer.kind}_end", bytes=transfer.size, **transfer.payload)
        self._reallocate(transfer.finish_exact)
        if transfer.on_complete is not None:
            transfer.on_complete(transfer)
