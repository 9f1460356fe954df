"""Exception hierarchy.

Config errors map to CLI exit code 1, workload errors to 2, and runtime
errors (internal consistency violations) to 3.
"""


class NvsimError(Exception):
    pass


# --- cluster / config validation -------------------------------------------

class ConfigError(NvsimError):
    pass


class SlotOverflow(ConfigError):
    pass


class DlmRequiresDram(ConfigError):
    pass


class NonPositiveParameter(ConfigError):
    pass


class DuplicateNodeId(ConfigError):
    pass


class HeterogeneousCluster(ConfigError):
    pass


class MemberWithoutBapm(ConfigError):
    pass


class UnitError(ConfigError):
    pass


class ClusterValidationError(ConfigError):
    """Aggregate of all validation errors found in one pass."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


# --- workload ---------------------------------------------------------------

class WorkloadError(NvsimError):
    pass


class WorkloadSyntaxError(WorkloadError):
    pass


class UnknownDataset(WorkloadError):
    pass


class InfeasibleRequest(WorkloadError):
    pass


class CyclicWorkflow(WorkloadError):
    pass


class AccessDenied(WorkloadError):
    pass


# --- runtime ----------------------------------------------------------------

class SimulationError(NvsimError):
    pass


class EventInPast(SimulationError):
    pass


class NodeBusy(SimulationError):
    pass


class HitRateOutOfRange(NvsimError):
    pass


class InsufficientCapacity(SimulationError):
    pass


class TierFull(SimulationError):
    pass


class OrderingViolation(NvsimError):
    """A scenario trace violated the expected event ordering."""

    def __init__(self, first, second):
        self.first = first
        self.second = second
        super().__init__(f"expected {first!r} before {second!r}")
