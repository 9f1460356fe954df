import pytest
from hypothesis import given, strategies as st

from nvsim.errors import DlmRequiresDram, HitRateOutOfRange
from nvsim.memory import (
    MemoryMode,
    check_mode_supported,
    dlm_slowdown,
    effective_latency_ns,
    visible_memory,
)

from test_cluster import paper_node

GB = 10**9
TB = 10**12


def test_slm_exposes_two_spaces():
    view = visible_memory(paper_node(), MemoryMode.SLM)
    assert view.volatile_bytes == 192 * GB
    assert view.persistent_bytes == 3 * TB
    assert view.persistence_guaranteed is True


def test_dlm_exposes_only_bapm_and_loses_persistence():
    view = visible_memory(paper_node(), MemoryMode.DLM)
    assert view.volatile_bytes == 3 * TB
    assert view.persistent_bytes == 0
    assert view.persistence_guaranteed is False


def test_node_without_bapm_in_slm():
    view = visible_memory(paper_node(bapm_dimms_per_socket=0), MemoryMode.SLM)
    assert view.volatile_bytes == 192 * GB
    assert view.persistent_bytes == 0
    assert view.persistence_guaranteed is True


def test_dlm_requires_dram_dimms():
    check_mode_supported(paper_node(), MemoryMode.DLM)
    with pytest.raises(DlmRequiresDram):
        check_mode_supported(paper_node(dram_dimms_per_socket=0), MemoryMode.DLM)


class TestEffectiveLatency:
    def test_endpoints_and_mixture(self):
        node = paper_node(dram_latency_ns=100, bapm_latency_ratio=5.0)
        assert effective_latency_ns(node, 1.0) == 100.0
        assert effective_latency_ns(node, 0.0) == 500.0
        assert effective_latency_ns(node, 0.8) == pytest.approx(180.0)

    def test_hit_rate_out_of_range(self):
        node = paper_node()
        for bad in (-0.1, 1.1):
            with pytest.raises(HitRateOutOfRange):
                effective_latency_ns(node, bad)

    @given(st.floats(min_value=0.0, max_value=1.0),
           st.floats(min_value=0.0, max_value=1.0))
    def test_monotone_non_increasing_in_hit_rate(self, a, b):
        node = paper_node(dram_latency_ns=100, bapm_latency_ratio=7.5)
        lo, hi = sorted((a, b))
        assert effective_latency_ns(node, hi) <= effective_latency_ns(node, lo)

    def test_slowdown_ratio_is_exact(self):
        node = paper_node(dram_latency_ns=100, bapm_latency_ratio=5.0)
        assert dlm_slowdown(node, 1.0) == 1
        assert dlm_slowdown(node, 0.0) == 5
