import pytest

from nvsim.cluster import (
    AggregateReport,
    ClusterSpec,
    NodeSpec,
    aggregate_metrics,
    cluster_from_dict,
    collect_validation_problems,
    crossover_nodes,
    format_scaled,
    scaling_report,
    uniform_cluster,
    validate_cluster,
)
from nvsim.errors import (
    ClusterValidationError,
    DlmRequiresDram,
    DuplicateNodeId,
    HeterogeneousCluster,
    NonPositiveParameter,
    SlotOverflow,
)
from nvsim.memory import MemoryMode

GB = 10**9
TB = 10**12


def paper_node(node_id=0, **overrides):
    """6 DRAM + 6 B-APM DIMMs per socket, 3 TB and 2 TFlop/s per node."""
    fields = dict(
        node_id=node_id,
        dram_dimm_bytes=16 * GB,
        bapm_dimm_bytes=250 * GB,
        dram_dimms_per_socket=6,
        bapm_dimms_per_socket=6,
        dram_bw=100 * GB,
        bapm_bw=20 * GB,
        flops=2 * TB,
        link_bw=12_500_000_000,
    )
    fields.update(overrides)
    return NodeSpec(**fields)


def make_cluster(nodes):
    return ClusterSpec(nodes=tuple(nodes), external_fs_bw=100 * GB,
                       external_fs_capacity=10**16)


class TestValidation:
    def test_paper_configuration_is_valid(self):
        spec = make_cluster([paper_node()])
        assert validate_cluster(spec) is spec

    def test_slot_overflow(self):
        spec = make_cluster([paper_node(dram_dimms_per_socket=7)])
        with pytest.raises(ClusterValidationError) as err:
            validate_cluster(spec)
        assert any(isinstance(e, SlotOverflow) for e in err.value.errors)

    def test_dlm_without_dram_rejected(self):
        node = paper_node(dram_dimms_per_socket=1, initial_mode=MemoryMode.DLM)
        # legal with one DRAM DIMM per socket
        validate_cluster(make_cluster([node]))
        bad = make_cluster([paper_node(node_id=0, initial_mode=MemoryMode.DLM,
                                       dram_dimms_per_socket=0, dram_dimm_bytes=16 * GB)])
        errors, _ = collect_validation_problems(bad)
        assert any(isinstance(e, DlmRequiresDram) for e in errors)

    def test_duplicate_and_sparse_ids(self):
        errors, _ = collect_validation_problems(
            make_cluster([paper_node(0), paper_node(0)]))
        assert any(isinstance(e, DuplicateNodeId) for e in errors)
        errors, _ = collect_validation_problems(
            make_cluster([paper_node(0), paper_node(2)]))
        assert any(isinstance(e, DuplicateNodeId) for e in errors)

    def test_nonpositive_bandwidth(self):
        errors, _ = collect_validation_problems(
            make_cluster([paper_node(bapm_bw=0)]))
        assert any(isinstance(e, NonPositiveParameter) for e in errors)

    def test_density_ratio_warns_not_errors(self):
        # 250/16 = 15.6x falls outside the projected 2-5x band
        errors, warnings = collect_validation_problems(make_cluster([paper_node()]))
        assert not errors
        assert any("density" in w for w in warnings)
        ok = paper_node(dram_dimm_bytes=100 * GB)
        _, warnings = collect_validation_problems(make_cluster([ok]))
        assert not warnings

    def test_validation_is_idempotent(self):
        spec = validate_cluster(make_cluster([paper_node()]))
        errors, _ = collect_validation_problems(spec)
        assert errors == []

    def test_node_without_bapm_is_legal(self):
        node = paper_node(bapm_dimms_per_socket=0)
        validate_cluster(make_cluster([node]))


class TestAggregates:
    # (nodes, PFlop/s, PB, TB/s) rows from the scaling projection table
    TABLE = [
        (1, "0.002", "0.003", "0.02"),
        (768, "1.5", "2.3", "15"),
        (3072, "6", "9", "61"),
        (24576, "49", "73", "491"),
        (196608, "393", "589", "3932"),
    ]

    @pytest.mark.parametrize("n,pflops,pb,tbs", TABLE)
    def test_scaling_rows(self, n, pflops, pb, tbs):
        report = scaling_report(n, 3 * TB, 2 * TB, 20 * GB)
        assert report.compute_pflops == pflops
        assert report.bapm_capacity_pb == pb
        assert report.bapm_io_bw_tbs == tbs

    def test_aggregate_matches_scaling_report(self):
        spec = make_cluster([paper_node(i) for i in range(768)])
        report = aggregate_metrics(spec)
        assert report == scaling_report(768, 3 * TB, 2 * TB, 20 * GB)

    def test_empty_cluster(self):
        report = aggregate_metrics(make_cluster([]))
        assert report == AggregateReport(0, 0, 0, 0)
        assert report.compute_pflops == "0"

    def test_linear_in_node_count(self):
        one = scaling_report(7, 3 * TB, 2 * TB, 20 * GB)
        two = scaling_report(14, 3 * TB, 2 * TB, 20 * GB)
        assert two.flops_total == 2 * one.flops_total
        assert two.bapm_bytes_total == 2 * one.bapm_bytes_total
        assert two.bapm_bw_total == 2 * one.bapm_bw_total

    def test_heterogeneous_report_rejected(self):
        spec = make_cluster([paper_node(0), paper_node(1, flops=4 * TB)])
        with pytest.raises(HeterogeneousCluster):
            aggregate_metrics(spec)

    def test_truncation_not_rounding(self):
        # 24576 x 20 GB/s = 491.52 TB/s must truncate to 491
        assert format_scaled(491_520_000_000_000, 12) == "491"
        assert format_scaled(2_304_000_000_000_000, 15) == "2.3"
        assert format_scaled(1_536_000_000_000_000, 15) == "1.5"
        assert format_scaled(6_144_000_000_000_000, 15) == "6"
        assert format_scaled(199_999_999_999, 12) == "0.1"


class TestCrossover:
    def test_titan_filesystem_crossover(self):
        # 1.4 TB/s external filesystem vs 20 GB/s per node.  Linear-scan
        # verification of the minimal count.
        target, per_node = 1_400_000_000_000, 20 * GB
        n = crossover_nodes(target, per_node)
        assert n == 70
        assert n * per_node >= target
        assert (n - 1) * per_node < target

    def test_burst_buffer_target(self):
        assert crossover_nodes(50 * TB, 20 * GB) == 2500

    def test_exact_match_needs_one_node(self):
        assert crossover_nodes(20 * GB, 20 * GB) == 1

    def test_nonpositive_rejected(self):
        with pytest.raises(NonPositiveParameter):
            crossover_nodes(0, 20 * GB)
        with pytest.raises(NonPositiveParameter):
            crossover_nodes(20 * GB, -1)


class TestConfigFile:
    def test_from_dict_with_units_and_count(self):
        spec = cluster_from_dict({
            "external_fs": {"bandwidth": "100GB/s", "capacity": "10PB"},
            "mode_switch": "300s",
            "nodes": [{
                "count": 4,
                "dram_dimm": "16GB",
                "bapm_dimm": "250GB",
                "bapm_dimms_per_socket": 6,
                "dram_bw": "100GB/s",
                "bapm_bw": "20GB/s",
                "flops": "2TFlop/s",
                "link_bw": "12.5GB/s",
            }],
            "distributed_fs": {"members": [0, 1, 2, 3]},
        })
        assert len(spec.nodes) == 4
        assert spec.nodes[3].node_id == 3
        assert spec.nodes[0].bapm_capacity == 3 * TB
        assert spec.external_fs_bw == 100 * GB
        assert spec.dfs_members == (0, 1, 2, 3)

    def test_uniform_cluster_helper(self):
        spec = uniform_cluster(4)
        assert aggregate_metrics(spec).bapm_bytes_total == 12 * TB
