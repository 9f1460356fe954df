from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from nvsim.errors import UnitError
from nvsim.units import (
    fraction_to_str,
    ns_to_seconds_str,
    parse_bytes,
    parse_duration_ns,
    parse_flops,
    parse_rate,
)


def test_bytes_si_decimal():
    assert parse_bytes("300GB") == 300_000_000_000
    assert parse_bytes("3TB") == 3_000_000_000_000
    assert parse_bytes("1.5TB") == 1_500_000_000_000
    assert parse_bytes("512B") == 512
    assert parse_bytes(1024) == 1024


def test_rate_and_flops():
    assert parse_rate("20GB/s") == 20 * 10**9
    assert parse_rate("12.5GB/s") == 12_500_000_000
    assert parse_flops("2TFlop/s") == 2 * 10**12


def test_durations():
    assert parse_duration_ns("300s") == 300 * 10**9
    assert parse_duration_ns("100ns") == 100
    assert parse_duration_ns("1.5ms") == 1_500_000
    assert parse_duration_ns("24h") == 24 * 3600 * 10**9
    assert parse_duration_ns(2) == 2 * 10**9


@pytest.mark.parametrize("bad", ["", "GB", "3XB", "12..5GB", "1GB/ss", None, True])
def test_garbage_rejected(bad):
    with pytest.raises(UnitError):
        parse_bytes(bad)


def test_sub_ns_duration_rejected():
    with pytest.raises(UnitError):
        parse_duration_ns("0.5ns")


def test_seconds_rendering_is_exact():
    assert ns_to_seconds_str(0) == "0.000000000"
    assert ns_to_seconds_str(1_500_000_000) == "1.500000000"
    assert ns_to_seconds_str(12) == "0.000000012"
    # beyond float53 precision
    big = 10**17 + 1
    assert ns_to_seconds_str(big) == "100000000.000000001"


def test_fraction_rendering_truncates():
    assert fraction_to_str(Fraction(1, 3), 6) == "0.333333"
    assert fraction_to_str(Fraction(5, 2), 2) == "2.50"


@given(st.integers(min_value=0, max_value=10**7))
def test_gb_round_trip(n):
    assert parse_bytes(f"{n}GB") == n * 10**9
