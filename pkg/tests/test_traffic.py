import pytest
from hypothesis import given
from hypothesis import strategies as st

from blsnc.errors import ConfigError
from blsnc.minplus import ConcaveCurve
from blsnc.traffic import FlowSpec, TrafficClassSpec, class_arrival_curve, flows_for_utilization
from blsnc.bls import BlsParams


def flow(i, mfs=512, bag=2e-3, jitter=0.0):
    return FlowSpec(f"f{i}", "SCT", bag, mfs, jitter=jitter, path=("es",))


def test_single_flow_curve():
    assert class_arrival_curve([flow(0)]) == ConcaveCurve([(2.56e5, 512)])


def test_empty_is_zero():
    c = class_arrival_curve([])
    assert c.rate == 0 and c.burst == 0


def test_jitter_adds_rate_times_jitter():
    be = FlowSpec("be", "BE", 8e-3, 8192, jitter=5e-4, path=("es",))
    c = class_arrival_curve([be])
    assert c.rate == pytest.approx(1.024e6)
    assert c.burst == pytest.approx(8704)


@given(st.lists(st.tuples(st.integers(64, 1518), st.sampled_from([1e-3, 2e-3, 8e-3]), st.floats(0, 1e-3)), min_size=1, max_size=12),
       st.integers(0, 11))
def test_additive(specs, cut):
    flows = [flow(i, m * 8, b, j) for i, (m, b, j) in enumerate(specs)]
    whole = class_arrival_curve(flows)
    parts = class_arrival_curve(flows[:cut]) + class_arrival_curve(flows[cut:])
    assert whole.rate == pytest.approx(parts.rate, rel=1e-12)
    assert whole.burst == pytest.approx(parts.burst, rel=1e-12)


@pytest.mark.parametrize("ur,mfs,n", [(0.03, 2560, 24), (0.20, 512, 782)])
def test_flow_counts(ur, mfs, n):
    assert flows_for_utilization(ur, 1e9, mfs, 2e-3) == n
    assert (n - 1) * mfs / 2e-3 < ur * 1e9 <= n * mfs / 2e-3


def test_exact_utilization_needs_no_rounding():
    # 0.256 Gbps at 512 bits per 2 ms is exactly 1000 flows
    assert flows_for_utilization(0.256, 1e9, 512, 2e-3) == 1000


@given(st.floats(1e-4, 0.99), st.sampled_from([512, 2560, 8192, 12000]), st.sampled_from([1e-3, 2e-3, 8e-3, 128e-3]))
def test_flow_count_meets_target_within_one_flow(ur, mfs, bag):
    n = flows_for_utilization(ur, 1e9, mfs, bag)
    got = n * mfs / bag
    assert got >= ur * 1e9 * (1 - 1e-9)
    assert n == 1 or got - mfs / bag < ur * 1e9 * (1 + 1e-9)


def test_flow_validation():
    with pytest.raises(ConfigError):
        FlowSpec("x", "SCT", 0, 512, path=("es",))
    with pytest.raises(ConfigError):
        FlowSpec("x", "SCT", 1e-3, 512, path=())
    with pytest.raises(ConfigError):
        FlowSpec("x", "SCT", 1e-3, 512, jitter=-1, path=("es",))
    with pytest.raises(ConfigError):
        FlowSpec("x", "SCT", 1e-3, 512, deadline=0, path=("es",))


def test_class_levels():
    sct = TrafficClassSpec("SCT", 0, BlsParams(22118, 0, 0.46, p_low=2))
    assert sct.levels() == (0, 2) and sct.shaped
    assert sct.unshaped().levels() == (0,)
    with pytest.raises(ConfigError):
        TrafficClassSpec("SCT", 3, BlsParams(22118, 0, 0.46, p_low=2))
