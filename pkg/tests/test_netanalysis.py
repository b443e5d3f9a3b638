import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blsnc.bls import BlsParams
from blsnc.errors import ConfigError
from blsnc.minplus import ConcaveCurve, ConvexServiceCurve, hdev
from blsnc.netanalysis import (
    NetworkModel,
    Node,
    analyze,
    check_schedulability,
    e2e_delay,
    e2e_service,
    flow_residual,
    propagate,
)
from blsnc.traffic import FlowSpec, TrafficClassSpec

import oracles

C = 1e9
CLASSES = (
    TrafficClassSpec("SCT", 0, BlsParams(22118, 0, 0.46, p_low=2)),
    TrafficClassSpec("RC", 1),
    TrafficClassSpec("BE", 3),
)


def test_flow_residual_against_brute_force():
    beta = ConvexServiceCurve([(4.47e8, 5.06e-5)])
    others = ConcaveCurve([(2.56e5 * 9, 512 * 9)])
    got = flow_residual(beta, others)
    assert got.rate == pytest.approx(4.47e8 - 2.304e6)
    ts = np.linspace(0, 1e-3, 50)
    np.testing.assert_allclose(got(ts), oracles.residual([(4.47e8, 5.06e-5)], [(2.304e6, 4608)], 0.0, ts), rtol=1e-9, atol=1e-6)
    assert flow_residual(beta, ConcaveCurve.zero()) == beta


def test_propagation_adds_rate_times_latency():
    out = propagate(ConcaveCurve([(2.56e5, 512)]), ConvexServiceCurve([(1e8, 1e-5)]))
    assert out.pieces == ((2.56e5, pytest.approx(514.56)),)
    alpha = ConcaveCurve([(1e6, 1000)])
    assert propagate(alpha, ConvexServiceCurve([(1e18, 0.0)])).allclose(alpha)


def test_propagated_flows_add_up_through_a_shared_curve():
    beta = ConvexServiceCurve([(1e8, 1e-5)])
    flows = [ConcaveCurve([(r, b)]) for r, b in [(1e5, 100), (2e6, 3000), (5e5, 12000)]]
    apart = sum((propagate(a, beta) for a in flows), ConcaveCurve.zero())
    together = propagate(sum(flows, ConcaveCurve.zero()), beta)
    assert apart.allclose(together, rel=1e-12)


def test_tandem_of_rate_latency_nodes():
    got = e2e_service([ConvexServiceCurve([(1e8, 1e-5)]), ConvexServiceCurve([(5e7, 2e-5)])])
    assert got.rate == pytest.approx(5e7) and got.latency == pytest.approx(3e-5)
    one = ConvexServiceCurve([(1e8, 1e-5), (1e9, 5e-5)])
    assert e2e_service([one]) == one


def test_three_hop_tandem_against_segment_merge():
    hops = [[(1e8, 1e-5), (1e9, 5e-5)], [(3e8, 2e-5)], [(5e7, 0.0), (6e8, 1e-4)]]
    got = e2e_service([ConvexServiceCurve(h) for h in hops])
    ts = np.linspace(0, 1e-3, 41)
    np.testing.assert_allclose(got(ts), oracles.tandem(hops, ts, 2e-3), rtol=1e-6, atol=1e-3)


def lone_flow_model(mfs=512, bag=1.0):
    nodes = [Node("es", "es", C), Node("dst", "sink")]
    return NetworkModel(nodes, CLASSES, [FlowSpec("f", "SCT", bag, mfs, path=("es", "dst"))])


def test_lone_flow_on_an_end_system():
    # the end system may be sending a frame of the flow's own class: one frame of blocking
    d = e2e_delay(lone_flow_model(), "f")
    assert d == pytest.approx(512 / C + 512 / C)
    assert hdev(ConcaveCurve([(0.0, 512)]), ConvexServiceCurve([(C, 0.0)])) == pytest.approx(5.12e-7)


def two_switch_model(flows):
    nodes = [
        Node("es1", "es", C),
        Node("es2", "es", C),
        Node("sw1.p", "port", C, switch="sw1"),
        Node("sw2.p", "port", C, switch="sw2", propagation=2e-7),
        Node("dst", "sink"),
    ]
    return NetworkModel(nodes, CLASSES, flows, tech_latency=1e-6)


def test_report_decomposes_the_bound():
    flows = [
        FlowSpec("a", "SCT", 2e-3, 512, path=("es1", "sw1.p", "sw2.p", "dst")),
        FlowSpec("b", "RC", 2e-3, 2560, deadline=2e-3, path=("es2", "sw1.p", "sw2.p", "dst")),
        FlowSpec("c", "BE", 8e-3, 8192, jitter=5e-4, path=("es2", "sw1.p", "dst")),
    ]
    model = two_switch_model(flows)
    rep = analyze(model, e2e="per_hop")
    a = rep.flows["a"]
    assert [h.node for h in a.hops] == ["es1", "sw1.p", "sw2.p"]
    assert a.hops[1].store_forward == pytest.approx(512 / C) and a.hops[1].tech_latency == 1e-6
    assert a.hops[0].store_forward == 0 and a.hops[2].propagation == 2e-7
    parts = sum(h.delay + h.store_forward + h.tech_latency + h.propagation for h in a.hops)
    assert a.e2e == pytest.approx(parts)
    assert rep.flows["b"].margin == pytest.approx(2e-3 - rep.flows["b"].e2e)
    assert rep.schedulable and check_schedulability(model).schedulable


def test_overloaded_port_fails_the_rate_check():
    n = 430  # 430 * 2560 / 1e-3 = 1.1 Gb/s
    flows = [FlowSpec(f"r{i}", "RC", 1e-3, 2560, path=("es1", "sw1.p", "dst")) for i in range(n)]
    verdicts = check_schedulability(two_switch_model(flows))
    assert not verdicts.schedulable
    assert verdicts.rate_ok["sw1.p"] is False
    assert verdicts.deadline_ok["r0"] is False


def test_deadline_miss_is_reported():
    flows = [FlowSpec("a", "SCT", 2e-3, 512, deadline=1e-6, path=("es1", "sw1.p", "dst"))]
    v = check_schedulability(two_switch_model(flows))
    assert not v.schedulable and "deadline" in v.failures[0]


def test_invalid_paths_are_config_errors():
    bad = [
        FlowSpec("a", "SCT", 2e-3, 512, path=("sw1.p", "es1")),
        FlowSpec("a", "SCT", 2e-3, 512, path=("nowhere",)),
        FlowSpec("a", "XX", 2e-3, 512, path=("es1",)),
        FlowSpec("a", "SCT", 2e-3, 512, path=("dst",)),
    ]
    for f in bad:
        with pytest.raises(ConfigError):
            two_switch_model([f])


def test_identical_flows_share_results():
    flows = [FlowSpec(f"s{i}", "SCT", 2e-3, 512, path=("es1", "sw1.p", "sw2.p", "dst")) for i in range(50)]
    rep = analyze(two_switch_model(flows))
    assert len({rep.flows[f.id].e2e for f in flows}) == 1


def random_flows(draw_specs):
    flows = []
    for i, (cls, src, mfs, bag, two_hops) in enumerate(draw_specs):
        path = (src, "sw1.p", "sw2.p", "dst") if two_hops else (src, "sw1.p", "dst")
        flows.append(FlowSpec(f"f{i}", cls, bag, mfs, path=path))
    return flows


flow_specs = st.lists(
    st.tuples(st.sampled_from(["SCT", "RC", "BE"]), st.sampled_from(["es1", "es2"]), st.sampled_from([512, 2560, 8192, 12000]),
              st.sampled_from([1e-3, 2e-3, 8e-3]), st.booleans()),
    min_size=1, max_size=8,
)


@settings(max_examples=40, deadline=None)
@given(flow_specs)
def test_whole_path_bound_never_exceeds_the_sum_of_hops(specs):
    rep = analyze(two_switch_model(random_flows(specs)))
    for f in rep.flows.values():
        assert f.error is None
        assert f.e2e <= f.per_hop_sum * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(flow_specs, st.data())
def test_bigger_frames_or_shorter_periods_never_shrink_bounds(specs, data):
    i = data.draw(st.integers(0, len(specs) - 1))
    cls, src, mfs, bag, two = specs[i]
    grown = list(specs)
    grown[i] = (cls, src, mfs * data.draw(st.floats(1.0, 1.5)), bag * data.draw(st.floats(0.5, 1.0)), two)
    for mode in ("blind", "fifo"):
        before = analyze(two_switch_model(random_flows(specs)), within_class=mode)
        after = analyze(two_switch_model(random_flows(grown)), within_class=mode)
        for fid, f in before.flows.items():
            assert after.flows[fid].e2e >= f.e2e * (1 - 1e-9)
