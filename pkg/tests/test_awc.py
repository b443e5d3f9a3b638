import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blsnc.awc import CASES, SIDES, AwcConfig, awc_delay, awc_max, windows
from blsnc.bls import BlsParams
from blsnc.errors import ConfigError, DivergentFixedPoint

import oracles

C = 1e9


def worked(**changes):
    base = dict(link_rate=C, bls=BlsParams(22118, 0, 0.46), mfs_shaped=512, mfs_mc=2560, mfs_lc=8192,
                n_shaped=4, n_mc=2, bag_shaped=2e-3, bag_mc=2e-3, links_shaped=2, links_mc=2,
                clamp_to_traffic=False)
    base.update(changes)
    return AwcConfig(**base)


def test_worked_configuration():
    r = awc_delay(worked())
    assert r.delay == pytest.approx(1.43728e-5, abs=1e-9)
    assert r.iterations <= 10 and r.non_decreasing
    assert r.history[0] == pytest.approx(4 * 512 / C)


def test_windows_are_whole_frames():
    w = windows(worked())
    assert w.send_real * C / 512 == pytest.approx(round(w.send_real * C / 512))
    assert w.idle_real * C / 2560 == pytest.approx(round(w.idle_real * C / 2560))
    # the shaped side starts sending from the lowest reachable credit
    assert windows(worked(bls=BlsParams(22118, 8000, 0.46))).send_real >= windows(
        worked(bls=BlsParams(22118, 8000, 0.46)), "unshaped").send_real


def test_bad_arguments():
    with pytest.raises(ConfigError):
        awc_delay(worked(), side="middle")
    with pytest.raises(ConfigError):
        awc_delay(worked(), case="awc3")
    with pytest.raises(ConfigError):
        worked(links_shaped=0)
    with pytest.raises(DivergentFixedPoint):
        awc_delay(worked(), max_iterations=1)


def test_relative_tolerance_stops_early():
    tight = awc_delay(worked(n_mc=40, bag_mc=1e-4))
    loose = awc_delay(worked(n_mc=40, bag_mc=1e-4), rel_tolerance=0.5)
    assert loose.iterations <= tight.iterations
    assert loose.delay <= tight.delay


def test_clamp_never_raises_the_delay():
    for side in SIDES:
        for case in CASES:
            assert awc_delay(worked(clamp_to_traffic=True), side, case).delay <= awc_delay(worked(), side, case).delay


def test_max_is_the_larger_construction():
    cfg = worked()
    for side in SIDES:
        assert awc_max(cfg, side) == max(awc_delay(cfg, side, c).delay for c in CASES)


configs = st.fixed_dictionaries({
    "l_m": st.floats(4000, 2e5),
    "l_r_frac": st.floats(0, 0.95),
    "bw": st.floats(0.1, 0.9),
    "mfs_sct": st.integers(64, 1518).map(lambda b: b * 8),
    "mfs_rc": st.integers(64, 1518).map(lambda b: b * 8),
    "mfs_be": st.integers(0, 1518).map(lambda b: b * 8),
    "n_sct": st.integers(1, 200),
    "n_rc": st.integers(1, 200),
    "bag_sct": st.sampled_from([1e-3, 2e-3, 4e-3, 8e-3]),
    "bag_rc": st.sampled_from([1e-3, 2e-3, 4e-3, 8e-3]),
    "links_sct": st.integers(1, 8),
    "links_rc": st.integers(1, 8),
})


@settings(max_examples=300, deadline=None)
@given(configs)
def test_first_construction_against_reference(c):
    cfg = AwcConfig(C, BlsParams(c["l_m"], c["l_r_frac"] * c["l_m"], c["bw"]), c["mfs_sct"], c["mfs_rc"],
                    c["mfs_be"], c["n_sct"], c["n_rc"], c["bag_sct"], c["bag_rc"], c["links_sct"], c["links_rc"],
                    clamp_to_traffic=False)
    args = (C, c["l_m"], c["l_r_frac"] * c["l_m"], c["bw"], c["mfs_sct"], c["mfs_rc"], c["mfs_be"], c["n_sct"],
            c["n_rc"], c["bag_sct"], c["bag_rc"], c["links_sct"], c["links_rc"])
    for side, name in (("shaped", "sct"), ("unshaped", "rc")):
        try:
            ref = oracles.awc_reference(name, 1, *args)
        except RuntimeError:
            with pytest.raises(DivergentFixedPoint):
                awc_delay(cfg, side, "awc1", max_iterations=1000)
            continue
        got = awc_delay(cfg, side, "awc1", tolerance=1e-13)
        assert got.delay == pytest.approx(ref, rel=1e-9)


@settings(max_examples=300, deadline=None)
@given(configs)
def test_second_construction_against_reference(c):
    cfg = AwcConfig(C, BlsParams(c["l_m"], c["l_r_frac"] * c["l_m"], c["bw"]), c["mfs_sct"], c["mfs_rc"],
                    c["mfs_be"], c["n_sct"], c["n_rc"], c["bag_sct"], c["bag_rc"], c["links_sct"], c["links_rc"],
                    clamp_to_traffic=False)
    args = (C, c["l_m"], c["l_r_frac"] * c["l_m"], c["bw"], c["mfs_sct"], c["mfs_rc"], c["mfs_be"], c["n_sct"],
            c["n_rc"], c["bag_sct"], c["bag_rc"], c["links_sct"], c["links_rc"])
    for side, name in (("shaped", "sct"), ("unshaped", "rc")):
        try:
            ref = oracles.awc_reference(name, 2, *args)
        except RuntimeError:
            continue
        got = awc_delay(cfg, side, "awc2", tolerance=1e-13, max_iterations=1000)
        assert got.delay == pytest.approx(ref, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(configs, st.integers(1, 50))
def test_more_competing_frames_never_shorten_the_delay(c, extra):
    def cfg(n_rc, n_sct):
        return AwcConfig(C, BlsParams(c["l_m"], c["l_r_frac"] * c["l_m"], c["bw"]), c["mfs_sct"], c["mfs_rc"],
                         c["mfs_be"], n_sct, n_rc, c["bag_sct"], c["bag_rc"], 1, 1)

    try:
        base = awc_delay(cfg(c["n_rc"], c["n_sct"]), "shaped").delay
        more = awc_delay(cfg(c["n_rc"] + extra, c["n_sct"]), "shaped").delay
    except DivergentFixedPoint:
        return
    assert more >= base - 1e-12
    assert np.isfinite(more)
