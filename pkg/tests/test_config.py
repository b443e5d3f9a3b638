import json
from importlib.resources import files

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blsnc import units
from blsnc.config import (
    SCHEMA_VERSION,
    load_json,
    network_with,
    parse_awc,
    parse_network,
    parse_simulation,
)
from blsnc.errors import ConfigError
from blsnc.scenarios import parse_scenario

FIXTURES = files("blsnc") / "fixtures"


def minimal(**over):
    data = {
        "version": SCHEMA_VERSION,
        "classes": [
            {"name": "SCT", "priority": 0, "bls": {"l_m": 22118, "l_r": 0, "bw": 0.46, "p_low": 2}},
            {"name": "RC", "priority": 1},
        ],
        "nodes": [{"id": "P", "kind": "port"}],
        "flows": [
            {"id": "s", "class": "SCT", "mfs": 64, "bag": "2ms", "path": ["P"], "count": 3},
            {"id": "r", "class": "RC", "mfs": "2560bits", "bag": 0.002, "path": ["P"], "deadline": "1ms"},
        ],
    }
    data.update(over)
    return data


def test_units():
    assert units.duration("2ms") == pytest.approx(2e-3)
    assert units.duration(0.5) == 0.5
    assert units.rate("1Gbps") == 1e9
    assert units.size_bits(64) == 512
    assert units.size_bits("2560bits") == 2560
    assert units.expand_range("[0.1:0.1:0.5]") == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
    assert units.expand_range({"start": 1, "stop": 3, "num": 3}) == pytest.approx([1, 2, 3])
    for bad in ("fast", "2 parsecs", True):
        with pytest.raises(ConfigError):
            units.duration(bad)


@given(st.integers(1, 10_000), st.integers(1, 50), st.integers(1, 100))
def test_inclusive_ranges(start, step, count):
    stop = start + step * (count - 1)
    got = units.expand_range(f"[{start}:{step}:{stop}]")
    assert len(got) == count and got[0] == start and got[-1] == pytest.approx(stop)


def test_network_round_trip():
    model, options = parse_network(minimal(analysis={"within_class": "fifo"}))
    assert options == {"within_class": "fifo"}
    sct = next(f for f in model.flows if f.cls == "SCT")
    assert (sct.mfs, sct.bag, sct.count) == (512, pytest.approx(2e-3), 3)
    assert model.classes[0].bls.l_m == 22118
    assert model.nodes["P"].link_rate == 1e9


def test_utilization_sets_counts():
    data = minimal()
    data["flows"][0] = {"id": "s", "class": "SCT", "mfs": 64, "bag": "2ms", "path": ["P"], "utilization": 0.2}
    model, _ = parse_network(data)
    assert next(f for f in model.flows if f.cls == "SCT").count == 782


def test_resume_level_per_bandwidth():
    data = minimal()
    data["classes"][0]["bls"] = {"l_m": 5120, "l_r_per_bw": 4096, "bw": 0.5, "p_low": 2}
    model, _ = parse_network(data)
    assert model.classes[0].bls.l_r == 2048
    data["classes"][0]["bls"]["l_r"] = 10
    with pytest.raises(ConfigError, match="not both"):
        parse_network(data)


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(version=2), "version"),
    (lambda d: d["classes"][0]["bls"].update(bw=1.5), "bw"),
    (lambda d: d["flows"][0].pop("bag"), "bag"),
    (lambda d: d["flows"][0].update(utilization=1.2), "utilization"),
    (lambda d: d["flows"][0].update(path=["nowhere"]), "nowhere"),
    (lambda d: d.update(analysis={"speed": 1}), "unknown option"),
    (lambda d: d["classes"].append({"name": "SCT", "priority": 5}), "duplicate"),
])
def test_errors_name_the_field(mutate, message):
    data = minimal()
    mutate(data)
    with pytest.raises(ConfigError, match=message):
        parse_network(data)


def test_network_with_replaces_one_parameter():
    data = minimal()
    assert network_with(data, "bw", "SCT", 0.3)["classes"][0]["bls"]["bw"] == 0.3
    assert network_with(data, "l_r_frac", "SCT", 0.5)["classes"][0]["bls"]["l_r"] == 11059
    assert network_with(data, "count", "RC", 4)["flows"][1]["count"] == 4
    assert network_with(data, "utilization", "SCT", 20)["flows"][0]["utilization"] == 0.2
    assert data["classes"][0]["bls"]["bw"] == 0.46  # the input is untouched
    with pytest.raises(ConfigError):
        network_with(data, "bw", "RC", 0.3)
    with pytest.raises(ConfigError):
        network_with(data, "count", "RC", 1.5)


def test_load_json_errors(tmp_path):
    with pytest.raises(ConfigError, match="No such file"):
        load_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_json(bad)


def test_bundled_fixtures_parse():
    for path in FIXTURES.iterdir():
        if not path.name.endswith(".json"):
            continue
        data = load_json(path)
        if "sweep" in data:
            parse_scenario(data, FIXTURES)
        elif "pattern" in data:
            parse_simulation(data, FIXTURES)
        elif "mfs" in data and "nodes" not in data:
            parse_awc(data)
        else:
            parse_network(data)


def test_awc_and_simulation_settings(tmp_path):
    cfg = parse_awc(load_json(FIXTURES / "awc_worked.json"))
    assert (cfg.mfs_shaped, cfg.mfs_mc, cfg.n_shaped, cfg.links_mc) == (512, 2560, 4, 2)
    assert not cfg.clamp_to_traffic
    sim = parse_simulation(load_json(FIXTURES / "usecase1_simulation.json"), FIXTURES)
    assert (sim["port"], sim["pattern"], sim["frames"], sim["seed"]) == ("SW1.out", "random", 10000, 1)
    (tmp_path / "net.json").write_text(json.dumps(minimal()))
    with pytest.raises(ConfigError, match="pattern"):
        parse_simulation({"version": 1, "network": "net.json", "pattern": "chaos"}, tmp_path)
    with pytest.raises(ConfigError, match="port"):
        parse_simulation({"version": 1, "network": "net.json", "port": "Q"}, tmp_path)
