"""Versioned JSON configuration for networks, sweeps, AWC runs and simulations.

Frame sizes are bytes unless suffixed (``"512bits"``); shaper thresholds are bits
unless suffixed (``"64bytes"``). Durations and rates accept unit suffixes
(``"2ms"``, ``"1Gbps"``) and are normalized to seconds and bits per second.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from . import units
from .bls import BlsParams
from .errors import BlsncError, ConfigError
from .netanalysis import NetworkModel, Node
from .traffic import FlowSpec, TrafficClassSpec, flows_for_utilization

SCHEMA_VERSION = 1


def _get(obj, key, where, default=...):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    if key in obj:
        return obj[key]
    if default is ...:
        raise ConfigError(f"{where}.{key}: missing required field")
    return default


def _bits(value, where):
    """Credit thresholds: bare numbers are bits."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    s = str(value).strip()
    if s and (s[-1].isdigit() or s[-1] == "."):
        return units.size_bits(s + "bits", where)
    return units.size_bits(s, where)


def load_json(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    check_version(data, str(path))
    return data


def check_version(data, where):
    version = _get(data, "version", where)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{where}.version: unsupported schema version {version!r} (expected {SCHEMA_VERSION})")


def parse_bls(obj, where):
    """Shaper settings; ``l_r_per_bw`` sets the resume level to that many bits times ``bw``."""
    try:
        bw = float(_get(obj, "bw", where))
        if "l_r_per_bw" in obj:
            if "l_r" in obj:
                raise ConfigError(f"{where}: give either l_r or l_r_per_bw, not both")
            l_r = _bits(obj["l_r_per_bw"], f"{where}.l_r_per_bw") * bw
        else:
            l_r = _bits(_get(obj, "l_r", where, 0), f"{where}.l_r")
        return BlsParams(
            l_m=_bits(_get(obj, "l_m", where), f"{where}.l_m"),
            l_r=l_r,
            bw=bw,
            p_low=int(_get(obj, "p_low", where)),
        )
    except BlsncError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None


def parse_classes(items, where):
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{where}: expected a non-empty list of classes")
    out = []
    for i, c in enumerate(items):
        w = f"{where}[{i}]"
        bls = _get(c, "bls", w, None)
        out.append(
            TrafficClassSpec(
                name=str(_get(c, "name", w)),
                priority=int(_get(c, "priority", w)),
                bls=parse_bls(bls, f"{w}.bls") if bls is not None else None,
            )
        )
    names = [c.name for c in out]
    if len(set(names)) != len(names):
        raise ConfigError(f"{where}: duplicate class names")
    return tuple(out)


def _flows(item, where, link_rate):
    """One flow entry expands to one FlowSpec per path; ``utilization`` sets the counts."""
    cls = str(_get(item, "class", where))
    mfs = units.size_bits(_get(item, "mfs", where), f"{where}.mfs")
    bag = units.duration(_get(item, "bag", where), f"{where}.bag")
    jitter = units.duration(_get(item, "jitter", where, 0), f"{where}.jitter")
    deadline = _get(item, "deadline", where, None)
    deadline = units.duration(deadline, f"{where}.deadline") if deadline is not None else None
    fid = str(_get(item, "id", where))
    if "paths" in item:
        paths = _get(item, "paths", where)
    else:
        paths = [_get(item, "path", where)]
    if not isinstance(paths, list) or not paths or not all(isinstance(p, list) for p in paths):
        raise ConfigError(f"{where}.paths: expected a non-empty list of node lists")
    ur = _get(item, "utilization", where, None)
    if ur is not None:
        ur = float(ur)
        if not 0 < ur < 1:
            raise ConfigError(f"{where}.utilization: must lie in (0, 1), got {ur}")
        count = flows_for_utilization(ur / len(paths), link_rate, mfs, bag)
    else:
        count = int(_get(item, "count", where, 1))
    out = []
    for k, path in enumerate(paths):
        out.append(
            FlowSpec(
                id=fid if len(paths) == 1 else f"{fid}@{k}",
                cls=cls,
                bag=bag,
                mfs=mfs,
                jitter=jitter,
                deadline=deadline,
                path=tuple(str(n) for n in path),
                count=count,
            )
        )
    return out


def parse_network(data, where="network"):
    """Build a :class:`NetworkModel` (and the analysis options) from a config dict."""
    check_version(data, where)
    default_rate = units.rate(_get(data, "link_rate", where, "1Gbps"), f"{where}.link_rate")
    classes = parse_classes(_get(data, "classes", where), f"{where}.classes")
    nodes = []
    for i, n in enumerate(_get(data, "nodes", where)):
        w = f"{where}.nodes[{i}]"
        kind = str(_get(n, "kind", w))
        node_classes = _get(n, "classes", w, None)
        try:
            nodes.append(
                Node(
                    id=str(_get(n, "id", w)),
                    kind=kind,
                    link_rate=0.0 if kind == "sink" else units.rate(_get(n, "link_rate", w, default_rate), f"{w}.link_rate"),
                    switch=_get(n, "switch", w, None),
                    classes=parse_classes(node_classes, f"{w}.classes") if node_classes is not None else None,
                    propagation=units.duration(_get(n, "propagation", w, 0), f"{w}.propagation"),
                    shaping=_get(n, "shaping", w, None),
                )
            )
        except ConfigError as exc:
            raise ConfigError(f"{w}: {exc}") from None
    flows = []
    for i, f in enumerate(_get(data, "flows", where)):
        try:
            flows.extend(_flows(f, f"{where}.flows[{i}]", default_rate))
        except ConfigError as exc:
            msg = str(exc)
            raise ConfigError(msg if msg.startswith(where) else f"{where}.flows[{i}]: {msg}") from None
    tech = units.duration(_get(data, "tech_latency", where, "1us"), f"{where}.tech_latency")
    model = NetworkModel(nodes, classes, flows, tech_latency=tech)
    analysis = dict(_get(data, "analysis", where, {}))
    unknown = set(analysis) - {"within_class", "e2e"}
    if unknown:
        raise ConfigError(f"{where}.analysis: unknown option(s) {sorted(unknown)}")
    return model, analysis


def resolve_network(data, base_dir, where="network"):
    """Inline network object or a path (relative to ``base_dir``) to a network file."""
    if isinstance(data, str):
        path = Path(base_dir) / data
        return load_json(path)
    check_version(data, where)
    return data


def network_with(data, param, target, value):
    """Copy of a network config with one parameter replaced.

    ``param`` is ``utilization`` (percent) or ``count`` (flows per path) for every flow
    entry of class ``target``, or ``bw``, ``l_m``, ``l_r`` or ``l_r_frac`` (of ``l_m``)
    for the shaper of class ``target``.
    """
    data = copy.deepcopy(data)
    if param in ("utilization", "count"):
        hits = [f for f in data["flows"] if f.get("class") == target]
        if not hits:
            raise ConfigError(f"sweep: no flow of class {target!r}")
        for f in hits:
            f.pop("count", None)
            f.pop("utilization", None)
            if param == "count":
                if value != int(value) or value < 1:
                    raise ConfigError(f"sweep: count must be a positive integer, got {value}")
                f["count"] = int(value)
            else:
                f["utilization"] = value / 100.0
        return data
    tables = [data["classes"]] + [n["classes"] for n in data["nodes"] if "classes" in n]
    hit = False
    for table in tables:
        for c in table:
            if c.get("name") != target:
                continue
            if c.get("bls") is None:
                raise ConfigError(f"sweep: class {target!r} has no shaper")
            bls = c["bls"]
            if param in ("bw", "l_m"):
                bls[param] = value
            elif param in ("l_r", "l_r_frac"):
                bls.pop("l_r_per_bw", None)
                bls["l_r"] = value if param == "l_r" else value * _bits(bls["l_m"], "l_m")
            else:
                raise ConfigError(f"sweep.param: unknown parameter {param!r}")
            hit = True
    if not hit:
        raise ConfigError(f"sweep: class {target!r} not found")
    return data


def parse_awc(data, where="awc"):
    """An :class:`~blsnc.awc.AwcConfig` from ``{link_rate, bls, mfs, count, bag, links}``.

    ``mfs``, ``count``, ``bag`` and ``links`` map ``shaped`` / ``mc`` (and ``lc`` for
    ``mfs``) to values; frame sizes are bytes unless suffixed.
    """
    from .awc import AwcConfig

    check_version(data, where)
    mfs = _get(data, "mfs", where)
    count = _get(data, "count", where)
    bag = _get(data, "bag", where)
    links = _get(data, "links", where, {})
    try:
        return AwcConfig(
            link_rate=units.rate(_get(data, "link_rate", where, "1Gbps"), f"{where}.link_rate"),
            bls=parse_bls(_get(data, "bls", where), f"{where}.bls"),
            mfs_shaped=units.size_bits(_get(mfs, "shaped", f"{where}.mfs"), f"{where}.mfs.shaped"),
            mfs_mc=units.size_bits(_get(mfs, "mc", f"{where}.mfs"), f"{where}.mfs.mc"),
            mfs_lc=units.size_bits(_get(mfs, "lc", f"{where}.mfs", 0), f"{where}.mfs.lc"),
            n_shaped=int(_get(count, "shaped", f"{where}.count")),
            n_mc=int(_get(count, "mc", f"{where}.count")),
            bag_shaped=units.duration(_get(bag, "shaped", f"{where}.bag"), f"{where}.bag.shaped"),
            bag_mc=units.duration(_get(bag, "mc", f"{where}.bag"), f"{where}.bag.mc"),
            links_shaped=int(_get(links, "shaped", f"{where}.links", 1)),
            links_mc=int(_get(links, "mc", f"{where}.links", 1)),
            clamp_to_traffic=bool(_get(data, "clamp_to_traffic", where, True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


SIM_PATTERNS = ("random", "worst_min_service", "demotion_gap")


def parse_simulation(data, base_dir=".", where="simulation"):
    """Simulation settings: the network (one port fed directly), port id, pattern, size and seed."""
    check_version(data, where)
    network = resolve_network(_get(data, "network", where), base_dir, f"{where}.network")
    model, _ = parse_network(network)
    port = str(_get(data, "port", where, next(iter(model.nodes))))
    if port not in model.nodes:
        raise ConfigError(f"{where}.port: unknown node {port!r}")
    pattern = str(_get(data, "pattern", where, "random"))
    if pattern not in SIM_PATTERNS:
        raise ConfigError(f"{where}.pattern: expected one of {SIM_PATTERNS}, got {pattern!r}")
    frames = int(_get(data, "frames", where, 10_000))
    if frames < 1:
        raise ConfigError(f"{where}.frames: must be >= 1")
    return {
        "model": model,
        "port": port,
        "pattern": pattern,
        "frames": frames,
        "seed": int(_get(data, "seed", where, 0)),
        "duration_ns": int(_get(data, "duration_ns", where, 400_000)),
    }
