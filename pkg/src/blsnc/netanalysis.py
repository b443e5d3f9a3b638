"""End-to-end delay bounds over a feed-forward network of end systems and switch ports.

Nodes are processed in topological order. At each node the class service curves come
from :class:`~blsnc.mux.PortMux` (plain static priority at end systems), then each
flow gets either

* ``within_class="blind"``: the class curve left over after every other flow of the
  same class (no assumption on the order inside the class), or
* ``within_class="fifo"``: the class-aggregate delay, valid for every flow because a
  class queue is served first-in first-out.

Flows that share class, frame size, period, jitter and path are analyzed once.
"""

from __future__ import annotations

import graphlib
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace

from .errors import BlsncError, ConfigError, NullService, UnstableRate
from .minplus import ConcaveCurve, ConvexServiceCurve, convolve, deconvolve, hdev, leftover, vdev
from .mux import ClassLoad, PortMux
from .traffic import FlowSpec, class_arrival_curve

NODE_KINDS = ("es", "port", "sink")
WITHIN_CLASS = ("blind", "fifo")
E2E_MODES = ("pboo", "per_hop")


@dataclass(frozen=True)
class Node:
    """An end system (``es``), a switch output port (``port``) or a destination (``sink``).

    ``link_rate`` and ``propagation`` describe the outgoing link. ``classes`` overrides
    the network-wide class table for this node. Shapers run at switch ports and are
    ignored at end systems unless ``shaping`` says otherwise.
    """

    id: str
    kind: str
    link_rate: float = 0.0
    switch: str | None = None
    classes: tuple | None = None
    propagation: float = 0.0
    shaping: bool | None = None

    def __post_init__(self):
        if self.shaping is None:
            object.__setattr__(self, "shaping", self.kind == "port")
        if self.kind not in NODE_KINDS:
            raise ConfigError(f"node {self.id}: kind must be one of {NODE_KINDS}, got {self.kind!r}")
        if self.kind != "sink" and not self.link_rate > 0:
            raise ConfigError(f"node {self.id}: link_rate must be > 0")
        if self.propagation < 0:
            raise ConfigError(f"node {self.id}: propagation must be >= 0")


@dataclass
class NetworkModel:
    """Nodes, the default class table, flows and the per-switch technological latency.

    A flow path starts at its source end system, or directly at a switch port when the
    end-system stage is to be left out, and continues through switch ports. A final
    ``sink`` node may close the path.
    """

    nodes: dict
    classes: tuple
    flows: list
    tech_latency: float = 1e-6

    def __post_init__(self):
        if isinstance(self.nodes, (list, tuple)):
            self.nodes = {n.id: n for n in self.nodes}
        self.classes = tuple(self.classes)
        self.flows = list(self.flows)
        if self.tech_latency < 0:
            raise ConfigError("tech_latency must be >= 0")
        self.validate()

    def class_table(self, node_id):
        node = self.nodes[node_id]
        return tuple(node.classes) if node.classes is not None else self.classes

    def hops(self, flow):
        """Analyzed nodes of ``flow`` (the path without a trailing sink)."""
        path = flow.path
        return path[:-1] if self.nodes[path[-1]].kind == "sink" else path

    def validate(self):
        ids = set()
        for f in self.flows:
            if f.id in ids:
                raise ConfigError(f"duplicate flow id {f.id}")
            ids.add(f.id)
            for pos, nid in enumerate(f.path):
                if nid not in self.nodes:
                    raise ConfigError(f"flows[{f.id}].path[{pos}]: unknown node {nid!r}")
            if len(set(f.path)) != len(f.path):
                raise ConfigError(f"flows[{f.id}].path: a node appears twice")
            hops = self.hops(f)
            if not hops:
                raise ConfigError(f"flows[{f.id}].path: no analyzed node before the sink")
            for pos, nid in enumerate(hops):
                kind = self.nodes[nid].kind
                if pos == 0 and kind not in ("es", "port"):
                    raise ConfigError(f"flows[{f.id}].path[0]: must be an end system or a port, got {kind}")
                if pos > 0 and kind != "port":
                    raise ConfigError(f"flows[{f.id}].path[{pos}]: expected a switch port, got {kind}")
                if f.cls not in {c.name for c in self.class_table(nid)}:
                    raise ConfigError(f"flows[{f.id}]: class {f.cls!r} not defined at node {nid}")


@dataclass
class HopDelay:
    node: str
    kind: str
    delay: float
    backlog: float
    store_forward: float = 0.0
    tech_latency: float = 0.0
    propagation: float = 0.0


@dataclass
class FlowDelay:
    flow: str
    cls: str
    hops: list = field(default_factory=list)
    e2e: float | None = None
    per_hop_sum: float | None = None
    deadline: float | None = None
    error: str | None = None

    @property
    def margin(self):
        if self.e2e is None or self.deadline is None:
            return None
        return self.deadline - self.e2e

    @property
    def schedulable(self):
        if self.e2e is None:
            return False
        return self.deadline is None or self.e2e <= self.deadline

    def hop(self, node):
        return next((h for h in self.hops if h.node == node), None)


@dataclass
class PortVerdict:
    node: str
    load: float
    link_rate: float
    error: str | None = None

    @property
    def rate_ok(self):
        return self.load <= self.link_rate * (1 + 1e-12)

    @property
    def ok(self):
        return self.rate_ok and self.error is None


@dataclass
class DelayReport:
    flows: dict
    ports: dict
    class_delays: dict  # (node, class) -> delay of the class aggregate
    ruling: dict  # (node, class) -> name of the branch giving the smaller class delay

    @property
    def schedulable(self):
        return all(p.ok for p in self.ports.values()) and all(f.schedulable for f in self.flows.values())

    @property
    def feasible(self):
        return all(f.error is None for f in self.flows.values())

    def bound(self, flow_id):
        return self.flows[flow_id].e2e

    def to_dict(self):
        flows = []
        for f in self.flows.values():
            row = asdict(f)
            row.update(margin=f.margin, schedulable=f.schedulable)
            flows.append(row)
        ports = [dict(asdict(p), rate_ok=p.rate_ok, ok=p.ok) for p in self.ports.values()]
        return {"schedulable": self.schedulable, "flows": flows, "ports": ports}


def flow_residual(beta_class, same_class_others):
    """Service left to one flow after the other flows of its class: ``(beta - others)^+``."""
    return leftover(beta_class, same_class_others, 0.0)


def propagate(alpha_in, beta_node):
    """Arrival curve at the node output."""
    return deconvolve(alpha_in, beta_node)


def e2e_service(curves):
    """Tandem of per-node service curves.

    >>> e2e_service([ConvexServiceCurve([(1e8, 1e-5)]), ConvexServiceCurve([(5e7, 2e-5)])])
    ConvexServiceCurve([(5e+07, 3e-05)])
    """
    curves = list(curves)
    if not curves:
        raise NullService("empty path")
    out = curves[0]
    for c in curves[1:]:
        out = convolve(out, c)
    return out


def _group_key(f):
    return (f.cls, f.bag, f.mfs, f.jitter, f.path)


def _node_order(model):
    graph = {nid: set() for nid in model.nodes}
    for f in model.flows:
        hops = model.hops(f)
        for a, b in zip(hops, hops[1:]):
            graph[b].add(a)
    try:
        return list(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        raise ConfigError(f"flow paths form a cycle: {exc.args[1]}") from None


class _Group:
    def __init__(self, flows):
        self.flows = flows
        self.spec = flows[0]
        self.count = sum(f.count for f in flows)
        self.source = self.spec.arrival_curve()


def analyze(model, within_class="blind", e2e="pboo"):
    """Compute a :class:`DelayReport` for every flow of ``model``.

    ``e2e="pboo"`` bounds the whole path with the tandem of per-flow residual curves,
    ``"per_hop"`` adds up per-node delays on propagated arrival curves. The fifo mode
    has no per-flow service curve and always adds up per-node delays.
    """
    if within_class not in WITHIN_CLASS:
        raise ConfigError(f"within_class must be one of {WITHIN_CLASS}")
    if e2e not in E2E_MODES:
        raise ConfigError(f"e2e must be one of {E2E_MODES}")

    buckets = defaultdict(list)
    for f in model.flows:
        buckets[_group_key(f)].append(f)
    groups = [_Group(fs) for fs in buckets.values()]
    at_node = defaultdict(list)
    for g in groups:
        for nid in model.hops(g.spec):
            at_node[nid].append(g)

    arrival = {id(g): g.source for g in groups}
    failed = {}  # group id -> reason
    residuals = defaultdict(list)
    hop_rows = defaultdict(list)
    ports, class_delays, ruling = {}, {}, {}

    for nid in _node_order(model):
        node = model.nodes[nid]
        here = at_node.get(nid, [])
        if node.kind == "sink" or not here:
            continue
        load = sum(g.count * g.spec.rate for g in here)
        verdict = PortVerdict(nid, load, node.link_rate)
        ports[nid] = verdict
        errors = _analyze_node(model, node, here, failed, arrival, residuals, hop_rows, class_delays, ruling, within_class)
        for cls, msg in errors.items():
            verdict.error = verdict.error or f"class {cls}: {msg}"
            for g in here:
                if g.spec.cls == cls:
                    failed.setdefault(id(g), msg if msg.startswith("upstream") else f"{nid}: {msg}")

    flows = {}
    for g in groups:
        for f in g.flows:
            flows[f.id] = _flow_report(model, g, f, failed.get(id(g)), residuals[id(g)], hop_rows[id(g)], e2e, within_class)
    flows = {f.id: flows[f.id] for f in model.flows}
    return DelayReport(flows, ports, class_delays, ruling)


def _analyze_node(model, node, groups, failed, arrival, residuals, hop_rows, class_delays, ruling, within_class):
    """Bound every class at ``node``; returns ``{class: reason}`` for the classes that fail.

    A group that failed upstream has no arrival curve. Its class still blocks for one
    frame, but every class it can overtake fails here too.
    """
    by_class = defaultdict(list)
    for g in groups:
        by_class[g.spec.cls].append(g)
    table = {c.name: c for c in model.class_table(node.id)}
    unknown = {g.spec.cls: failed[id(g)] for g in groups if id(g) in failed}
    errors = {}
    for cls in by_class:
        for j, reason in unknown.items():
            if j == cls or table[j].p_high < table[cls].p_low:
                errors[cls] = f"upstream failure: {reason}"
                break
    loads = {}
    for cls, gs in by_class.items():
        total = ConcaveCurve.zero()
        if cls not in unknown:
            total = sum((arrival[id(g)].scale(g.count) for g in gs), total)
        loads[cls] = ClassLoad(total, max(g.spec.mfs for g in gs))
    mux = PortMux(node.link_rate, model.class_table(node.id), loads, shaping=node.shaping)
    for cls, gs in by_class.items():
        if cls in errors:
            continue
        try:
            _analyze_class(node, mux, cls, gs, loads[cls].arrival, arrival, residuals, hop_rows, class_delays, ruling, within_class)
        except BlsncError as exc:
            errors[cls] = f"{type(exc).__name__}: {exc}"
    return errors


def _analyze_class(node, mux, cls, gs, class_alpha, arrival, residuals, hop_rows, class_delays, ruling, within_class):
    """One class at one node; per-flow state is only written once every flow is bounded."""
    res = mux.curve(cls)
    beta = res.curve
    d_class = hdev(class_alpha, beta)
    updates = []
    for g in gs:
        own = arrival[id(g)]
        if within_class == "fifo":
            d, backlog = d_class, vdev(class_alpha, beta)
            res_f, out = None, own.shift(d)
        else:
            others = sum((arrival[id(h)].scale(h.count - (h is g)) for h in gs), ConcaveCurve.zero())
            res_f = flow_residual(beta, others)
            d, backlog = hdev(own, res_f), vdev(own, res_f)
            out = propagate(own, res_f)
        updates.append((g, res_f, out, HopDelay(node.id, node.kind, d, backlog, propagation=node.propagation)))
    class_delays[(node.id, cls)] = d_class
    ruling[(node.id, cls)] = res.ruling_branch(class_alpha)
    for g, res_f, out, row in updates:
        residuals[id(g)].append(res_f)
        arrival[id(g)] = out
        hop_rows[id(g)].append(row)


def _flow_report(model, g, f, error, residuals, hops, e2e, within_class):
    rep = FlowDelay(f.id, f.cls, deadline=f.deadline)
    if error is not None:
        rep.error = error
        return rep
    hops = [HopDelay(**asdict(h)) for h in hops]
    path = model.hops(f)
    for i, h in enumerate(hops):
        if h.kind == "port" and i > 0:
            # the frame is fully received on the incoming link before it is switched
            h.store_forward = f.mfs / model.nodes[path[i - 1]].link_rate
            h.tech_latency = model.tech_latency
    rep.hops = hops
    fixed = sum(h.store_forward + h.tech_latency + h.propagation for h in hops)
    rep.per_hop_sum = fixed + sum(h.delay for h in hops)
    if e2e == "pboo" and within_class == "blind":
        try:
            rep.e2e = hdev(g.source, e2e_service(residuals)) + fixed
        except (UnstableRate, NullService) as exc:
            rep.error = f"{type(exc).__name__}: {exc}"
    else:
        rep.e2e = rep.per_hop_sum
    if rep.e2e is not None and not math.isfinite(rep.e2e):
        rep.error, rep.e2e = "non-finite bound", None
    return rep


def e2e_delay(model, flow_id, **options):
    """End-to-end bound of one flow; raises when the flow cannot be bounded."""
    rep = analyze(model, **options).flows[flow_id]
    if rep.error is not None:
        raise NullService(rep.error)
    return rep.e2e


@dataclass
class Verdicts:
    rate_ok: dict
    deadline_ok: dict
    failures: list

    @property
    def schedulable(self):
        return not self.failures


def check_schedulability(model, **options):
    """Per-port rate verdicts and per-flow deadline verdicts; never raises on infeasibility."""
    report = analyze(model, **options)
    failures = []
    rate_ok = {}
    for nid, p in report.ports.items():
        rate_ok[nid] = p.rate_ok
        if not p.rate_ok:
            failures.append(f"port {nid}: load {p.load:.6g} b/s exceeds link rate {p.link_rate:.6g} b/s")
        elif p.error:
            failures.append(f"port {nid}: {p.error}")
    deadline_ok = {}
    for fid, f in report.flows.items():
        deadline_ok[fid] = f.schedulable
        if f.error is not None:
            failures.append(f"flow {fid}: {f.error}")
        elif not f.schedulable:
            failures.append(f"flow {fid}: bound {f.e2e:.6g} s exceeds deadline {f.deadline:.6g} s")
    return Verdicts(rate_ok, deadline_ok, failures)


def without_shaping(model):
    """The same network with every shaper removed: plain static priority at each class's high level."""
    nodes = {nid: replace(n, classes=tuple(c.unshaped() for c in n.classes) if n.classes is not None else None)
             for nid, n in model.nodes.items()}
    return NetworkModel(nodes, tuple(c.unshaped() for c in model.classes), model.flows, model.tech_latency)


def ingress_mux(model, node_id):
    """Port multiplexer of a node fed only by flows whose path starts there."""
    node = model.nodes[node_id]
    flows = [f for f in model.flows if f.path[0] == node_id]
    loads = {}
    for cls in {f.cls for f in flows}:
        fs = [f for f in flows if f.cls == cls]
        loads[cls] = ClassLoad(class_arrival_curve(fs), max(f.mfs for f in fs))
    return PortMux(node.link_rate, model.class_table(node_id), loads, shaping=node.shaping)


def single_port_model(link_rate, classes, flows, port="port"):
    """A one-port network whose flows enter the port directly."""
    flows = [FlowSpec(f.id, f.cls, f.bag, f.mfs, f.jitter, f.deadline, (port,), f.count) for f in flows]
    return NetworkModel({port: Node(port, "port", link_rate)}, tuple(classes), flows)


__all__ = [
    "Node",
    "NetworkModel",
    "HopDelay",
    "FlowDelay",
    "PortVerdict",
    "DelayReport",
    "Verdicts",
    "flow_residual",
    "propagate",
    "e2e_service",
    "analyze",
    "e2e_delay",
    "check_schedulability",
    "single_port_model",
    "without_shaping",
    "ingress_mux",
]
