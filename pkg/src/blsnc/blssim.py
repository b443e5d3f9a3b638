"""Frame-level event simulation of one output port with burst limiting shapers.

The port is non-preemptive static priority. A shaped class carries a credit counter:
it rises at ``i_send`` while one of the class's frames is on the wire and falls at
``i_idle`` otherwise, saturating at ``l_m`` (until the current frame ends) and at 0.
The class is demoted to its low priority when the credit reaches ``l_m`` and promoted
back when it falls to ``l_r``. Priorities are read only when a transmission starts.

Time is kept in integer nanoseconds; credit is a float updated once per interval.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ViolationReport
from .mux import check_priorities, partition

NS = 1e-9
SLACK_BITS = 1.0


@dataclass(frozen=True)
class Frame:
    """One frame entering the port at ``time_ns``."""

    time_ns: int
    cls: str
    bits: int
    flow: str | None = None


@dataclass(frozen=True)
class SimPort:
    """Link rate (bits/s) and class table (``TrafficClassSpec``) of the simulated port."""

    link_rate: float
    classes: tuple

    def __post_init__(self):
        if not self.link_rate > 0:
            raise ConfigError("link_rate must be > 0")
        object.__setattr__(self, "classes", tuple(self.classes))
        check_priorities(self.classes)

    def by_name(self, name):
        for c in self.classes:
            if c.name == name:
                return c
        raise ConfigError(f"unknown class {name!r}")

    def tx_ns(self, bits):
        """Transmission time of ``bits``, rounded up to whole nanoseconds."""
        return max(1, math.ceil(bits / self.link_rate / NS - 1e-9))


@dataclass
class FrameRecord:
    cls: str
    bits: int
    flow: str | None
    arrival_ns: int
    start_ns: int
    end_ns: int

    @property
    def delay_s(self):
        return (self.end_ns - self.arrival_ns) * NS


@dataclass
class Trace:
    """Outcome of one run: transmitted frames in order, credit samples and the event log.

    ``credit[k]`` lists ``(time_ns, credit_bits)`` samples of shaped class ``k``, taken
    at every interval boundary and at every threshold crossing (which may fall
    between whole nanoseconds).
    """

    port: SimPort
    frames: list = field(default_factory=list)
    credit: dict = field(default_factory=dict)
    events: list = field(default_factory=list)

    def of(self, cls):
        return [f for f in self.frames if f.cls == cls]

    def arrivals(self, cls):
        """Arrival instants (ns) and cumulative bits right after each arrival."""
        fs = sorted(self.of(cls), key=lambda f: f.arrival_ns)
        t = np.array([f.arrival_ns for f in fs], dtype=float)
        return t, np.cumsum([f.bits for f in fs], dtype=float)

    def output(self, cls):
        """Breakpoints ``(t_ns, bits)`` of the cumulative output, linear during each transmission."""
        ts, vs, total = [0.0], [0.0], 0.0
        for f in self.of(cls):
            ts += [f.start_ns, f.end_ns]
            vs += [total, total + f.bits]
            total += f.bits
        return np.array(ts, dtype=float), np.array(vs, dtype=float)

    def backlogged_periods(self, classes):
        """Maximal intervals (ns) during which some frame of ``classes`` has arrived but not fully left."""
        spans = sorted((f.arrival_ns, f.end_ns) for f in self.frames if f.cls in classes)
        periods = []
        for a, e in spans:
            if periods and a <= periods[-1][1]:
                periods[-1][1] = max(periods[-1][1], e)
            else:
                periods.append([a, e])
        return [tuple(p) for p in periods]

    def to_csv(self, out=None):
        """Event log as CSV (time_ns, class, event, bits, credit); returns the text when ``out`` is None."""
        buf = out if out is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_ns", "class", "event", "bits", "credit"])
        for t, cls, event, bits, credit in self.events:
            w.writerow([_fmt_time(t), cls, event, bits, "" if credit is None else repr(round(credit, 6))])
        return buf.getvalue() if out is None else None


def _fmt_time(t):
    return str(int(t)) if float(t).is_integer() else repr(round(float(t), 3))


class _Credit:
    def __init__(self, name, params, link_rate):
        self.name = name
        self.p = params
        self.i_idle = params.bw * link_rate
        self.i_send = link_rate - self.i_idle
        self.value = 0.0
        self.high = True

    def advance(self, t0, t1, sending, log):
        """Move the counter over ``[t0, t1]`` (ns) and log any priority change."""
        if t1 <= t0:
            return
        dt = (t1 - t0) * NS
        if sending:
            nxt = self.value + self.i_send * dt
            if nxt >= self.p.l_m:
                if self.high:
                    tx = t0 + (self.p.l_m - self.value) / self.i_send / NS
                    self.high = False
                    log(tx, self.name, "demote", 0, self.p.l_m)
                nxt = self.p.l_m
        else:
            nxt = self.value - self.i_idle * dt
            if not self.high and nxt <= self.p.l_r:
                tx = t0 + (self.value - self.p.l_r) / self.i_idle / NS
                self.high = True
                log(tx, self.name, "promote", 0, self.p.l_r)
            nxt = max(nxt, 0.0)
        self.value = nxt

    @property
    def priority(self):
        return None if self.high else self.p.p_low


def simulate(port, arrivals, horizon_ns=None):
    """Run ``port`` on ``arrivals`` (iterable of :class:`Frame`) until every queue drains.

    Frames arriving after ``horizon_ns`` are dropped. Frames with equal arrival times
    are queued in input order.

    >>> from blsnc.bls import BlsParams
    >>> from blsnc.traffic import TrafficClassSpec
    >>> port = SimPort(1e9, [TrafficClassSpec("SCT", 0, BlsParams(22118, 0, 0.46, 2))])
    >>> tr = simulate(port, [Frame(0, "SCT", 512)])
    >>> tr.frames[0].end_ns, round(tr.credit["SCT"][-1][1], 2)
    (512, 276.48)
    """
    names = {c.name for c in port.classes}
    frames = sorted(
        (f for f in arrivals if horizon_ns is None or f.time_ns <= horizon_ns),
        key=lambda f: f.time_ns,
    )
    for f in frames:
        if f.cls not in names:
            raise ConfigError(f"frame of unknown class {f.cls!r}")
        if f.bits <= 0 or f.time_ns < 0:
            raise ConfigError("frames need positive size and non-negative arrival time")

    trace = Trace(port)
    credits = {c.name: _Credit(c.name, c.bls, port.link_rate) for c in port.classes if c.shaped}
    trace.credit = {k: [(0, 0.0)] for k in credits}

    def log(t, cls, event, bits, credit=None):
        trace.events.append((t, cls, event, bits, credit))
        if event in ("demote", "promote"):
            trace.credit[cls].append((t, credit))

    def advance(t0, t1, sending):
        for k, c in credits.items():
            c.advance(t0, t1, sending == k, log)
            trace.credit[k].append((t1, c.value))

    queues = {c.name: deque() for c in port.classes}
    level = {c.name: c.p_high for c in port.classes}
    i, n, t = 0, len(frames), 0
    while i < n or any(queues.values()):
        if not any(queues.values()) and frames[i].time_ns > t:
            advance(t, frames[i].time_ns, None)
            t = frames[i].time_ns
        while i < n and frames[i].time_ns <= t:
            f = frames[i]
            queues[f.cls].append(f)
            log(f.time_ns, f.cls, "arrival", f.bits)
            i += 1
        for k, c in credits.items():
            level[k] = c.priority if c.priority is not None else port.by_name(k).p_high
        cls = min((k for k, q in queues.items() if q), key=level.__getitem__)
        f = queues[cls].popleft()
        end = t + port.tx_ns(f.bits)
        log(t, cls, "start", f.bits, credits[cls].value if cls in credits else None)
        advance(t, end, cls)
        log(end, cls, "end", f.bits, credits[cls].value if cls in credits else None)
        trace.frames.append(FrameRecord(cls, f.bits, f.flow, f.time_ns, t, end))
        t = end
    trace.events.sort(key=lambda e: e[0])
    return trace


@dataclass
class Verdict:
    """Checks run by :func:`validate_against_bounds` and what they found."""

    cls: str
    periods: int
    frames: int
    max_delay_s: float
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def _worst_pair(excess, s_pts, t_pts, kind):
    si, ti = np.unravel_index(np.argmax(excess), excess.shape)
    return {"kind": kind, "time_ns": float(t_pts[ti]), "start_ns": float(s_pts[si]),
            "excess_bits": float(excess[si, ti])}


def _interval_check(trace, cls, periods, excess_of, kind, knots=()):
    """Largest excess over all sub-intervals ``[s, t]`` of each period, at output breakpoints."""
    ts, vs = trace.output(cls)
    out = []
    for a, e in periods:
        inner = ts[(ts > a) & (ts < e)]
        s_pts = np.unique(np.concatenate(([a], inner)))
        t_pts = np.unique(np.concatenate((inner, [e])))
        if len(knots):
            extra = (s_pts[:, None] + np.asarray(knots)[None, :]).ravel()
            t_pts = np.unique(np.concatenate((t_pts, extra[(extra > a) & (extra <= e)])))
        rt = np.interp(t_pts, ts, vs)
        worst = None
        for lo in range(0, len(s_pts), 256):
            s_chunk = s_pts[lo:lo + 256]
            rs = np.interp(s_chunk, ts, vs)
            gap = t_pts[None, :] - s_chunk[:, None]
            excess = excess_of(np.where(gap > 0, gap, 0.0) * NS, rt[None, :] - rs[:, None])
            excess = np.where(gap > 0, excess, -np.inf)
            if excess.max() > SLACK_BITS and (worst is None or excess.max() > worst["excess_bits"]):
                worst = _worst_pair(excess, s_chunk, t_pts, kind)
        if worst is not None:
            out.append(worst)
    return out


def _min_service_violations(trace, cls, beta, periods):
    # also probe where beta changes slope
    knots = [x / NS for x, _ in beta.breakpoints()[1:] if x > 0]
    return _interval_check(trace, cls, periods, lambda dt, served: beta(dt) - served, "min_service", knots)


def _max_service_violations(trace, cls, gamma, periods):
    def excess(dt, served):
        allow = np.full(dt.shape, np.inf)
        for rate, burst in gamma.pieces:
            allow = np.minimum(allow, burst + rate * dt)
        return served - allow

    return _interval_check(trace, cls, periods, excess, "max_service")


def validate_against_bounds(trace, cls, beta=None, gamma=None, nc_delay=None, raise_on_violation=True):
    """Check one class of a trace against its service curves and delay bound.

    * ``beta``: over every backlogged period of ``cls``, output in any sub-interval is
      at least ``beta`` of its length;
    * ``gamma``: over every period in which a class that overtakes ``cls`` only while it
      is demoted is backlogged, output in any sub-interval is at most ``gamma`` of its
      length (without such competition the class may use the whole link);
    * ``nc_delay`` (seconds): no frame of ``cls`` stays longer.

    A one-bit slack absorbs float rounding. Raises :class:`ViolationReport` on any
    violation unless ``raise_on_violation`` is false.
    """
    frames = trace.of(cls)
    own_periods = trace.backlogged_periods({cls})
    violations = []
    if beta is not None:
        violations += _min_service_violations(trace, cls, beta, own_periods)
    if gamma is not None:
        spec = trace.port.by_name(cls)
        mc = partition(trace.port.classes, cls).mc if spec.shaped else frozenset()
        violations += _max_service_violations(trace, cls, gamma, trace.backlogged_periods(mc))
    worst = max((f.delay_s for f in frames), default=0.0)
    if nc_delay is not None:
        for f in frames:
            if f.delay_s > nc_delay + NS:
                violations.append({"kind": "delay", "time_ns": f.end_ns, "flow": f.flow,
                                   "excess_s": f.delay_s - nc_delay})
                break
    verdict = Verdict(cls, len(own_periods), len(frames), worst, violations)
    if violations and raise_on_violation:
        raise ViolationReport(violations)
    return verdict


def random_arrivals(flows, n_frames, seed=0, burst_prob=0.5):
    """Sporadic frames respecting each flow's period, jitter and maximum frame size.

    ``flows`` holds ``FlowSpec`` objects (``count`` copies each). The earliest
    ``n_frames`` releases are kept. With probability ``burst_prob`` a flow starts at
    phase 0 so that many flows release together.
    """
    rng = np.random.default_rng(seed)
    expanded = [(f, k) for f in flows for k in range(f.count)]
    if not expanded:
        return []
    per_second = sum(1.0 / f.bag for f, _ in expanded)
    horizon = 1.5 * n_frames / per_second + max(f.bag + f.jitter for f, _ in expanded)
    out = []
    for f, k in expanded:
        bag = round(f.bag / NS)
        jit = round(f.jitter / NS)
        nominal = 0 if rng.random() < burst_prob else int(rng.integers(0, bag))
        fid = f.id if f.count == 1 else f"{f.id}#{k}"
        while nominal * NS <= horizon:
            release = nominal + (int(rng.integers(0, jit + 1)) if jit else 0)
            size = int(f.mfs) if rng.random() < 0.7 else int(rng.integers(64 * 8, int(f.mfs) + 1))
            out.append(Frame(release, f.cls, size, fid))
            nominal += bag + (int(rng.exponential(bag / 4)) if rng.random() < 0.3 else 0)
    out.sort(key=lambda fr: fr.time_ns)
    return out[:n_frames]


def worst_min_service_arrivals(port, shaped, sizes, duration_ns):
    """Saturating pattern for the shaped class: every competitor backlogged from time 0.

    ``sizes`` maps class names to frame sizes in bits. The lowest class sends one frame
    first; then the shaped class and the classes that overtake it while it is demoted
    stay backlogged for ``duration_ns``, so each demotion opens a full idle window.
    """
    part = partition(port.classes, shaped)
    frames = []
    blockers = sorted(part.lc - part.mc)
    if blockers:
        frames.append(Frame(0, blockers[0], sizes[blockers[0]], "blocker"))
    for name in [shaped, *sorted(part.mc)]:
        n = int(duration_ns * port.link_rate * NS / sizes[name]) + 1
        frames += [Frame(1, name, sizes[name], f"{name}#{i}") for i in range(n)]
    return frames


@dataclass
class ScenarioPair:
    """Two arrival patterns for the shaped class ``shaped`` against one medium class."""

    backlogged: list
    gapped: list
    t0_ns: int
    t1_ns: int


def demotion_gap_pair(port, shaped, medium, own_bits=512, medium_bits=2560, n_own=2000):
    """Medium class backlogged throughout versus silent while the credit climbs back.

    Both start with the shaped class saturating its credit. In the first pattern the
    medium class stays backlogged; in the second it sends just enough to bring the
    credit down to half of ``l_m``, stays silent while the shaped class (demoted but
    alone) pushes the credit back to ``l_m``, and then returns.
    """
    p = port.by_name(shaped).bls
    C = port.link_rate
    i_idle, i_send = p.bw * C, (1 - p.bw) * C
    own_ns, med_ns = port.tx_ns(own_bits), port.tx_ns(medium_bits)
    to_sat = math.ceil(p.l_m / (i_send * own_ns * NS))
    t_i = to_sat * own_ns
    k = max(1, round(p.l_m / 2 / (i_idle * med_ns * NS)))
    t0 = t_i + k * med_ns
    c0 = max(p.l_m - i_idle * k * med_ns * NS, 0.0)
    climb = math.ceil((p.l_m - c0) / (i_send * own_ns * NS))
    t1 = t0 + climb * own_ns
    own = [Frame(0, shaped, own_bits, f"{shaped}#{i}") for i in range(n_own)]
    n_med = n_own * own_bits // medium_bits + 1
    full = [Frame(0, medium, medium_bits, f"{medium}#{i}") for i in range(n_med)]
    first = [Frame(0, medium, medium_bits, f"{medium}#{i}") for i in range(k)]
    later = [Frame(t1, medium, medium_bits, f"{medium}#{k + i}") for i in range(n_med)]
    return ScenarioPair(own + full, own + first + later, t0, t1)


def output_deficit(trace_a, trace_b, cls):
    """Largest amount by which ``trace_b``'s cumulative output of ``cls`` trails ``trace_a``'s.

    Returns ``(bits, time_ns)``; ``bits <= 0`` means ``b`` never trails ``a``.
    """
    ta, va = trace_a.output(cls)
    tb, vb = trace_b.output(cls)
    grid = np.unique(np.concatenate((ta, tb)))
    diff = np.interp(grid, ta, va) - np.interp(grid, tb, vb)
    i = int(np.argmax(diff))
    return float(diff[i]), float(grid[i])


__all__ = [
    "Frame",
    "SimPort",
    "FrameRecord",
    "Trace",
    "Verdict",
    "simulate",
    "validate_against_bounds",
    "random_arrivals",
    "worst_min_service_arrivals",
    "ScenarioPair",
    "demotion_gap_pair",
    "output_deficit",
]
