"""Strict service curves of a non-preemptive static-priority port with optional shaped classes.

Each class at a port gets one service curve. For a shaped class it is the better of

* ``sp``: the class treated at its low priority, after every class that can run
  ahead of it in that state and one blocking frame;
* ``bls``: the shaper's own guarantee in tandem with the high-priority left-over.

For an unshaped class below a shaped one, the ``sp`` branch charges the shaped
class its own output curve and the ``bls`` branch charges it the shaper's maximum
service curve; the better of the two is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from . import bls as _bls
from .errors import NullService, PriorityClash, UnstableRate
from .minplus import ConcaveCurve, ConvexServiceCurve, convolve, deconvolve, hdev, leftover


@dataclass(frozen=True)
class ClassPartition:
    """Classes ranked above (``hc``), between (``mc``) and below (``lc``) the levels of a reference class."""

    hc: frozenset
    mc: frozenset
    lc: frozenset


@dataclass(frozen=True)
class ClassLoad:
    """Aggregate traffic of one class entering a port."""

    arrival: ConcaveCurve
    max_mfs: float = 0.0

    @classmethod
    def empty(cls):
        return cls(ConcaveCurve.zero(), 0.0)


@dataclass
class MuxResult:
    """Service curve of one class at a port and the branches it was assembled from.

    ``branches`` maps ``"sp"`` / ``"bls"`` to a curve, or to ``None`` when that branch
    guarantees nothing. ``interfering`` holds the arrival curves charged to the class.
    """

    curve: ConvexServiceCurve
    branches: dict
    interfering: dict = field(default_factory=dict)

    def branch_delays(self, alpha):
        out = {}
        for name, curve in self.branches.items():
            try:
                out[name] = hdev(alpha, curve) if curve is not None else None
            except UnstableRate:
                out[name] = None
        return out

    def ruling_branch(self, alpha):
        """Name of the branch that yields the smaller delay for ``alpha``."""
        delays = {k: v for k, v in self.branch_delays(alpha).items() if v is not None}
        return min(delays, key=delays.get) if delays else None


def check_priorities(classes):
    seen = {}
    for c in classes:
        for level in c.levels():
            if level in seen:
                raise PriorityClash(f"priority {level} used by both {seen[level]} and {c.name}")
            seen[level] = c.name


def partition(classes, k):
    """Split the other classes relative to reference class ``k`` (a name).

    A shaped class j is ranked through its high priority for ``hc``/``mc`` and through
    its low priority for ``lc``, so it can sit in ``mc`` and ``lc`` at once.
    An unshaped reference class uses its single priority for both bounds.
    """
    check_priorities(classes)
    by_name = {c.name: c for c in classes}
    ref = by_name[k]
    hi, lo = ref.p_high, ref.p_low
    hc, mc, lc = set(), set(), set()
    for c in classes:
        if c.name == k:
            continue
        if c.p_high < hi:
            hc.add(c.name)
        if hi < c.p_high < lo:
            mc.add(c.name)
        if c.p_low > lo:
            lc.add(c.name)
    return ClassPartition(frozenset(hc), frozenset(mc), frozenset(lc))


def es_curve(link_rate, interfering, blocking_mfs):
    """End-system service of a class: ``[C t - sum(higher arrivals) - max blocking frame]^+``.

    >>> es_curve(1e9, [ConcaveCurve([(2.56e5, 512)])], 8192)
    ConvexServiceCurve([(9.99744e+08, 8.70623e-06)])
    """
    total = sum(interfering, ConcaveCurve.zero())
    return leftover(ConvexServiceCurve.rate_latency(link_rate), total, blocking_mfs)


def _sum(curves):
    return sum(curves, ConcaveCurve.zero())


def _try_leftover(beta, alpha, blocking):
    try:
        return leftover(beta, alpha, blocking)
    except NullService:
        return None


class PortMux:
    """All class service curves of one output port.

    ``classes`` is the class table of the port (``TrafficClassSpec``); ``loads`` maps
    class names to :class:`ClassLoad`. Classes missing from ``loads`` carry no traffic.
    With ``shaping=False`` every shaper is ignored and the port is plain static
    priority at each class's high level (the end-system and baseline model).
    """

    def __init__(self, link_rate, classes, loads, shaping=True):
        self.link_rate = float(link_rate)
        self.classes = [c if shaping else c.unshaped() for c in classes]
        check_priorities(self.classes)
        self.by_name = {c.name: c for c in self.classes}
        self.loads = {c.name: loads.get(c.name, ClassLoad.empty()) for c in self.classes}
        self._bls_cache = {}
        self._result_cache = {}

    @cached_property
    def line(self):
        return ConvexServiceCurve.rate_latency(self.link_rate)

    def partition(self, k):
        return partition(self.classes, k)

    def _mfs(self, names):
        return max((self.loads[n].max_mfs for n in names), default=0.0)

    def derived(self, k):
        part = self.partition(k)
        return _bls.derive(self.by_name[k].bls, self.link_rate, self._mfs(part.mc), self.loads[k].max_mfs)

    def bls_curves(self, k):
        """``(beta_bls, gamma)`` of shaped class ``k``; ``beta_bls`` is ``None`` when it guarantees nothing."""
        if k not in self._bls_cache:
            part = self.partition(k)
            d = self.derived(k)
            hc_rate = sum(self.sp_arrival(j).rate for j in part.hc)
            try:
                beta = _bls.min_service(d, hc_rate)
            except NullService:
                beta = None
            self._bls_cache[k] = (beta, _bls.max_service(d, mc_backlogged=True))
        return self._bls_cache[k]

    def sp_arrival(self, j):
        """Arrival curve of class ``j`` as seen by the static-priority stage."""
        alpha = self.loads[j].arrival
        if not self.by_name[j].shaped or alpha.is_zero():
            return alpha
        beta, gamma = self.bls_curves(j)
        if beta is None:
            return gamma
        try:
            return _bls.shaped_output(alpha, beta, gamma)
        except UnstableRate:
            return gamma

    def curve(self, k):
        if k not in self._result_cache:
            if self.by_name[k].shaped:
                self._result_cache[k] = self._shaped(k)
            else:
                self._result_cache[k] = self._unshaped(k)
        return self._result_cache[k]

    def curves(self):
        return {c.name: self.curve(c.name) for c in self.classes}

    def _shaped(self, k):
        part = self.partition(k)
        ahead_low = part.mc | part.hc
        interf = {j: self.sp_arrival(j) for j in ahead_low}
        sp_low = _try_leftover(self.line, _sum(interf[j] for j in ahead_low), self._mfs(part.lc | {k}))
        not_hc = [c.name for c in self.classes if c.name not in part.hc]
        sp_high = _try_leftover(self.line, _sum(interf[j] for j in part.hc), self._mfs(not_hc))
        beta_bls, _ = self.bls_curves(k)
        shaped = convolve(beta_bls, sp_high) if beta_bls is not None and sp_high is not None else None
        return self._combine({"sp": sp_low, "bls": shaped}, interf, k)

    def _unshaped(self, k):
        p = self.by_name[k].priority
        higher = [c for c in self.classes if c.name != k and c.p_high < p]
        blocking = self._mfs([c.name for c in self.classes if c.p_low > p] + [k])
        plain = _sum(self.loads[c.name].arrival for c in higher if not c.shaped)
        # an idle shaped class interferes with nothing
        shaped = [c.name for c in higher if c.shaped and not self.loads[c.name].arrival.is_zero()]
        interf = {c.name: self.loads[c.name].arrival for c in higher if not c.shaped}
        if not shaped:
            return self._combine({"sp": _try_leftover(self.line, plain, blocking)}, interf, k)
        try:
            via_output = plain + _sum(self._deconvolved(j) for j in shaped)
            sp = _try_leftover(self.line, via_output, blocking)
        except (UnstableRate, NullService):
            sp = None
        via_gamma = plain + _sum(self.bls_curves(j)[1] for j in shaped)
        bls_branch = _try_leftover(self.line, via_gamma, blocking)
        for j in shaped:
            interf[j] = self.sp_arrival(j)
        return self._combine({"sp": sp, "bls": bls_branch}, interf, k)

    def _deconvolved(self, j):
        alpha = self.loads[j].arrival
        if alpha.is_zero():
            return alpha
        beta, _ = self.bls_curves(j)
        if beta is None:
            raise NullService(f"shaped class {j} has no guaranteed service")
        return deconvolve(alpha, beta)

    def _combine(self, branches, interf, k):
        live = [c for c in branches.values() if c is not None]
        if not live:
            raise NullService(f"class {k} receives no guaranteed service at this port")
        curve = live[0]
        for c in live[1:]:
            curve = curve.maximum(c)
        return MuxResult(curve, branches, interf)
