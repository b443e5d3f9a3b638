"""Flow and traffic-class descriptions and their leaky-bucket ingress curves."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .minplus import ConcaveCurve
from .units import guarded_ceil


@dataclass(frozen=True)
class FlowSpec:
    """A sporadic flow: at most one frame of ``mfs`` bits every ``bag`` seconds, released with ``jitter``.

    ``path`` lists node ids in order: the source end system, then the switch output
    ports crossed. A trailing destination end system may be included; it is not analyzed.
    ``count`` > 1 stands for that many identical flows sharing one description.
    """

    id: str
    cls: str
    bag: float
    mfs: float
    jitter: float = 0.0
    deadline: float | None = None
    path: tuple = field(default_factory=tuple)
    count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))
        if int(self.count) != self.count or self.count < 1:
            raise ConfigError(f"flow {self.id}: count must be a positive integer")
        if self.bag <= 0:
            raise ConfigError(f"flow {self.id}: bag must be > 0")
        if self.mfs <= 0:
            raise ConfigError(f"flow {self.id}: mfs must be > 0")
        if self.jitter < 0:
            raise ConfigError(f"flow {self.id}: jitter must be >= 0")
        if self.deadline is not None and self.deadline <= 0:
            raise ConfigError(f"flow {self.id}: deadline must be > 0")
        if not self.path:
            raise ConfigError(f"flow {self.id}: path needs at least one hop")

    @property
    def rate(self):
        return self.mfs / self.bag

    def arrival_curve(self):
        """``(MFS/BAG) t + MFS + MFS * J / BAG``."""
        return ConcaveCurve([(self.rate, self.mfs + self.mfs * self.jitter / self.bag)])


@dataclass(frozen=True)
class TrafficClassSpec:
    """A traffic class: its (high) priority, 0 being the highest, and an optional shaper."""

    name: str
    priority: int
    bls: object = None  # BlsParams, kept untyped to avoid an import cycle

    def __post_init__(self):
        if self.bls is not None and self.bls.p_low <= self.priority:
            raise ConfigError(f"class {self.name}: shaped low priority {self.bls.p_low} must be below {self.priority}")

    @property
    def shaped(self):
        return self.bls is not None

    @property
    def p_high(self):
        return self.priority

    @property
    def p_low(self):
        return self.bls.p_low if self.bls is not None else self.priority

    def levels(self):
        return (self.priority, self.bls.p_low) if self.bls is not None else (self.priority,)

    def unshaped(self):
        """Same class without a shaper (plain static priority at the high level)."""
        return TrafficClassSpec(self.name, self.priority)


def class_arrival_curve(flows):
    """Aggregate leaky bucket of a set of flows, zero when empty.

    >>> class_arrival_curve([FlowSpec("be", "BE", 8e-3, 8192, jitter=5e-4, path=("es",))])
    ConcaveCurve([(1.024e+06, 8704)])
    """
    r = sum(f.count * f.rate for f in flows)
    b = sum(f.count * (f.mfs + f.mfs * f.jitter / f.bag) for f in flows)
    return ConcaveCurve([(r, b)])


def flows_for_utilization(target_ur, link_rate, mfs, bag):
    """Smallest flow count whose total rate reaches ``target_ur * link_rate``.

    >>> flows_for_utilization(0.03, 1e9, 2560, 2e-3)
    24
    >>> flows_for_utilization(0.20, 1e9, 512, 2e-3)
    782
    """
    if not 0 < target_ur < 1:
        raise ValueError(f"utilization must be in (0, 1), got {target_ur}")
    return max(1, guarded_ceil(target_ur * link_rate * bag / mfs))
