"""Achievable worst-case delays on a three-class shaped port.

The port carries a shaped class (``shaped``), one class that overtakes it only while
it is demoted (``mc``) and a lowest class (``lc``) that can only block for one frame.
Each construction chains full-size send and idle windows of the shaper, counted in
whole frames, and solves ``delay = lc frame + blocking(delay) + own burst serialization``
by fixed-point iteration.

These are realizable scenarios, so they bound the true worst case from below and
serve as a reference for how tight an analytical bound is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bls import BlsParams
from .errors import ConfigError, DivergentFixedPoint
from .units import guarded_ceil

SIDES = ("shaped", "unshaped")
CASES = ("awc1", "awc2")
TOLERANCE = 1e-9  # 1 ns
MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class AwcConfig:
    """Port and traffic of one achievable worst-case construction.

    Sizes in bits, times in seconds. ``n_*`` count the frames of each class released
    together at the port; ``links_*`` count the input links they arrive on.
    With ``clamp_to_traffic`` a window is only charged for the interfering traffic
    that can actually fill it.
    """

    link_rate: float
    bls: BlsParams
    mfs_shaped: float
    mfs_mc: float
    mfs_lc: float
    n_shaped: int
    n_mc: int
    bag_shaped: float
    bag_mc: float
    links_shaped: int = 1
    links_mc: int = 1
    clamp_to_traffic: bool = True

    def __post_init__(self):
        if self.link_rate <= 0:
            raise ConfigError("link_rate must be > 0")
        for name in ("mfs_shaped", "mfs_mc", "bag_shaped", "bag_mc"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.mfs_lc < 0:
            raise ConfigError("mfs_lc must be >= 0")
        if self.n_shaped < 0 or self.n_mc < 0:
            raise ConfigError("frame counts must be >= 0")
        if self.links_shaped < 1 or self.links_mc < 1:
            raise ConfigError("link counts must be >= 1")

    @property
    def i_idle(self):
        return self.bls.bw * self.link_rate

    @property
    def i_send(self):
        return self.link_rate - self.i_idle

    @property
    def l_r_min(self):
        return max(0.0, self.bls.l_r - self.i_idle * self.mfs_mc / self.link_rate)


@dataclass(frozen=True)
class AwcWindows:
    """Window lengths in seconds, each a whole number of frame times."""

    send_real: float
    idle_real: float
    send0_real: float
    tit0_idle: float
    t0t1_send: float
    tit0_send: float
    t0t1_idle: float


@dataclass
class AwcResult:
    delay: float
    iterations: int
    blocking: float
    cycles_used: float
    cycles_needed: float
    cycles_available: float
    history: list = field(default_factory=list)

    @property
    def non_decreasing(self):
        return all(b >= a - 1e-15 for a, b in zip(self.history, self.history[1:]))


def _frames(duration, frame_time):
    """``duration`` rounded up to whole frames."""
    return guarded_ceil(duration / frame_time) * frame_time


def windows(config, side="shaped"):
    """Realistic send/idle windows of the construction for ``side``.

    The shaped side starts its send windows at the lowest credit reachable after a
    medium frame; the unshaped side starts them at the resume level and adds the
    first send window from zero credit.

    >>> cfg = AwcConfig(1e9, BlsParams(22118, 0, 0.46), 512, 2560, 8192, 4, 2, 2e-3, 2e-3, 2, 2)
    >>> w = windows(cfg)
    >>> round(w.send_real * 1e9), round(w.idle_real * 1e9)
    (40960, 48640)
    """
    if side not in SIDES:
        raise ConfigError(f"side must be one of {SIDES}")
    C, p = config.link_rate, config.bls
    own_t, mc_t = config.mfs_shaped / C, config.mfs_mc / C
    send_from = config.l_r_min if side == "shaped" else p.l_r
    half = p.l_m / 2
    return AwcWindows(
        send_real=_frames((p.l_m - send_from) / config.i_send, own_t),
        idle_real=_frames((p.l_m - p.l_r) / config.i_idle, mc_t),
        send0_real=_frames(p.l_m / config.i_send, own_t),
        tit0_idle=_frames(max(half - p.l_r, 0.0) / config.i_idle, mc_t),
        t0t1_send=_frames(max(half - config.l_r_min, 0.0) / config.i_send, own_t),
        tit0_send=_frames(half / config.i_send, own_t),
        t0t1_idle=_frames(max(half - p.l_r, 0.0) / config.i_idle, mc_t),
    )


def _blocking(config, w, side, case, delay):
    """``(blocking, used, needed, available)`` for an analyzed-class delay of ``delay``."""
    C = config.link_rate
    if side == "shaped":
        own_burst = config.n_shaped * config.mfs_shaped
        other = config.n_mc * config.mfs_mc * (1 + delay / config.bag_mc)
        own_win, other_win = w.send_real, w.idle_real
        lead, lead_other = (0.0, 0.0) if case == "awc1" else (w.tit0_idle, w.t0t1_send)
    else:
        own_burst = config.n_mc * config.mfs_mc
        other = config.n_shaped * config.mfs_shaped * (1 + delay / config.bag_shaped)
        own_win, other_win = w.idle_real, w.send_real
        lead, lead_other = (w.send0_real, 0.0) if case == "awc1" else (w.tit0_send, w.t0t1_idle)

    if side == "shaped":
        available = guarded_ceil((own_burst - lead_other * C) / (C * own_win))
    elif case == "awc1":
        available = guarded_ceil(own_burst / (C * own_win)) - 1
    else:
        available = guarded_ceil((own_burst - lead_other * C) / (C * own_win))
    available = max(available, 0)
    needed = max((other - lead * C) / (C * other_win), 0.0)
    used = min(available, needed)
    blocking = lead + used * other_win
    if config.clamp_to_traffic:
        blocking = min(blocking, other / C)
    return blocking, used, needed, available


def awc_delay(config, side="shaped", case="awc1", tolerance=TOLERANCE, max_iterations=MAX_ITERATIONS,
              rel_tolerance=None):
    """Fixed point of one construction, iterated from the analyzed burst's transmission time.

    Iteration stops once a step moves the delay by less than ``tolerance`` seconds, or
    by less than ``rel_tolerance`` times the delay when that is given.

    >>> cfg = AwcConfig(1e9, BlsParams(22118, 0, 0.46), 512, 2560, 8192, 4, 2, 2e-3, 2e-3, 2, 2,
    ...                 clamp_to_traffic=False)
    >>> r = awc_delay(cfg)
    >>> round(r.delay, 10), r.cycles_available, round(r.cycles_needed, 3)
    (1.43728e-05, 1, 0.106)
    """
    if case not in CASES:
        raise ConfigError(f"case must be one of {CASES}")
    w = windows(config, side)
    C = config.link_rate
    if side == "shaped":
        burst, links = config.n_shaped * config.mfs_shaped, config.links_shaped
    else:
        burst, links = config.n_mc * config.mfs_mc, config.links_mc
    fixed = config.mfs_lc / C + burst / C - burst / (links * C)
    d = burst / C
    history = [d]
    for it in range(1, max_iterations + 1):
        blocking, used, needed, available = _blocking(config, w, side, case, d)
        nxt = fixed + blocking
        history.append(nxt)
        limit = tolerance if rel_tolerance is None else rel_tolerance * abs(nxt)
        if abs(nxt - d) < limit:
            return AwcResult(nxt, it, blocking, used, needed, available, history)
        d = nxt
    raise DivergentFixedPoint(max_iterations, history[-5:])


def awc_max(config, side="shaped", **options):
    """Largest delay over the two constructions."""
    return max(awc_delay(config, side, case, **options).delay for case in CASES)
