"""Service curves of a burst limiting shaper (BLS) node.

A shaped class owns a credit counter in ``[0, l_m]``. While one of its frames is on
the wire the credit rises at ``i_send = C - i_idle``; otherwise it falls at
``i_idle = bw * C``. The class runs at its high priority until the credit reaches
``l_m``, then at its low priority until the credit falls back to ``l_r``.

The curves here bound the shaped class alone: a rate-latency minimum service curve
that accounts for medium-priority frames squeezing in while the class is demoted,
and a leaky-bucket maximum service curve built from full send/idle cycles.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidBls, NullService
from .minplus import ConcaveCurve, ConvexServiceCurve, deconvolve


@dataclass(frozen=True)
class BlsParams:
    """Shaper thresholds (bits), reserved bandwidth fraction and the demoted priority."""

    l_m: float
    l_r: float
    bw: float
    p_low: int = 0

    def __post_init__(self):
        if not 0.0 < self.bw < 1.0:
            raise InvalidBls(f"bw must lie in (0, 1), got {self.bw}")
        if self.l_m <= 0:
            raise InvalidBls(f"l_m must be > 0, got {self.l_m}")
        if not 0.0 <= self.l_r <= self.l_m:
            raise InvalidBls(f"l_r must lie in [0, l_m], got {self.l_r}")

    def replace(self, **changes):
        fields = {"l_m": self.l_m, "l_r": self.l_r, "bw": self.bw, "p_low": self.p_low}
        fields.update(changes)
        return BlsParams(**fields)


@dataclass(frozen=True)
class BlsDerived:
    link_rate: float
    i_idle: float
    i_send: float
    l_r_min: float
    mfs_sat: float
    delta_inter_beta: float
    delta_idle_beta: float
    delta_send_gamma: float
    delta_idle_gamma: float
    delta_inter_gamma: float
    b_max: float


def derive(params, link_rate, mc_max_mfs, own_mfs):
    """Slopes and window lengths of the shaper on a link of ``link_rate`` bits/s.

    ``mc_max_mfs`` is the largest frame among classes that can overtake the shaped
    class only while it is demoted (0 when there are none); ``own_mfs`` is the
    shaped class's largest frame.

    >>> d = derive(BlsParams(22118, 0, 0.46), 1e9, 2560, 512)
    >>> round(d.delta_idle_beta, 10), round(d.delta_inter_beta, 10), round(d.b_max, 1)
    (5.06426e-05, 9.16019e-05, 41471.3)
    """
    if mc_max_mfs < 0 or own_mfs < 0:
        raise ValueError("frame sizes must be non-negative")
    C = float(link_rate)
    i_idle = params.bw * C
    i_send = C - i_idle
    span = params.l_m - params.l_r
    l_r_min = max(params.l_r - mc_max_mfs / C * i_idle, 0.0)
    mfs_sat = max(mc_max_mfs - C / i_idle * params.l_r, 0.0)
    delta_idle_beta = span / i_idle + mc_max_mfs / C
    delta_inter_beta = (params.l_m - l_r_min) / i_send + delta_idle_beta
    delta_send_gamma = own_mfs / C + span / i_send
    delta_idle_gamma = span / i_idle
    delta_inter_gamma = delta_send_gamma + delta_idle_gamma
    b_max = C / i_send * params.l_m + own_mfs
    return BlsDerived(
        link_rate=C,
        i_idle=i_idle,
        i_send=i_send,
        l_r_min=l_r_min,
        mfs_sat=mfs_sat,
        delta_inter_beta=delta_inter_beta,
        delta_idle_beta=delta_idle_beta,
        delta_send_gamma=delta_send_gamma,
        delta_idle_gamma=delta_idle_gamma,
        delta_inter_gamma=delta_inter_gamma,
        b_max=b_max,
    )


def min_service(derived, hc_rate_sum=0.0):
    """Strict minimum service curve of the shaped class, a single rate-latency piece.

    ``hc_rate_sum`` is the long-run rate of all classes ranked above the shaped
    class's high priority.
    """
    C = derived.link_rate
    sat_rate = derived.mfs_sat / derived.delta_inter_beta if derived.mfs_sat > 0 else 0.0
    rate = (C - hc_rate_sum - sat_rate) * derived.i_idle / C
    if rate <= 0:
        raise NullService(f"shaped class has no guaranteed rate ({rate:.6g} bits/s)")
    return ConvexServiceCurve.rate_latency(rate, derived.delta_idle_beta)


def max_service(derived, mc_backlogged=True):
    """Maximum service curve of the shaped class.

    With medium-priority traffic present the class alternates full send and idle
    windows and the result is a leaky bucket below the link rate. Without it the
    class may use the whole link, and the curve is ``C * t``.
    """
    C = derived.link_rate
    if not mc_backlogged:
        return ConcaveCurve([(C, 0.0)])
    rate = derived.delta_send_gamma / derived.delta_inter_gamma * C
    burst = derived.b_max * derived.delta_idle_gamma / derived.delta_inter_gamma
    return ConcaveCurve([(rate, burst)])


def fluid_curves(params, link_rate):
    """Bit-by-bit idealization: ``(I_idle (t - (l_m - l_r)/I_idle)^+, I_idle t + l_m)``."""
    i_idle = params.bw * link_rate
    beta = ConvexServiceCurve.rate_latency(i_idle, (params.l_m - params.l_r) / i_idle)
    gamma = ConcaveCurve([(i_idle, params.l_m)])
    return beta, gamma


def shaped_output(alpha, beta_bls, gamma_bls):
    """Output arrival curve of the shaped class: ``min(gamma, alpha deconvolved by beta)``.

    >>> out = shaped_output(ConcaveCurve([(2.56e5, 512)]), ConvexServiceCurve([(4.47144e8, 5.06426e-5)]),
    ...                     ConcaveCurve([(4.6309e8, 22266.5)]))
    >>> round(out.burst, 2)
    524.96
    """
    if alpha.is_zero():
        return alpha
    return deconvolve(alpha, beta_bls).minimum(gamma_bls)
