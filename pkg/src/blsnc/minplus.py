"""Min-plus algebra on concave arrival curves and convex service curves.

Arrival curves are kept as the minimum of affine pieces ``burst + rate * t`` and
service curves as the maximum of rate-latency pieces ``rate * max(t - latency, 0)``.
Both forms are closed under the operations the delay analysis needs, so every
operation below returns a normalized curve of the same family.

The operations are exact: each result is assembled from values taken at the
finitely many instants where the operands change slope, and from the finite set of
slopes the result can take.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NullService, UnstableRate

REL_TOL = 1e-12


def _same(a, b, tol=REL_TOL):
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def _unique_sorted(values, tol=1e-12):
    out = []
    for v in sorted(values):
        if out and v - out[-1] <= tol * max(abs(v), 1e-300):
            continue
        out.append(v)
    return out


class ConcaveCurve:
    """Concave piecewise-linear arrival curve, the minimum of ``(rate, burst)`` pieces.

    After normalization the pieces are ordered by strictly decreasing rate and
    strictly increasing burst, and every piece is active on a non-empty interval
    of ``t >= 0``.

    >>> a = ConcaveCurve([(1e9, 512), (2.56e5, 1024)])
    >>> a(0.0)
    512.0
    >>> round(a.breakpoints()[1][0], 11)
    5.1213e-07
    """

    __slots__ = ("pieces",)

    def __init__(self, pieces):
        cleaned = []
        for rate, burst in pieces:
            rate, burst = float(rate), float(burst)
            if not (math.isfinite(rate) and math.isfinite(burst)):
                raise ValueError(f"non-finite arrival piece ({rate}, {burst})")
            if rate < 0 or burst < -1e-9:
                raise ValueError(f"arrival piece must have rate >= 0 and burst >= 0, got ({rate}, {burst})")
            cleaned.append((rate, max(burst, 0.0)))
        if not cleaned:
            raise ValueError("an arrival curve needs at least one piece")
        self.pieces = _lower_envelope(cleaned)

    @classmethod
    def leaky_bucket(cls, rate, burst):
        return cls([(rate, burst)])

    @classmethod
    def zero(cls):
        return cls([(0.0, 0.0)])

    @property
    def rate(self):
        """Long-run rate (slope of the last piece)."""
        return self.pieces[-1][0]

    @property
    def burst(self):
        """Value at ``t = 0``."""
        return self.pieces[0][1]

    def is_zero(self):
        return self.pieces == ((0.0, 0.0),)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        r = np.array([p[0] for p in self.pieces])
        b = np.array([p[1] for p in self.pieces])
        out = np.min(b + r * t_arr[..., None], axis=-1)
        return float(out) if out.ndim == 0 else out

    def value(self, t):
        return min(b + r * t for r, b in self.pieces)

    def breakpoints(self):
        """``[(0, burst), (x_2, y_2), ...]``; the segment starting at entry k has rate ``pieces[k][0]``."""
        pts = [(0.0, self.pieces[0][1])]
        for (r0, b0), (r1, b1) in zip(self.pieces, self.pieces[1:]):
            x = (b1 - b0) / (r0 - r1)
            pts.append((x, b1 + r1 * x))
        return pts

    def inverse(self, y):
        """Smallest ``t >= 0`` with ``self(t) >= y``; ``None`` when the curve never reaches ``y``."""
        t = 0.0
        for r, b in self.pieces:
            if b >= y:
                continue
            if r <= 0:
                return None
            t = max(t, (y - b) / r)
        return t

    def __add__(self, other):
        if not isinstance(other, ConcaveCurve):
            return NotImplemented
        if len(self.pieces) == 1 and len(other.pieces) == 1:
            (r1, b1), (r2, b2) = self.pieces[0], other.pieces[0]
            return ConcaveCurve([(r1 + r2, b1 + b2)])
        ts = _unique_sorted([x for x, _ in self.breakpoints()] + [x for x, _ in other.breakpoints()])
        vals = [self.value(t) + other.value(t) for t in ts]
        slopes = {r1 + r2 for r1, _ in self.pieces for r2, _ in other.pieces}
        return _concave_from_samples(ts, vals, slopes, self.rate + other.rate)

    def __radd__(self, other):
        if other == 0:
            return self
        return self.__add__(other)

    def scale(self, k):
        """Sum of ``k`` copies of this curve."""
        if k < 0:
            raise ValueError("scale factor must be non-negative")
        if k == 0:
            return ConcaveCurve.zero()
        return ConcaveCurve([(k * r, k * b) for r, b in self.pieces])

    def minimum(self, other):
        return ConcaveCurve(self.pieces + other.pieces)

    def shift(self, delay):
        """``t -> self(t + delay)``: the curve of traffic delayed by at most ``delay``."""
        return ConcaveCurve([(r, b + r * delay) for r, b in self.pieces])

    def allclose(self, other, rel=1e-9):
        if len(self.pieces) != len(other.pieces):
            return False
        return all(
            math.isclose(r1, r2, rel_tol=rel, abs_tol=1e-9) and math.isclose(b1, b2, rel_tol=rel, abs_tol=1e-9)
            for (r1, b1), (r2, b2) in zip(self.pieces, other.pieces)
        )

    def to_dict(self):
        return {"kind": "arrival", "pieces": [{"rate": r, "burst": b} for r, b in self.pieces]}

    def __eq__(self, other):
        return isinstance(other, ConcaveCurve) and self.pieces == other.pieces

    def __hash__(self):
        return hash(("concave", self.pieces))

    def __repr__(self):
        body = ", ".join(f"({r:.6g}, {b:.6g})" for r, b in self.pieces)
        return f"ConcaveCurve([{body}])"


class ConvexServiceCurve:
    """Convex piecewise-linear service curve, the maximum of ``(rate, latency)`` rate-latency pieces.

    After normalization rates and latencies are both strictly increasing and every
    piece is active somewhere on ``t >= 0``.

    >>> b = ConvexServiceCurve.rate_latency(1e9, 8.192e-6)
    >>> b(1e-5)
    1808.0000000000002
    """

    __slots__ = ("pieces",)

    def __init__(self, pieces):
        cleaned = []
        for rate, latency in pieces:
            rate, latency = float(rate), float(latency)
            if not (math.isfinite(rate) and math.isfinite(latency)):
                raise ValueError(f"non-finite service piece ({rate}, {latency})")
            if latency < -1e-15:
                raise ValueError(f"service latency must be >= 0, got {latency}")
            if rate > 0:
                cleaned.append((rate, max(latency, 0.0)))
        if not cleaned:
            raise NullService("service curve has no piece with positive rate")
        self.pieces = _upper_envelope(cleaned)

    @classmethod
    def rate_latency(cls, rate, latency=0.0):
        if rate <= 0:
            raise NullService(f"rate-latency curve with rate {rate}")
        return cls([(rate, latency)])

    @property
    def rate(self):
        """Long-run rate (the largest piece rate)."""
        return self.pieces[-1][0]

    @property
    def latency(self):
        """Length of the initial interval where no service is guaranteed."""
        return self.pieces[0][1]

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        r = np.array([p[0] for p in self.pieces])
        lat = np.array([p[1] for p in self.pieces])
        out = np.max(np.maximum(r * (t_arr[..., None] - lat), 0.0), axis=-1)
        return float(out) if out.ndim == 0 else out

    def value(self, t):
        return max(0.0, max(r * (t - lat) for r, lat in self.pieces))

    def breakpoints(self):
        """``[(0, 0), (latency_1, 0), (x_2, y_2), ...]``; from entry k >= 1 the slope is ``pieces[k-1][0]``."""
        pts = [(0.0, 0.0)]
        r0, t0 = self.pieces[0]
        pts.append((t0, 0.0))
        for (r0, t0), (r1, t1) in zip(self.pieces, self.pieces[1:]):
            x = (r1 * t1 - r0 * t0) / (r1 - r0)
            pts.append((x, r1 * (x - t1)))
        return pts

    def inverse(self, y):
        """Smallest ``t`` with ``self(t) >= y`` (right limit at ``y = 0``)."""
        y = max(y, 0.0)
        return min(lat + y / r for r, lat in self.pieces)

    def maximum(self, other):
        return ConvexServiceCurve(self.pieces + other.pieces)

    def allclose(self, other, rel=1e-9):
        if len(self.pieces) != len(other.pieces):
            return False
        return all(
            math.isclose(r1, r2, rel_tol=rel, abs_tol=1e-9) and math.isclose(t1, t2, rel_tol=rel, abs_tol=1e-15)
            for (r1, t1), (r2, t2) in zip(self.pieces, other.pieces)
        )

    def to_dict(self):
        return {"kind": "service", "pieces": [{"rate": r, "latency": t} for r, t in self.pieces]}

    def __eq__(self, other):
        return isinstance(other, ConvexServiceCurve) and self.pieces == other.pieces

    def __hash__(self):
        return hash(("convex", self.pieces))

    def __repr__(self):
        body = ", ".join(f"({r:.6g}, {t:.6g})" for r, t in self.pieces)
        return f"ConvexServiceCurve([{body}])"


def _lower_envelope(pieces):
    # minimum of lines over t >= 0, scanned by decreasing rate
    lines = []
    for r, b in sorted(pieces, key=lambda p: -p[0]):
        if lines and _same(lines[-1][0], r):
            lines[-1] = (lines[-1][0], min(lines[-1][1], b))
        else:
            lines.append((r, b))
    hull = []
    for r, b in lines:
        while hull:
            r1, b1 = hull[-1]
            if b <= b1 + 1e-12 * max(abs(b1), 1.0):
                hull.pop()
                continue
            if len(hull) >= 2:
                r0, b0 = hull[-2]
                if (b - b1) / (r1 - r) <= (b1 - b0) / (r0 - r1) * (1 + 1e-12):
                    hull.pop()
                    continue
            break
        hull.append((r, b))
    return tuple(hull)


def _upper_envelope(pieces):
    # maximum of the zero line and R*t - R*T over t >= 0, scanned by increasing rate
    lines = []
    for r, lat in sorted(pieces):
        if lines and _same(lines[-1][0], r):
            lines[-1] = (lines[-1][0], max(lines[-1][1], -r * lat))
        else:
            lines.append((r, -r * lat))
    hull = [(0.0, 0.0)]
    for r, c in lines:
        while hull:
            r1, c1 = hull[-1]
            if c >= c1 - 1e-12 * max(abs(c1), abs(c), 1e-300):
                hull.pop()
                continue
            if len(hull) >= 2:
                r0, c0 = hull[-2]
                if (c1 - c) / (r - r1) <= (c0 - c1) / (r1 - r0) * (1 + 1e-12):
                    hull.pop()
                    continue
            break
        hull.append((r, c))
    return tuple((r, max(-c / r, 0.0)) for r, c in hull if r > 0)


def _concave_from_samples(ts, vals, slopes, final_rate):
    # support lines of a concave function known exactly at all its breakpoints
    lines = []
    for s in slopes:
        if s < final_rate and not _same(s, final_rate):
            continue
        c = max(v - s * t for t, v in zip(ts, vals))
        lines.append((max(s, 0.0), c))
    return ConcaveCurve(lines)


def _convex_from_samples(ts, vals, slopes, final_rate):
    # support lines of a convex function known exactly at all its breakpoints, clipped at zero
    pieces = []
    for s in slopes:
        if s <= 0 or (s > final_rate and not _same(s, final_rate)):
            continue
        c = min(v - s * t for t, v in zip(ts, vals))
        pieces.append((s, max(-c / s, 0.0)))
    return ConvexServiceCurve(pieces)


def _check_stable(alpha, beta, where=""):
    if alpha.rate > beta.rate and not _same(alpha.rate, beta.rate):
        raise UnstableRate(alpha.rate, beta.rate, where)


@dataclass(frozen=True)
class Deviation:
    horizontal: float
    vertical: float


def deconvolve(alpha, beta):
    """Output arrival curve ``t -> sup_s alpha(t + s) - beta(s)``.

    >>> out = deconvolve(ConcaveCurve([(2.56e5, 512)]), ConvexServiceCurve([(4.47144e8, 5.06426e-5)]))
    >>> round(out.burst, 2)
    524.96
    """
    _check_stable(alpha, beta, "deconvolution")
    a_pts = [x for x, _ in alpha.breakpoints()]
    b_pts = [x for x, _ in beta.breakpoints()]
    ts = _unique_sorted([0.0] + [a - b for a in a_pts for b in b_pts if a > b])

    def h(t):
        cands = b_pts + [a - t for a in a_pts if a >= t]
        return max(alpha.value(t + s) - beta.value(s) for s in cands)

    vals = [h(t) for t in ts]
    slopes = {r for r, _ in alpha.pieces} | {r for r, _ in beta.pieces} | {0.0}
    return _concave_from_samples(ts, vals, slopes, alpha.rate)


def convolve(beta1, beta2):
    """Min-plus convolution of two service curves (service of two servers in tandem).

    >>> convolve(ConvexServiceCurve([(1e9, 1e-6)]), ConvexServiceCurve([(5e8, 2e-6)]))
    ConvexServiceCurve([(5e+08, 3e-06)])
    """
    p1, p2 = beta1.breakpoints(), beta2.breakpoints()
    top = min(beta1.rate, beta2.rate)
    pieces = []
    for s in {r for r, _ in beta1.pieces} | {r for r, _ in beta2.pieces}:
        if s > top and not _same(s, top):
            continue
        # conjugates add under convolution
        c = min(y - s * t for t, y in p1) + min(y - s * t for t, y in p2)
        pieces.append((s, max(-c / s, 0.0)))
    return ConvexServiceCurve(pieces)


def leftover(beta, alpha, blocking=0.0):
    """Residual service ``max(0, sup_{s <= t} beta(s) - alpha(s) - blocking)``.

    Raises :class:`NullService` when the residual long-run rate is not positive.

    >>> leftover(ConvexServiceCurve([(1e9, 0.0)]), ConcaveCurve([(2.56e5, 512)]), 8192)
    ConvexServiceCurve([(9.99744e+08, 8.70623e-06)])
    """
    if blocking < 0:
        raise ValueError("blocking term must be non-negative")
    final = beta.rate - alpha.rate
    if final <= 0 or _same(beta.rate, alpha.rate):
        raise NullService(f"residual rate {final:.6g} is not positive")
    ts = _unique_sorted([x for x, _ in beta.breakpoints()] + [x for x, _ in alpha.breakpoints()])
    vals = [beta.value(t) - alpha.value(t) - blocking for t in ts]
    slopes = {bs - ar for bs in [0.0] + [r for r, _ in beta.pieces] for ar, _ in alpha.pieces}
    slopes.add(final)
    return _convex_from_samples(ts, vals, slopes, final)


def hdev(alpha, beta):
    """Maximal horizontal distance between ``alpha`` and ``beta`` (the delay bound).

    >>> a = ConcaveCurve([(1e9, 512), (2.56e5, 1024)])
    >>> round(hdev(a, ConvexServiceCurve([(1e8, 1e-5)])), 10)
    1.97292e-05
    """
    _check_stable(alpha, beta, "delay bound")
    if alpha.is_zero():
        return 0.0
    ts = [x for x, _ in alpha.breakpoints()]
    for _, y in beta.breakpoints():
        if y > alpha.burst:
            t = alpha.inverse(y)
            if t is not None:
                ts.append(t)
    return max(0.0, max(beta.inverse(alpha.value(t)) - t for t in ts))


def vdev(alpha, beta):
    """Maximal vertical distance between ``alpha`` and ``beta`` (the backlog bound)."""
    _check_stable(alpha, beta, "backlog bound")
    ts = [x for x, _ in alpha.breakpoints()] + [x for x, _ in beta.breakpoints()]
    return max(alpha.value(t) - beta.value(t) for t in ts)


def deviations(alpha, beta):
    return Deviation(hdev(alpha, beta), vdev(alpha, beta))


def hdev_by_pieces(alpha, beta):
    """Delay bound ``min_j (y_k / R_j + T_j - x_k)`` taken piece by piece over ``beta``.

    ``(x_k, y_k)`` is the first breakpoint of ``alpha`` from which its slope is at most
    ``R_j``. This equals :func:`hdev` when ``beta`` has one piece and bounds it from
    above otherwise.
    """
    _check_stable(alpha, beta, "delay bound")
    pts = alpha.breakpoints()
    best = math.inf
    for rate, lat in beta.pieces:
        for (x, y), (r, _) in zip(pts, alpha.pieces):
            if r <= rate * (1 + REL_TOL):
                best = min(best, y / rate + lat - x)
                break
    return best
