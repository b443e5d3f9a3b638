"""Exception types raised by the analysis and simulation code."""


class BlsncError(Exception):
    """Base class for every error raised by this package."""


class UnstableRate(BlsncError):
    """Long-run arrival rate exceeds the long-run service rate, so no finite bound exists."""

    def __init__(self, arrival_rate, service_rate, where=""):
        self.arrival_rate = arrival_rate
        self.service_rate = service_rate
        self.where = where
        msg = f"arrival rate {arrival_rate:.6g} exceeds service rate {service_rate:.6g}"
        if where:
            msg += f" at {where}"
        super().__init__(msg)


class NullService(BlsncError):
    """A residual service curve has non-positive long-run rate."""


class InvalidBls(BlsncError):
    """Burst limiting shaper parameters outside their admissible range."""


class PriorityClash(BlsncError):
    """Two classes share an effective priority level on the same port."""


class DivergentFixedPoint(BlsncError):
    """A fixed-point iteration failed to converge within its iteration cap."""

    def __init__(self, iterations, last_values):
        self.iterations = iterations
        self.last_values = list(last_values)
        super().__init__(f"no convergence after {iterations} iterations, last values {self.last_values[-3:]}")


class ConfigError(BlsncError):
    """Malformed or inconsistent configuration input."""


class ViolationReport(BlsncError):
    """Simulated behaviour crossed a computed bound.

    ``violations`` is a list of dicts with at least ``kind``, ``time_ns`` and ``excess_bits``
    (or ``excess_s`` for delay checks).
    """

    def __init__(self, violations):
        self.violations = list(violations)
        kinds = sorted({v["kind"] for v in self.violations})
        super().__init__(f"{len(self.violations)} bound violation(s): {', '.join(kinds)}")
