"""Exception types shared across the package."""


class HarvesterError(Exception):
    """Base class for all errors raised by esharvest."""


class InvalidDesignError(HarvesterError, ValueError):
    """A profile, geometry or design violates its invariants."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class PullInError(InvalidDesignError):
    """Polarization voltage at or above the configured pull-in threshold."""


class DomainError(HarvesterError, ValueError):
    """Inputs outside the domain an operation is defined on."""


class NumericalFailure(HarvesterError, ArithmeticError):
    """The integrator produced a non-finite state."""

    def __init__(self, message, time):
        super().__init__(f"{message} (t={time:.6e} s)")
        self.time = time


class FitError(HarvesterError):
    """Capacitance fit did not converge; carries the best parameters found."""

    def __init__(self, message, best=None, diagnostic=""):
        super().__init__(message)
        self.best = best
        self.diagnostic = diagnostic


class InfeasibleError(DomainError):
    """Design constraints admit no candidate."""


class ConfigError(HarvesterError, ValueError):
    """Malformed run configuration; names the offending key and line."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message}" + (f" ({', '.join(where)})" if where else ""))
        self.key = key
        self.line = line
