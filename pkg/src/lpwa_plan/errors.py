"""Exception types raised across the package."""


class PlanningError(Exception):
    """Base class for all errors raised by lpwa_plan."""


class NonConvergence(PlanningError):
    """Adaptive quadrature did not reach the requested tolerance."""


class SingularityError(PlanningError):
    """Pathloss evaluated at zero distance with a pure power law."""


class DomainError(PlanningError, ValueError):
    """Argument outside the mathematical domain of a function."""


class UnsupportedFading(PlanningError):
    """Analytic success probability requested for Nakagami m > 1."""


class MissingPopulation(PlanningError):
    """SIBL/LIBL lifetime requested without a simulated device population."""


class InfeasibleBandwidth(PlanningError):
    """Bandwidth below the minimum at which the closed-form AP density exists."""


class Infeasible(PlanningError):
    """No decision in the searched range satisfies the reliability constraint."""


class Unsatisfiable(Infeasible):
    """No replica count up to n_max meets the outage target at a given power."""


class ParseError(PlanningError):
    """Scenario file could not be parsed."""

    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(PlanningError):
    """Scenario violates one or more invariants."""

    def __init__(self, report):
        self.report = report
        lines = "; ".join(f"{v.path}: {v.message}" for v in report.violations)
        super().__init__(f"invalid scenario: {lines}")
