"""Exception hierarchy shared across the planner."""


class PlannerError(Exception):
    """Base class for all planner errors."""


class SingularChartError(PlannerError, ValueError):
    """A chart point lies outside the chart's non-singular domain."""


class BarrierViolation(PlannerError, ValueError):
    """A potential barrier denominator is not strictly positive."""


class CutLocusError(PlannerError, ValueError):
    """log/distance requested across the cut locus (e.g. antipodal points)."""


class UnsupportedManifoldError(PlannerError):
    """The manifold does not provide the requested closure."""


class ConstraintCountError(PlannerError, ValueError):
    """Boundary data does not supply 4*dim*n conditions."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = list(rows)


class RankDeficientError(PlannerError, ValueError):
    """Constraint Jacobian lost rank at a terminal point."""


class GridError(PlannerError, ValueError):
    """Sample grid is too coarse, non-uniform, or of the wrong parity."""


class IntegrationError(PlannerError):
    """Forward integration left the admissible region."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ScenarioError(PlannerError, ValueError):
    """Scenario file could not be parsed or validated.

    ``path`` names the offending key (dotted, with list indices), ``line`` is
    set for syntax errors.
    """

    def __init__(self, message, path=None, line=None):
        prefix = ""
        if path:
            prefix = f"{path}: "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)
        self.path = path
        self.line = line
