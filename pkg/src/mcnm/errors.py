"""Exception hierarchy shared by the fitting, data and simulation modules."""


class McnmError(Exception):
    """Base class for all package errors."""


class DomainError(McnmError, ValueError):
    """A parameter lies outside the domain of a density or update."""


class SingularCovarianceError(McnmError, ArithmeticError):
    """Cholesky failed even after the ridge retry.

    ``component`` and ``pattern`` identify where the failure happened when the
    caller knows (component index, observed-coordinate mask).
    """

    def __init__(self, message, component=None, pattern=None):
        if component is not None:
            message = f"{message} (component {component})"
        if pattern is not None:
            observed = [int(j) for j in range(len(pattern)) if pattern[j]]
            message = f"{message} (observed coordinates {observed})"
        super().__init__(message)
        self.component = component
        self.pattern = pattern


class DataError(McnmError, ValueError):
    """Malformed or invalid input data."""


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} at {', '.join(where)}"
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(DataError):
    pass


class ConfigError(McnmError, ValueError):
    pass


class DegenerateRowError(McnmError, ArithmeticError):
    """A row has zero density under every component."""


class ComponentCollapseError(McnmError, ArithmeticError):
    def __init__(self, component, mass):
        super().__init__(
            f"component {component} collapsed (effective count {mass:.3g})")
        self.component = component
        self.mass = mass


class FitError(McnmError, RuntimeError):
    """Every random start failed; ``diagnostics`` holds one message per start."""

    def __init__(self, message, diagnostics=()):
        self.diagnostics = list(diagnostics)
        detail = "; ".join(self.diagnostics)
        super().__init__(f"{message}: {detail}" if detail else message)
