"""Exception types shared across the simulator."""


class MmcError(Exception):
    """Base class for simulator errors."""


class InvalidInputError(MmcError, ValueError):
    """A numeric input is outside the domain of an operation."""


class ConfigurationError(MmcError, ValueError):
    """A scenario or parameter set is inconsistent.

    ``field`` names the offending configuration key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ScenarioParseError(MmcError):
    """The scenario text could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class NumericalDivergenceError(MmcError, ArithmeticError):
    """The plant state became non-finite.

    ``quantity`` names the state variable that diverged. The simulation engine
    attaches the partial result under ``result`` before re-raising.
    """

    def __init__(self, quantity, message=None):
        super().__init__(message or f"non-finite value in {quantity}")
        self.quantity = quantity
        self.result = None
