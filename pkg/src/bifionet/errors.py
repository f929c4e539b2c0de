"""Exception types shared across the package."""


class BifionetError(Exception):
    """Base class for all package errors."""


class DimensionError(BifionetError, ValueError):
    """Array shapes do not agree."""


class ContractError(BifionetError, ValueError):
    """A precondition of an operation is violated."""


class SpecError(BifionetError, ValueError):
    """Invalid network or model specification."""


class ConfigError(BifionetError, ValueError):
    """Experiment configuration is invalid or incomplete."""


class ParseError(BifionetError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericError(BifionetError, ArithmeticError):
    """A numerical procedure diverged or failed to converge."""


class DivergenceError(NumericError):
    """Non-finite values appeared during time integration or training."""

    def __init__(self, message, time=None, epoch=None):
        self.time = time
        self.epoch = epoch
        super().__init__(message)


class ConvergenceError(NumericError):
    """Iterative solver did not converge."""

    def __init__(self, message, history=None):
        self.history = list(history) if history is not None else []
        super().__init__(message)


class SolverError(NumericError):
    """A physics solve failed for one realization of the uncertain inputs."""

    def __init__(self, message, xi=None, index=None):
        self.xi = None if xi is None else list(map(float, xi))
        self.index = index
        super().__init__(message)
