"""Exception hierarchy shared by all modules."""


class LevyExtractError(Exception):
    """Base class for all package errors."""


class DomainError(LevyExtractError, ValueError):
    """Argument outside the mathematical domain of a function."""


class SimulationError(LevyExtractError):
    def __init__(self, message, state=None, z=None, step=None):
        super().__init__(message)
        self.state = state
        self.z = z
        self.step = step


class ParseError(LevyExtractError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(LevyExtractError, ValueError):
    pass


class EstimationError(LevyExtractError):
    pass


class QueryError(LevyExtractError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class IntegrationError(LevyExtractError):
    pass


class EvaluationError(LevyExtractError):
    def __init__(self, message, transform_index=None):
        super().__init__(message)
        self.transform_index = transform_index


class TrainingError(LevyExtractError):
    def __init__(self, message, epoch=None, parameter_index=None):
        super().__init__(message)
        self.epoch = epoch
        self.parameter_index = parameter_index
