"""Exception types raised by the rating-prediction pipeline."""


class CfmfError(Exception):
    """Base class for errors raised by this package."""


class RatingParseError(CfmfError, ValueError):
    """A ratings file line could not be parsed."""

    def __init__(self, message: str, lineno: int, path=None):
        where = f"{path}:{lineno}" if path is not None else f"line {lineno}"
        super().__init__(f"{where}: {message}")
        self.lineno = lineno
        self.path = path


class RatingRangeError(RatingParseError):
    """A parsed rating lies outside the declared scale."""


class ConfigError(CfmfError, ValueError):
    """Invalid configuration or unusable input data."""


class SolverError(CfmfError, ArithmeticError):
    """A least-squares normal matrix could not be factored."""


class DivergenceError(CfmfError, ArithmeticError):
    """SGD training blew up."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch
