"""Exception hierarchy shared by all loschmidt modules."""


class LoschmidtError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(LoschmidtError, ValueError):
    pass


class ResourceLimitError(LoschmidtError):
    pass


class IngestError(LoschmidtError):
    """A model file could not be parsed or violates the file schema."""

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


class NumericFailure(LoschmidtError):
    def __init__(self, message, dx=None, dimension=None):
        self.dx = None if dx is None else float(dx)
        self.dimension = dimension
        extra = []
        if dx is not None:
            extra.append(f"dx={self.dx!r}")
        if dimension is not None:
            extra.append(f"n={dimension}")
        if extra:
            message = f"{message} ({', '.join(extra)})"
        super().__init__(message)


class EdgeEffectError(InvalidArgumentError):
    """Reference state lies in the guard band at the spectrum edges."""


class TooNarrowError(InvalidArgumentError):
    """Wavepacket support covers too few levels."""


class DegenerateDistributionError(LoschmidtError):
    pass


class OracleScopeError(LoschmidtError):
    """Problem size exceeds what the brute-force oracles accept."""


class InsufficientWindowError(LoschmidtError):
    pass


class InsufficientStatisticsError(LoschmidtError):
    pass
