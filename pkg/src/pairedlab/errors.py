"""Exception hierarchy shared by every pairedlab module."""


class PairedLabError(Exception):
    """Base class for all errors raised by pairedlab."""


class ParameterDomainError(PairedLabError, ValueError):
    """A distribution or option parameter lies outside its valid domain."""


class DivergedMomentError(PairedLabError, ArithmeticError):
    """A requested moment does not exist (is infinite) for the given parameters."""


class CalibrationRangeError(PairedLabError, ValueError):
    """A calibration target cannot be reached by the requested family."""


class DegenerateSampleError(PairedLabError, ValueError):
    """A sample has no usable variability (zero variance, all zeros, ...)."""


class ScoreFileError(PairedLabError, ValueError):
    """Base class for problems found while reading a score matrix."""


class ParseError(ScoreFileError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RaggedInputError(ScoreFileError):
    def __init__(self, message, topic=None):
        self.topic = topic
        super().__init__(message)


class DuplicateKeyError(ParseError):
    pass


class InsufficientSystemsError(PairedLabError, ValueError):
    pass
