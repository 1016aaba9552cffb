class URNNError(Exception):
    """Base class for every error raised by uRNN Lab"""


class ShapeError(URNNError, ValueError):
    """Operand dimensions do not agree"""


class UnsupportedSizeError(URNNError, ValueError):
    """Transform length the FFT cannot handle (not a power of two)"""


class InvalidParameterError(URNNError, ValueError):
    """A parameter value outside its valid domain"""


class SizeGuardError(URNNError):
    """Refused to build a dense object above the size guard"""


class DataError(URNNError, ValueError):
    """Bad input data: non-finite values or targets out of range"""


class FormatError(URNNError):
    """A file (IDX or checkpoint) could not be parsed"""


class ConsistencyError(URNNError):
    """Two objects that must describe the same model do not"""


class ConfigError(URNNError):
    """Invalid run configuration or config file"""


class NonFiniteError(URNNError, FloatingPointError):
    """A loss or gradient became NaN or infinite"""
