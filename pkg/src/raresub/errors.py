"""Exception hierarchy.

The CLI maps the three top-level families onto distinct exit codes, so every
raised error should derive from one of them.
"""


class RaresubError(Exception):
    exit_code = 1


class ConfigError(RaresubError):
    exit_code = 2


class DataError(RaresubError):
    exit_code = 3


class NumericError(RaresubError):
    exit_code = 4


# data ingest
class MissingFile(DataError):
    pass


class MalformedHeader(DataError):
    pass


class NonNumericCell(DataError):
    def __init__(self, row, col, value):
        super().__init__(f"non-numeric cell at row {row!r}, column {col!r}: {value!r}")
        self.row = row
        self.col = col
        self.value = value


class DuplicateSampleId(DataError):
    pass


class DuplicateGeneId(DataError):
    pass


class EmptyJoin(DataError):
    pass


class UnknownClass(DataError):
    pass


class InvalidValues(DataError):
    """Raised when a matrix violates the finite / non-negative contract."""


class LengthMismatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


# preprocessing
class NegativeInput(DataError):
    pass


class NoVariableGenes(DataError):
    pass


class ZeroVarianceColumn(NumericError):
    pass


# autoencoder
class InvalidDims(ConfigError):
    pass


class TooFewSamples(DataError):
    pass


class NonFiniteLoss(NumericError):
    def __init__(self, message, checkpoint=None, history=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.history = history


# clustering / stability
class KTooLarge(ConfigError):
    pass


class DegenerateData(NumericError):
    pass


class SingleCluster(NumericError):
    pass


class CoincidentCentroids(NumericError):
    pass


class NonSquare(ConfigError):
    pass


class NonFinite(NumericError):
    pass


class LabelOutOfRange(DataError):
    pass


# stats / DE
class OutOfRangeP(NumericError):
    pass


class ZeroMarginal(DataError):
    pass


class ClusterTooSmall(DataError):
    pass


class InfeasibleSpec(ConfigError):
    pass


class MissingUpstream(RaresubError):
    pass
