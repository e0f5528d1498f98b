"""Exception hierarchy shared by every otfslab app.

Each class carries the process exit code that management commands
report when the error escapes a command.
"""


class OtfsLabError(Exception):
    exit_code = 1


class ConfigurationError(OtfsLabError):
    exit_code = 2


class NumericError(OtfsLabError):
    """A computation produced something unusable (NaN/Inf, a singular
    system, a zero-energy precoder...)."""
    exit_code = 3

    def __init__(self, message, operation=None):
        super(NumericError, self).__init__(message)
        self.operation = operation


class DimensionError(OtfsLabError):
    exit_code = 3


class SingularMatrixError(NumericError):

    def __init__(self, pivot_index, pivot_magnitude, tolerance):
        super(SingularMatrixError, self).__init__(
            "Singular matrix: pivot %d has magnitude %.3e (tolerance %.3e)" % (
                pivot_index, pivot_magnitude, tolerance),
            operation='complex_inverse')
        self.pivot_index = pivot_index
        self.pivot_magnitude = pivot_magnitude
        self.tolerance = tolerance


class DegeneratePrecoderError(NumericError):
    """The network produced an all-zero output, which cannot be scaled
    onto the power budget."""

    def __init__(self, message='Pre-normalization precoder has zero energy'):
        super(DegeneratePrecoderError, self).__init__(message, operation='power_normalize')


class TrainingDivergedError(NumericError):

    def __init__(self, iteration, last_finite_params):
        super(TrainingDivergedError, self).__init__(
            "Non-finite training cost at iteration %d" % iteration, operation='train')
        self.iteration = iteration
        self.last_finite_params = last_finite_params


class CheckpointError(OtfsLabError):
    exit_code = 4


class DatasetFormatError(OtfsLabError):
    exit_code = 4
