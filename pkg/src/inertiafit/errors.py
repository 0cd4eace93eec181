"""Exception hierarchy.

Every error carries a short machine-readable ``code`` used by the command
line front-end. ``InputError`` subclasses describe bad data or bad
configuration and map to exit status 2.
"""


class InertiaFitError(Exception):
    code = "INTERNAL_ERROR"


class InputError(InertiaFitError, ValueError):
    code = "INPUT_ERROR"


class InvalidConfig(InputError):
    code = "INVALID_CONFIG"


# -- trace ingestion / alignment -------------------------------------------

class MissingColumn(InputError):
    code = "MISSING_COLUMN"


class TraceFileNotFound(InputError, FileNotFoundError):
    code = "TRACE_FILE_NOT_FOUND"


class NonMonotonicTime(InputError):
    code = "NON_MONOTONIC_TIME"


class NonUniformSampling(InputError):
    code = "NON_UNIFORM_SAMPLING"


class NonFiniteValue(InputError):
    code = "NON_FINITE_VALUE"


class TooFewSamples(InputError):
    code = "TOO_FEW_SAMPLES"


class InvalidStep(InputError):
    code = "INVALID_STEP"


class InsufficientOverlap(InputError):
    code = "INSUFFICIENT_OVERLAP"


class OnsetNotFound(InputError):
    code = "ONSET_NOT_FOUND"


# -- preprocessing ------------------------------------------------------------

class InvalidTimeConstant(InputError):
    code = "INVALID_TIME_CONSTANT"


class UnknownChannel(InputError, KeyError):
    code = "UNKNOWN_CHANNEL"

    def __str__(self):
        return Exception.__str__(self)


class WindowTooSmall(InputError):
    code = "WINDOW_TOO_SMALL"


# -- estimators ---------------------------------------------------------------

class EstimationError(InertiaFitError, ArithmeticError):
    code = "ESTIMATION_ERROR"


class ZeroRocof(EstimationError):
    code = "ZERO_ROCOF"


class NegativeEstimate(EstimationError):
    code = "NEGATIVE_ESTIMATE"


class HorizonOutOfRange(InputError):
    code = "HORIZON_OUT_OF_RANGE"


class IllConditionedFit(EstimationError):
    code = "ILL_CONDITIONED_FIT"


class InsufficientSamples(InputError):
    code = "INSUFFICIENT_SAMPLES"


class NonPositiveInertia(InputError):
    code = "NON_POSITIVE_INERTIA"


class DegenerateHorizon(InputError):
    code = "DEGENERATE_HORIZON"


class EmptySweep(InputError):
    code = "EMPTY_SWEEP"


# -- simulation / IO ----------------------------------------------------------

class UnstableScenario(InertiaFitError):
    code = "UNSTABLE_SCENARIO"


class IoFailure(InertiaFitError, OSError):
    code = "IO_FAILURE"


class ConvergenceWarning(UserWarning):
    """Model fit stopped on the iteration limit; the best point found is returned."""
