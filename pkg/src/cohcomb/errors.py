"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures to distinct
process exit statuses; the class name is the machine-readable error class.
"""


class CohCombError(Exception):
    exit_code = 1


class ConfigError(CohCombError):
    exit_code = 2


class DataError(CohCombError):
    exit_code = 3


class NumericalError(CohCombError):
    exit_code = 4


# hierarchy
class DuplicateSeriesId(ConfigError):
    pass


class InconsistentPartition(ConfigError):
    pass


class DimensionMismatch(CohCombError, ValueError):
    pass


class MissingBottomValue(DataError):
    pass


# covariance
class TooFewObservations(DataError):
    pass


class NotSymmetric(NumericalError, ValueError):
    pass


class SingularAfterConditioning(NumericalError):
    pass


# combiner
class SingularW(NumericalError):
    pass


class RankDeficientConstraints(NumericalError):
    pass


class SingularKKT(NumericalError):
    pass


class SingularProjection(NumericalError):
    pass


class DegeneratePanel(NumericalError):
    pass


class SingularSeriesCovariance(NumericalError):
    pass


# baseforecast
class SeriesTooShort(DataError):
    pass


class UnbalancedBundle(DataError):
    pass


class UnknownSeriesId(DataError):
    pass


# evaluation
class EmptyTestSet(ConfigError):
    pass


class MissingForecast(DataError):
    pass


class ZeroBenchmarkError(NumericalError):
    pass


# io
class NonContiguousDates(DataError):
    pass


class DuplicateRow(DataError):
    pass


class NonNumericValue(DataError):
    pass
