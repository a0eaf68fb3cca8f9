"""Exception taxonomy shared across the package.

The CLI maps these classes onto stage-tagged exit codes, so library code
raises the most specific class that applies instead of bare ValueError.
"""


class AuditError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AuditError):
    """Invalid or inconsistent run configuration."""


class DataError(AuditError):
    """Input data violates the dataset contract."""


class TrainingError(AuditError):
    """Model training cannot proceed or failed to converge."""


class DegenerateStatisticsError(AuditError):
    """A statistic is undefined on the given inputs (zero variance, too few rows)."""
