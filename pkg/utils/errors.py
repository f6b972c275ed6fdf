"""Exception hierarchy shared by the services and the command line"""

# Exit codes returned by the command line
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


class AuFairError(Exception):
    """Base class for every error raised by this package"""
    exit_code = EXIT_FAILURE


class ConfigurationError(AuFairError):
    """Invalid run or experiment configuration"""
    exit_code = EXIT_CONFIG


class SchemaError(ConfigurationError):
    """Dataset schema does not match the data file"""


class DataValidationError(AuFairError):
    """Data values violate the schema (e.g. non-binary label column)"""
    exit_code = EXIT_DATA


class UnsupportedOperationError(AuFairError):
    """Operation is not available for this kind of object"""


class DegenerateModelError(AuFairError):
    """Model cannot be fit (e.g. single-class labels)"""
    exit_code = EXIT_DATA


class UndefinedFitnessError(AuFairError):
    """Fitness requested with no acquired labels"""


class UndefinedBiasError(AuFairError):
    """A protected group has no labeled positives"""


class FittingError(AuFairError):
    """Baseline policy could not be fit"""


class StateError(AuFairError):
    """Object used in a state that does not allow the operation"""


class BudgetExceededError(StateError):
    """Label acquisition beyond the budget"""


def exit_code_for(error):
    """Map an exception to a command line exit code"""
    from marshmallow import ValidationError

    if isinstance(error, AuFairError):
        return error.exit_code
    if isinstance(error, ValidationError):
        return EXIT_CONFIG
    if isinstance(error, (FileNotFoundError, IsADirectoryError, UnicodeDecodeError)):
        return EXIT_DATA
    return EXIT_FAILURE
