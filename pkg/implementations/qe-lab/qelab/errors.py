# qelab/errors.py

"""Exception hierarchy shared by every qelab module."""


class QELabError(Exception):
    """Base exception class for qe-lab"""

    pass


class DegenerateMetricError(QELabError):
    """Exception raised when a metric matrix is singular or not positive definite"""

    pass


class EvaluationError(QELabError):
    """Exception raised for non-finite values or unusable finite-difference steps"""

    pass


class InadmissiblePointError(QELabError):
    """Exception raised for points outside a provider's admissible domain"""

    pass


class PathError(InadmissiblePointError):
    """Exception raised when a transport path leaves the domain or does not close"""

    pass


class ParameterError(QELabError):
    """Exception raised when parameters violate a catalog or operation constraint"""

    pass


class IntegrationError(QELabError):
    """Exception raised when an ODE integration fails"""

    pass


class ConfigError(QELabError):
    """Exception raised for invalid run configurations"""

    pass


EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def exit_code_for(e: Exception) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(e, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def handle_error(e: Exception) -> str:
    """Handle various types of errors and return user-friendly error messages"""
    if isinstance(e, ConfigError):
        return f"Invalid configuration: {str(e)}"
    elif isinstance(e, ParameterError):
        return f"Invalid parameters: {str(e)}"
    elif isinstance(e, DegenerateMetricError):
        return f"Degenerate metric: {str(e)}"
    elif isinstance(e, PathError):
        return f"Invalid transport path: {str(e)}"
    elif isinstance(e, InadmissiblePointError):
        return f"Inadmissible point: {str(e)}"
    elif isinstance(e, IntegrationError):
        return f"Integration failed: {str(e)}"
    elif isinstance(e, EvaluationError):
        return f"Numerical evaluation failed: {str(e)}"
    else:
        return f"An unexpected error occurred: {str(e)}"
