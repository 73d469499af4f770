"""Exception types raised across the package."""


class TwoManifoldError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TwoManifoldError, ValueError):
    """Input data is malformed (non-finite entries, wrong shape, mismatched n)."""


class ParameterError(TwoManifoldError, ValueError):
    """A numeric parameter is outside its admissible range."""


class SingularMatrixError(TwoManifoldError, ArithmeticError):
    """A matrix that must be inverted is singular."""


class DegenerateDataError(TwoManifoldError, ValueError):
    """Data admit no meaningful answer (e.g. all points identical)."""


class NumericalConsistencyError(TwoManifoldError, ArithmeticError):
    """A quantity that must be real / non-negative came out otherwise."""


class ConfigError(TwoManifoldError, ValueError):
    """An experiment or CLI configuration failed validation."""


class ExperimentError(TwoManifoldError, RuntimeError):
    """A method failed inside an experiment run (message names seed and method)."""
