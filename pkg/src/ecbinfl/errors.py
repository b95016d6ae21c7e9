"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A model parameter set violates an admissibility constraint."""


class SchemeError(RuntimeError):
    """A finite-difference grid or stability requirement is violated."""


class PricingError(RuntimeError):
    """A pricing run produced an unusable result (growth bound, non-positive bond)."""


class DataError(ValueError):
    """Malformed or insufficient market data."""


class CalibrationError(RuntimeError):
    """Calibration could not produce a feasible fit."""
