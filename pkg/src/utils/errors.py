"""
Errors - Exception hierarchy shared by the estimators, the simulation lab and the CLI
"""

from typing import Optional, Sequence


class SieveVarError(Exception):
    """Base class for every error raised on purpose by this package"""


class NonFiniteInputError(SieveVarError, ValueError):
    """NaN or Inf values passed to a public operation"""


class SingularSystemError(SieveVarError, ValueError):
    """Rank-deficient linear system"""

    def __init__(self, message: str, n_offending: int = 0,
                 columns: Optional[Sequence] = None):
        super().__init__(message)
        self.n_offending = n_offending
        self.columns = list(columns) if columns is not None else []


class DivergenceError(SieveVarError, RuntimeError):
    """Training loss or a recursion became non-finite / exploded"""

    def __init__(self, message: str, epoch: Optional[int] = None):
        super().__init__(message)
        self.epoch = epoch


class ConvergenceError(SieveVarError, RuntimeError):
    """Numerical optimizer did not converge"""

    def __init__(self, message: str, gradient_norm: float = float("nan")):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class DegenerateDataError(SieveVarError, ValueError):
    """Data without the variation an estimator needs (constant series, zero quantile)"""


class ConfigError(SieveVarError, ValueError):
    """Invalid run configuration, unknown preset or malformed config file"""


class DataFormatError(SieveVarError, ValueError):
    """Malformed input file: unparseable date, non-numeric or non-positive price"""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.row = row
