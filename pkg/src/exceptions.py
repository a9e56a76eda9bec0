"""
Exception hierarchy for the Kawahara laboratory
"""

from typing import Optional, Sequence


class KawaharaLabError(Exception):
    """Base class for all laboratory errors"""


class ConfigError(KawaharaLabError, ValueError):
    """Experiment configuration violates the schema"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericalError(KawaharaLabError, RuntimeError):
    """A computation failed for numerical reasons"""


class BlowUpError(NumericalError):
    """Solution norm exceeded the blow-up cap"""

    def __init__(self, time: float, norm: float, cap: float):
        self.time = time
        self.norm = norm
        self.cap = cap
        super().__init__(f"blow-up detected at t={time:.6g}: norm {norm:.6g} exceeds cap {cap:.6g}")


class ConvergenceError(NumericalError):
    """An iteration did not reach its tolerance"""


class DivergenceError(NumericalError):
    """Picard residuals grew for consecutive iterations"""

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        self.residuals = list(residuals or [])
        super().__init__(message)


class SnapshotFormatError(KawaharaLabError, ValueError):
    """A KWSP snapshot is malformed, truncated or of an unsupported version"""


class EmptySupportError(ValueError):
    """A generator or discretization produced no lattice points"""
