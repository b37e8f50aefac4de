# src/inls/errors.py

from typing import List, Sequence


class InlsError(Exception):
    """Base class for every failure raised by the lab."""


class ParameterError(InlsError, ValueError):
    """Invalid problem parameters or grid; the message names the violated invariant."""

    def __init__(self, message: str, field_name: str | None = None):
        self.field_name = field_name
        super().__init__(message)


class ConfigError(ParameterError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}", field_name)


class RegimeMismatch(InlsError):
    """An operation was called outside the exponent/sign regime it is defined for."""


class BracketNotFound(InlsError):
    pass


class BranchAbsent(InlsError):
    pass


class NonConvergence(InlsError):
    def __init__(self, message: str, residual_history: Sequence[float] = ()):
        self.residual_history: List[float] = [float(x) for x in residual_history]
        tail = ", ".join(f"{x:.3e}" for x in self.residual_history[-5:])
        super().__init__(f"{message} (last residuals: [{tail}])" if tail else message)


class UnboundedBelow(InlsError):
    def __init__(self, message: str, energy_history: Sequence[float] = ()):
        self.energy_history: List[float] = [float(x) for x in energy_history]
        super().__init__(message)


class TrustRegionStarvation(InlsError):
    pass


class TrajectoryBlowup(InlsError):
    def __init__(self, escape_radius: float):
        self.escape_radius = float(escape_radius)
        super().__init__(f"shooting trajectory escaped at r = {escape_radius:.6g}")
