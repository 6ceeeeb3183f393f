from __future__ import annotations

from typing import Any


class G2LabError(Exception):
    pass


class NonOrthonormalFrameError(G2LabError):
    pass


class InvalidFrameError(G2LabError):
    def __init__(self, message: str, residuals: dict[str, float] | None = None) -> None:
        super().__init__(message)
        self.residuals = residuals or {}


class NonCoassociativePlaneError(G2LabError):
    pass


class SingularNormalError(G2LabError):
    pass


class InvalidGridError(G2LabError):
    pass


class GridMismatchError(G2LabError):
    pass


class BoundaryClassError(G2LabError):
    pass


class SingularOperatorError(G2LabError):
    def __init__(self, message: str, kernel_dimension: int) -> None:
        super().__init__(message)
        self.kernel_dimension = kernel_dimension


class ReflectionRangeError(G2LabError):
    pass


class EigenConvergenceError(G2LabError):
    def __init__(self, message: str, trace: list[float]) -> None:
        super().__init__(message)
        self.trace = trace


class ScalingFitError(G2LabError):
    pass


class UnderresolvedGridError(G2LabError):
    pass


class InadmissibleConfigError(G2LabError):
    def __init__(self, message: str, violated: str, value: float) -> None:
        super().__init__(message)
        self.violated = violated
        self.value = value


class NewtonDivergenceError(G2LabError):
    def __init__(self, message: str, trace: list[Any]) -> None:
        super().__init__(message)
        self.trace = trace


class SnapshotFormatError(G2LabError):
    pass
