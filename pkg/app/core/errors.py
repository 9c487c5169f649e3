from typing import Optional


class StarkSpectraError(RuntimeError):
    pass


class DomainError(StarkSpectraError, ValueError):
    def __init__(self, operation: str, message: str):
        super().__init__(f"{operation}: {message}")
        self.operation = operation


class PoleProximity(StarkSpectraError):
    def __init__(self, x: float, pole: int, guard: float):
        super().__init__(f"spectral parameter x={x!r} within {guard:g} of pole {pole}")
        self.x = x
        self.pole = pole
        self.guard = guard


class NonConvergence(StarkSpectraError):
    def __init__(self, message: str, iterations: Optional[int] = None, residual: Optional[float] = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class BracketFailure(StarkSpectraError):
    def __init__(self, n: int, message: str):
        super().__init__(f"n={n}: {message}")
        self.n = n


class BoundaryTooTight(StarkSpectraError):
    def __init__(self, q_half_width: float, level: float, boundary_value: float):
        super().__init__(
            f"box half-width {q_half_width:g} too small: level {level:.6g} "
            f"reaches boundary potential {boundary_value:.6g}"
        )
        self.q_half_width = q_half_width
        self.level = level
        self.boundary_value = boundary_value


class ConfigError(StarkSpectraError):
    pass


class OutputError(StarkSpectraError):
    pass


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
