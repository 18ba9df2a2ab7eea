class MeshEngineError(Exception):
    """Base class for every error raised by the mesh engine."""


class NonFiniteFieldError(MeshEngineError, ValueError):
    def __init__(self, message: str = "non-finite field") -> None:
        super().__init__(message)


class GridMismatchError(MeshEngineError, ValueError):
    pass


class FieldFormatError(MeshEngineError, ValueError):
    pass


class BadMagicError(FieldFormatError):
    def __init__(self, magic: bytes) -> None:
        super().__init__(f"bad magic: {magic!r}")
        self.magic = magic


class DimensionMismatchError(FieldFormatError):
    pass


class TruncatedPayloadError(FieldFormatError):
    def __init__(self, expected: int, actual: int) -> None:
        super().__init__(f"truncated payload: expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class BoundaryError(MeshEngineError, ValueError):
    pass


class NonPositiveMonitorError(MeshEngineError, ValueError):
    def __init__(self, message: str = "nonpositive monitor") -> None:
        super().__init__(message)


class MonitorFormatError(MeshEngineError, ValueError):
    pass


class FoldedTargetError(MeshEngineError, ValueError):
    def __init__(self, min_jacobian: float) -> None:
        super().__init__(f"folded target: min Jacobian determinant {min_jacobian:.6g}")
        self.min_jacobian = min_jacobian


class SolverError(MeshEngineError, RuntimeError):
    pass


class SolverDivergedError(SolverError):
    def __init__(self, last_residual: float, iterations: int) -> None:
        super().__init__(
            f"SOR did not converge within {iterations} iterations (relative residual {last_residual:.3e})"
        )
        self.last_residual = last_residual
        self.iterations = iterations
