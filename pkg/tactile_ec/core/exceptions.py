class TactileECError(Exception):
    """Base class for every error raised by the package"""


class DegenerateRotationError(TactileECError):
    def __init__(self, angle: float):
        self.angle = angle
        super().__init__(f"Rotation angle {angle:.6f} rad is too close to pi for a unique logarithm")


class IndeterminateSystemError(TactileECError):
    def __init__(self, keys, reason: str = "rank-deficient normal equations"):
        self.keys = list(keys)
        shown = ", ".join(f"{name}{index}" for name, index in self.keys[:8])
        more = f" (+{len(self.keys) - 8} more)" if len(self.keys) > 8 else ""
        super().__init__(f"Indeterminate system, {reason}: {shown}{more}")


class UnsolvedGraphError(TactileECError):
    pass


class IllegalTransitionError(TactileECError):
    def __init__(self, source, target):
        self.source = source
        self.target = target
        super().__init__(f"Illegal contact formation transition {source.value} -> {target.value}")


class InvalidConfigError(TactileECError):
    def __init__(self, message: str, path=None):
        self.path = path
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}")


class NonPositiveStiffnessError(TactileECError):
    pass


class InfeasibleGeometryError(TactileECError):
    pass


class ResultsIOError(TactileECError):
    def __init__(self, path, error: Exception):
        self.path = path
        super().__init__(f"Failed writing results to {path}: {str(error)}")
