"""Exception types raised across the package."""


class FroundError(Exception):
    """Base class for all package errors."""


class InvalidConfig(FroundError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class EmptyInput(FroundError, ValueError):
    pass


class InsufficientVehicles(FroundError, ValueError):
    pass


class ParseError(FroundError, ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NonMonotonicTime(FroundError, ValueError):
    def __init__(self, vehicle_id: int, t: int):
        self.vehicle_id = vehicle_id
        self.t = t
        super().__init__(f"vehicle {vehicle_id}: time {t} ms is not after its previous sample")


class ZeroDuration(FroundError, ValueError):
    pass


class InvalidProbability(FroundError, ValueError):
    pass
