class BlowUpError(ArithmeticError):
    """Numerical state became non-finite."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NonContractionError(RuntimeError):
    """Picard iteration failed to contract within the iteration budget."""

    def __init__(self, message: str, iterations: int, gap: float):
        super().__init__(message)
        self.iterations = iterations
        self.gap = gap


class InsufficientDataError(ValueError):
    """A diagnostic needs trajectory data that was not recorded."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every violation."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)
