"""Exception types shared across the toolkit."""


class ShapeError(ValueError):
    """Tensor dimensions do not match a kernel's declared signature."""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent option combination."""


class IntegrityError(RuntimeError):
    """A persisted file failed a checksum, magic, or version check."""


class BatchCompositionError(ValueError):
    """A batch cannot support triplet mining (fewer than two classes, or
    no class with at least two samples)."""


class TrainingDiverged(RuntimeError):
    """Training hit a non-finite loss; carries the last finite state."""

    def __init__(self, message, params=None, history=None):
        super().__init__(message)
        self.params = params
        self.history = history
