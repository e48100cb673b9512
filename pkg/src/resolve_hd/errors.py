"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Raised when a primitive receives operands with incompatible shapes."""

    def __init__(self, primitive, shape_a, shape_b=None, detail=""):
        self.primitive = primitive
        self.shape_a = tuple(shape_a)
        self.shape_b = None if shape_b is None else tuple(shape_b)
        msg = f"{primitive}: incompatible shapes {self.shape_a}"
        if self.shape_b is not None:
            msg += f" and {self.shape_b}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class GraphError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


class SequenceLengthError(ValueError):
    pass


class IDXError(ValueError):
    pass


class IDXMagicError(IDXError):
    pass


class IDXTruncatedError(IDXError):
    pass


class IDXDimensionError(IDXError):
    pass


class RunExistsError(FileExistsError):
    pass


class TrainingDivergedError(RuntimeError):
    pass
