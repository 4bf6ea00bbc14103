"""Exception hierarchy shared by the library and the CLI."""


class KaeError(Exception):
    """Base class. ``code`` is the short tag printed by the CLI."""

    code = "error"


class ShapeError(KaeError, ValueError):
    code = "shape"


class SpecError(KaeError, ValueError):
    code = "spec"


class ValidationError(KaeError, ValueError):
    code = "validation"


class ConsistencyError(KaeError, RuntimeError):
    """Cached representations are stale with respect to the coefficients."""

    code = "stale"


class SingularSystemError(KaeError, RuntimeError):
    code = "singular"


class DivergenceError(KaeError, RuntimeError):
    code = "divergence"

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class RankError(KaeError, ValueError):
    code = "rank"


class ParseError(KaeError, ValueError):
    code = "parse"

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.line = line
        self.column = column


class ModelFormatError(KaeError, ValueError):
    """Unknown version, wrong mode or corrupted model container."""

    code = "model"
