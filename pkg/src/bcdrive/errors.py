"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor or image shapes do not satisfy an operation's contract."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class FormatError(ValueError):
    """A binary file does not conform to its on-disk format."""


class ParseError(FormatError):
    """A text file failed to parse. Carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        detail = message
        if line is not None:
            detail = f"{detail} (line {line})"
        if path is not None:
            detail = f"{path}: {detail}"
        super().__init__(detail)
        self.path = path
        self.line = line
