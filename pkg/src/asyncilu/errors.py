"""Exception types raised across the library."""


class AsyncIluError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(AsyncIluError):
    """Operands have incompatible shapes or block sizes."""


class MissingDiagonalBlock(AsyncIluError):
    """A block row has no diagonal block in its sparsity pattern."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"block row {row} has no diagonal block")


class SingularBlock(AsyncIluError):
    """A dense block could not be inverted (pivot below threshold)."""


class SingularDiagonal(AsyncIluError):
    """A diagonal entry or block became singular during a strict factorization."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"singular diagonal in block row {row}")


class ZeroDiagonal(AsyncIluError):
    """A scalar diagonal entry is zero where symmetric scaling needs it."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"zero scalar diagonal entry at index {index}")


class InvalidSchedule(AsyncIluError):
    """A replay schedule violates the shift bounds or coverage conditions."""


class InvalidSpec(AsyncIluError):
    """A test-problem specification is inconsistent."""


class ParseError(AsyncIluError):
    """A file could not be parsed."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NonTilingPattern(AsyncIluError):
    """A scalar sparse matrix cannot be grouped into full square blocks."""
