class TokennetError(Exception):
    """Base class for all errors raised by tokennet."""


class DataError(TokennetError):
    """Input data cannot be turned into a usable analysis."""


class ParseError(DataError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class GraphError(DataError):
    """A graph operation was called outside its domain (empty graph, too few nodes...)."""
