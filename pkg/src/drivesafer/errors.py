"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input that could not be parsed.

    ``offset`` is the byte offset into the input where parsing failed, or
    ``line`` the 1-based line number for line-oriented inputs.
    """

    def __init__(self, message, offset=None, line=None):
        detail = message
        if offset is not None:
            detail = f"{message} (byte offset {offset})"
        elif line is not None:
            detail = f"{message} (line {line})"
        super().__init__(detail)
        self.offset = offset
        self.line = line


class ValidationError(ValueError):
    """Structurally valid input that violates a domain invariant.

    ``field`` names the offending field when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ProtocolError(ValueError):
    """Binary exchange payload violates the wire protocol."""
