"""Exception classes. Each family carries the CLI exit code it maps to."""


class RomkitError(Exception):
    exit_code = 1


class UsageError(RomkitError, ValueError):
    """Invalid argument or parameter value (window size, prominence, ...)."""

    exit_code = 2


class ParseError(RomkitError):
    """Malformed input file. ``line`` is 1-based."""

    exit_code = 3
    kind = "parse"

    def __init__(self, message, line):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EmptyFileError(ParseError):
    kind = "empty-file"


class MalformedHeaderError(ParseError):
    kind = "malformed-header"


class ColumnCountError(ParseError):
    kind = "wrong-column-count"


class NonNumericCellError(ParseError):
    kind = "non-numeric-cell"


class FrameIndexError(ParseError):
    kind = "bad-frame-index"


class ValidationError(RomkitError):
    """Well-formed input that breaks a semantic rule."""

    exit_code = 4


class ManifestError(ValidationError):
    pass


class InvalidLandmarkError(ValidationError):
    pass


class CycleTooShortError(ValidationError):
    pass


class ProfileMismatchError(ValidationError):
    pass


class DegenerateGeometryError(RomkitError, ArithmeticError):
    exit_code = 5


class DegenerateVectorError(DegenerateGeometryError):
    pass


class DegenerateBoneError(DegenerateGeometryError):
    def __init__(self, message, bone):
        self.bone = bone
        super().__init__(message)


class DegeneratePlaneError(DegenerateGeometryError):
    pass


class DegenerateProjectionError(DegenerateGeometryError):
    pass
