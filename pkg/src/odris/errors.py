"""Exception hierarchy shared by every odris module."""


class OdrisError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(OdrisError, ValueError):
    """An argument lies outside its allowed domain.

    The offending argument name is kept in ``field`` so callers (the CLI
    in particular) can report it without parsing the message.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class MalformedCodeError(OdrisError, ValueError):
    """A bit string cannot be parsed as an element control code."""


class CodebookError(OdrisError, ValueError):
    """A codebook table failed validation."""


class CodebookMismatchError(OdrisError, ValueError):
    """A code cannot be applied to the given codebook."""


class DegenerateDirectionError(OdrisError, ValueError):
    """A direction is grazing the surface plane or has zero length."""


class CapacityError(OdrisError):
    """More users than active surface elements."""


class UnknownUserError(OdrisError, KeyError):
    """A user id is not present in the scene."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown user"


class ConfigError(OdrisError, ValueError):
    """A JSON configuration document is invalid.

    ``path`` is a dotted/indexed location such as ``users[2].position``.
    """

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
