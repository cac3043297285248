"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised for unreadable, incomplete or inconsistent configuration.

    Carries the offending section/key so the CLI can name them.
    """

    def __init__(self, message: str, *, section: str | None = None, key: str | None = None):
        self.section = section
        self.key = key
        if section is not None and key is not None:
            message = f"[{section}] {key}: {message}"
        elif section is not None:
            message = f"[{section}]: {message}"
        super().__init__(message)


class NumericalError(RuntimeError):
    """Raised when a solver leaves its validity envelope (blow-up, singular
    matrix, non-finite intermediate values)."""
