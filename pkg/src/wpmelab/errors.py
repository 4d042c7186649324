"""Exception hierarchy shared by all modules."""


class WpmeError(Exception):
    """Base class for package errors."""


class DomainError(WpmeError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class BlowupDomainError(DomainError):
    """Evaluation requested at or past a blow-up time."""


class NumericError(WpmeError, ArithmeticError):
    """A numerical procedure failed to converge or overflowed."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class ConfigError(WpmeError, ValueError):
    """Malformed or inconsistent experiment configuration."""
