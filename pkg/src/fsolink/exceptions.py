from sklearn.exceptions import NotFittedError


class ParameterDomainError(ValueError):
    """A numeric argument lies outside the domain the operation is defined on."""


class DegenerateChannelError(ValueError):
    pass


class DegenerateConstellationError(ValueError):
    """All constellation points collapsed onto the origin."""


class ShapeError(ValueError):
    pass


class UsageError(RuntimeError):
    """An operation was invoked on an object in the wrong state."""


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


__all__ = [
    "ConfigError",
    "DegenerateChannelError",
    "DegenerateConstellationError",
    "NotFittedError",
    "ParameterDomainError",
    "ShapeError",
    "UsageError",
]
