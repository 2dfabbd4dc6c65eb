"""Exception types shared across the package."""


class SceneFormatError(ValueError):
    """A scene file does not match the expected layout (bad header, wrong shape)."""


class SceneValidationError(ValueError):
    """A scene file parsed but carries invalid values (non-finite, zero quaternion)."""


class CapacityError(RuntimeError):
    """An index or key would overflow its fixed-width encoding."""


class InternalError(RuntimeError):
    """An internal pipeline invariant was violated; indicates a bug, not bad input."""
