"""Exception types shared across the workbench."""


class ParameterError(ValueError):
    """An argument is outside its documented range or shape."""


class StateError(RuntimeError):
    """An operation was called before its prerequisites were established."""


class SignatureMismatchError(ValueError):
    """Two feature distributions were built with incompatible bin geometry."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EmptyBatchError(RuntimeError):
    """A retraining batch ended up with no frames on either side."""


class StorageError(OSError):
    """Reading or writing an artifact failed; message names the path."""


class OrderingError(RuntimeError):
    """A label submission referenced a frame the session has not served yet."""
