"""Shared exception types."""


class WickfieldError(Exception):
    """Base class for errors raised by this package."""


class NonFiniteFieldError(WickfieldError):
    """A field contains NaN or Inf where only finite values are allowed."""


class BlowupError(WickfieldError):
    """A time stepper produced a non-finite state.

    Carries the step index and simulation time so a failed trajectory can be
    reproduced and inspected. Blow-ups abort; values are never clamped.
    """

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class QuadratureError(WickfieldError):
    """A numerical quadrature failed its internal convergence check."""


class DatasetError(WickfieldError):
    """Malformed dataset directory, tensor file, or manifest."""


class ChecksumError(DatasetError):
    """Stored checksum does not match the file contents."""
