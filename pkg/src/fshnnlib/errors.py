"""Exception hierarchy shared by every fshnnlib subpackage."""

from enum import Enum


class FshnnError(Exception):
    """Base class for all errors raised by fshnnlib."""


class TapeError(FshnnError, ValueError):
    """Misuse of a ``DualTape`` (wrong leaf count, several outputs, ...)."""


class ShapeError(FshnnError, ValueError):
    """Array widths, channels or grid shapes do not match a spec."""


class ConfigError(FshnnError, ValueError):
    """Invalid or unknown configuration entries."""


class NonFiniteError(FshnnError, ValueError):
    """
    A computation produced ``nan`` or ``inf``.

    Parameters
    ----------
    message : str
        Human readable description.
    node : int, optional
        Index of the tape node that produced the non-finite value.
    step : int, optional
        Integrator step or frame index at which the value appeared.
    """

    def __init__(self, message: str, node: int | None = None, step: int | None = None):
        super().__init__(message)
        self.node = node
        self.step = step


class IntegrationError(FshnnError, RuntimeError):
    """A time stepper failed inside a rollout or a dataset generation."""

    def __init__(
        self, message: str, frame: int | None = None, trajectory: int | None = None
    ):
        super().__init__(message)
        self.frame = frame
        self.trajectory = trajectory


class DivergenceError(FshnnError, RuntimeError):
    """A learned model rollout left the finite range."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class TrainingError(FshnnError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, phase: int):
        super().__init__(message)
        self.epoch = epoch
        self.phase = phase


class ContainerErrorCode(Enum):
    BAD_MAGIC = 1
    TRUNCATED_PAYLOAD = 2
    UNKNOWN_DTYPE = 3
    UNKNOWN_KIND = 4
    DIM_MISMATCH = 5
    UNWRITABLE = 6


class ContainerError(FshnnError, ValueError):
    """Reading or writing an ``FSH1`` container failed."""

    def __init__(self, message: str, code: ContainerErrorCode):
        super().__init__(f"{message} [{code.name.lower()}]")
        self.code = code
