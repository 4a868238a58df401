from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass
class PhaseState:
    """
    Canonical ODE state ``z = (q, p)``.

    Parameters
    ----------
    values : numpy.ndarray
        Flat array of length ``2 * dof``, positions first.
    dof : int
        Number of degrees of freedom ``d``.
    """

    values: np.ndarray
    dof: int

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != 2 * self.dof:
            raise ShapeError(
                f"phase state of {self.dof} DOF needs {2 * self.dof} values, "
                f"got {self.values.size}"
            )

    @classmethod
    def from_qp(cls, q: np.ndarray, p: np.ndarray) -> "PhaseState":
        q = np.atleast_1d(np.asarray(q, dtype=np.float64))
        p = np.atleast_1d(np.asarray(p, dtype=np.float64))
        if q.shape != p.shape:
            raise ShapeError(f"q has shape {q.shape} but p has shape {p.shape}")
        return cls(values=np.concatenate([q, p]), dof=q.size)

    @property
    def q(self) -> np.ndarray:
        return self.values[: self.dof]

    @property
    def p(self) -> np.ndarray:
        return self.values[self.dof :]


@dataclass
class FieldState:
    """
    Multichannel field on a uniform periodic 2D grid.

    Parameters
    ----------
    values : numpy.ndarray
        Array of shape ``(channels, ny, nx)``.
    dx, dy : float
        Cell spacing along x (last axis) and y.
    channels : tuple of str
        Channel names, e.g. ``("h", "mx", "my")``.
    """

    values: np.ndarray
    dx: float
    dy: float
    channels: tuple[str, ...]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ShapeError(
                f"field values must be (channels, ny, nx), got {self.values.shape}"
            )
        if len(self.channels) != self.values.shape[0]:
            raise ShapeError(
                f"{len(self.channels)} channel names for {self.values.shape[0]} channels"
            )
        self.channels = tuple(self.channels)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (int(self.values.shape[1]), int(self.values.shape[2]))

    @property
    def cell_area(self) -> float:
        return float(self.dx * self.dy)

    def channel(self, name: str) -> np.ndarray:
        return self.values[self.channels.index(name)]

    def with_values(self, values: np.ndarray) -> "FieldState":
        return FieldState(values=values, dx=self.dx, dy=self.dy, channels=self.channels)
