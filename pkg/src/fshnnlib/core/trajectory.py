import logging
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import ShapeError
from ..io.container import Record, RecordKind, read_container, records_by_name
from ..io.container import write_container
from ..io.reports import read_json, write_json
from ..utils.paths import sidecar_path

logger = logging.getLogger(__name__)


@dataclass
class TrajectoryDataset:
    """
    Container for a set of equally sampled trajectories.

    Attributes
    ----------
    states : numpy.ndarray
        Array of shape ``(n_traj, n_frames, *state_shape)``. ODE states are
        flat ``(q, p)`` vectors, PDE states are ``(channels, ny, nx)`` fields.
    dt : float
        Time between consecutive saved frames.
    energy : numpy.ndarray or None
        Per-frame energy of shape ``(n_traj, n_frames)``.
    system : str
        Name of the generating benchmark system.
    channels : tuple of str
        Field channel names (PDE datasets only).
    wrapped_dims : tuple of int
        State components stored modulo 2*pi in (-pi, pi].
    spacing : tuple of float
        ``(dx, dy)`` grid spacing (PDE datasets only).
    metadata : dict
        Free-form provenance (config, seed, ...), written to the JSON sidecar.
    """

    states: np.ndarray
    dt: float
    energy: np.ndarray | None = None
    system: str = ""
    channels: tuple[str, ...] = ()
    wrapped_dims: tuple[int, ...] = ()
    spacing: tuple[float, ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim < 3:
            raise ShapeError(
                f"states must be (n_traj, n_frames, ...), got {self.states.shape}"
            )
        if self.energy is not None:
            self.energy = np.asarray(self.energy, dtype=np.float64)
            if self.energy.shape != self.states.shape[:2]:
                raise ShapeError(
                    f"energy shape {self.energy.shape} does not match "
                    f"{self.states.shape[:2]}"
                )
        self.channels = tuple(self.channels)
        self.wrapped_dims = tuple(int(d) for d in self.wrapped_dims)
        self.spacing = tuple(float(s) for s in self.spacing)

    def __repr__(self) -> str:
        return (
            f"TrajectoryDataset(system={self.system}, n_traj={self.n_traj}, "
            f"n_frames={self.n_frames}, state_shape={self.state_shape}, dt={self.dt})"
        )

    def __len__(self) -> int:
        return self.n_traj

    @property
    def n_traj(self) -> int:
        return int(self.states.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.states.shape[1])

    @property
    def state_shape(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.states.shape[2:])

    @property
    def state_dim(self) -> int:
        return int(np.prod(self.state_shape))

    @property
    def is_field(self) -> bool:
        return len(self.state_shape) == 3

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.dt

    def replace(self, **changes: Any) -> "TrajectoryDataset":
        fields = {
            "states": self.states,
            "dt": self.dt,
            "energy": self.energy,
            "system": self.system,
            "channels": self.channels,
            "wrapped_dims": self.wrapped_dims,
            "spacing": self.spacing,
            "metadata": dict(self.metadata),
        }
        fields.update(changes)
        return TrajectoryDataset(**fields)

    def header(self) -> dict[str, Any]:
        return {
            "kind": "dataset",
            "dt": self.dt,
            "system": self.system,
            "channels": list(self.channels),
            "wrapped_dims": list(self.wrapped_dims),
            "spacing": list(self.spacing),
            "metadata": self.metadata,
        }

    def save(self, path: str) -> None:
        """Write the arrays to an FSH1 container and the header to its JSON sidecar."""
        records = [Record(RecordKind.DATASET, "states", self.states)]
        if self.energy is not None:
            records.append(Record(RecordKind.DATASET, "energy", self.energy))
        write_container(path, records)
        write_json(sidecar_path(path), self.header())
        logger.info("Dataset saved to %s", path)

    @classmethod
    def load(cls, path: str) -> "TrajectoryDataset":
        if not os.path.exists(path):
            raise FileNotFoundError(f"Dataset file '{path}' not found.")
        records = records_by_name(read_container(path))
        header = read_json(sidecar_path(path)) if os.path.exists(sidecar_path(path)) else {}
        energy = records["energy"].array if "energy" in records else None
        return cls(
            states=records["states"].array,
            dt=float(header.get("dt", 1.0)),
            energy=energy,
            system=header.get("system", ""),
            channels=tuple(header.get("channels", ())),
            wrapped_dims=tuple(header.get("wrapped_dims", ())),
            spacing=tuple(header.get("spacing", ())),
            metadata=header.get("metadata", {}),
        )
