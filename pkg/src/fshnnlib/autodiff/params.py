from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .tape import DualTape

LayoutEntry = tuple[str, int, tuple[int, ...]]


@dataclass
class ParamVector:
    """
    Flat vector of trainable reals with a named block layout.

    Parameters
    ----------
    values : numpy.ndarray
        1D float64 array holding every block back to back.
    layout : list of (name, offset, shape)
        Block table in storage order.

    Notes
    -----
    The layout is rebuilt from ``(name, shape)`` pairs in order, so a vector
    written with ``to_records`` and read back with ``from_records`` has an
    identical layout.
    """

    values: np.ndarray
    layout: list[LayoutEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        expected = sum(int(np.prod(shape)) for _, _, shape in self.layout)
        if expected != self.values.size:
            raise ShapeError(
                f"layout describes {expected} values, vector holds {self.values.size}"
            )
        offset = 0
        for name, start, shape in self.layout:
            if start != offset:
                raise ShapeError(f"block '{name}' starts at {start}, expected {offset}")
            offset += int(np.prod(shape))

    @classmethod
    def from_blocks(cls, blocks: Sequence[tuple[str, np.ndarray]]) -> "ParamVector":
        layout: list[LayoutEntry] = []
        offset = 0
        for name, array in blocks:
            shape = tuple(int(s) for s in np.shape(array))
            layout.append((name, offset, shape))
            offset += int(np.prod(shape))
        if blocks:
            values = np.concatenate(
                [np.asarray(a, dtype=np.float64).reshape(-1) for _, a in blocks]
            )
        else:
            values = np.zeros(0)
        return cls(values=values, layout=layout)

    def __len__(self) -> int:
        return int(self.values.size)

    def __repr__(self) -> str:
        return f"ParamVector(size={len(self)}, blocks={self.names})"

    @property
    def names(self) -> list[str]:
        return [name for name, _, _ in self.layout]

    def block(self, name: str) -> np.ndarray:
        """Return a reshaped view of one block; writes go through to ``values``."""
        for block_name, offset, shape in self.layout:
            if block_name == name:
                size = int(np.prod(shape))
                return self.values[offset : offset + size].reshape(shape)
        raise KeyError(f"no parameter block named '{name}'")

    def copy(self) -> "ParamVector":
        return ParamVector(values=self.values.copy(), layout=list(self.layout))

    def bind(self, tape: DualTape, trainable: bool = True) -> dict[str, int]:
        """Record every block as a leaf on ``tape``; returns block name -> node."""
        return {name: tape.leaf(self.block(name), trainable) for name in self.names}

    def flatten(self, blocks: dict[str, np.ndarray]) -> np.ndarray:
        """Pack per-block arrays (e.g. gradients) into the layout's flat order."""
        out = np.zeros_like(self.values)
        for name, offset, shape in self.layout:
            size = int(np.prod(shape))
            out[offset : offset + size] = np.asarray(blocks[name]).reshape(-1)
        return out

    def to_records(self, prefix: str) -> list[tuple[str, np.ndarray]]:
        """One ``(prefix/name, array)`` pair per block, in layout order."""
        return [(f"{prefix}/{name}", self.block(name).copy()) for name in self.names]

    @classmethod
    def from_records(
        cls, records: Sequence[tuple[str, np.ndarray]], prefix: str
    ) -> "ParamVector":
        marker = f"{prefix}/"
        blocks = [
            (name[len(marker) :], array)
            for name, array in records
            if name.startswith(marker)
        ]
        return cls.from_blocks(blocks)


def glorot_uniform(
    rng: np.random.Generator, fan_in: int, fan_out: int, shape: tuple[int, ...]
) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
