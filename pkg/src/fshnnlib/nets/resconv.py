from dataclasses import dataclass
from typing import Any

import numpy as np

from ..autodiff import DualTape, ParamVector, glorot_uniform
from ..autodiff.rules import conv2d_periodic
from ..core.state import FieldState
from ..errors import ShapeError
from .mlp import ACTIVATIONS


@dataclass(frozen=True)
class ResConvSpec:
    """
    Residual CNN on periodic grids.

    ``lift -> depth x (conv -> activation -> conv + skip) -> project``, every
    convolution ``kernel_size x kernel_size`` with circular wrap, so the output
    has the input's channels and grid shape.

    Parameters
    ----------
    field_channels : int
        Channels of the input and output field.
    channels : int
        Hidden width of the residual blocks.
    depth : int
        Number of residual blocks (may be 0).
    kernel_size : int
        Odd stencil size.
    activation : str
        ``"tanh"`` or ``"softplus"``.
    """

    field_channels: int
    channels: int
    depth: int = 2
    kernel_size: int = 3
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.field_channels < 1 or self.channels < 1:
            raise ValueError(
                f"Channel counts must be positive, got {self.field_channels} "
                f"and {self.channels}."
            )
        if self.depth < 0:
            raise ValueError(f"Depth must be non-negative, got {self.depth}.")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"Kernel size must be odd, got {self.kernel_size}.")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation '{self.activation}'.")

    def _convs(self) -> list[tuple[str, int, int]]:
        convs = [("lift", self.field_channels, self.channels)]
        for i in range(self.depth):
            convs.append((f"block{i}.conv1", self.channels, self.channels))
            convs.append((f"block{i}.conv2", self.channels, self.channels))
        convs.append(("proj", self.channels, self.field_channels))
        return convs

    @property
    def param_count(self) -> int:
        k2 = self.kernel_size**2
        return sum(c_out * c_in * k2 + c_out for _, c_in, c_out in self._convs())

    def init_blocks(
        self, rng: np.random.Generator, prefix: str = ""
    ) -> list[tuple[str, np.ndarray]]:
        k = self.kernel_size
        blocks = []
        for name, c_in, c_out in self._convs():
            kernel = glorot_uniform(rng, c_in * k * k, c_out * k * k, (c_out, c_in, k, k))
            blocks.append((f"{prefix}{name}.K", kernel))
            blocks.append((f"{prefix}{name}.b", np.zeros(c_out)))
        return blocks

    def init_params(self, rng: np.random.Generator) -> ParamVector:
        return ParamVector.from_blocks(self.init_blocks(rng))

    def to_dict(self) -> dict[str, Any]:
        return {
            "field_channels": self.field_channels,
            "channels": self.channels,
            "depth": self.depth,
            "kernel_size": self.kernel_size,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResConvSpec":
        return cls(**data)


def _check_field(spec: ResConvSpec, shape: tuple[int, ...]) -> None:
    if len(shape) not in (3, 4) or shape[-3] != spec.field_channels:
        raise ShapeError(
            f"operator expects ({spec.field_channels}, ny, nx) fields, got {shape}"
        )
    if shape[-1] < 1 or shape[-2] < 1:
        raise ShapeError(f"grid must be non-empty, got {shape}")


def resconv_record(
    tape: DualTape, spec: ResConvSpec, nodes: dict[str, int], g: int, prefix: str = ""
) -> int:
    """Record the operator on ``tape``; ``g`` has shape (C, ny, nx) or (B, C, ny, nx)."""
    shape = tape.value(g).shape
    _check_field(spec, shape)
    x = g if len(shape) == 4 else tape.reshape(g, (1, *shape))
    act = getattr(tape, spec.activation)

    def conv(h: int, name: str) -> int:
        out = tape.conv2d(h, nodes[f"{prefix}{name}.K"])
        c_out = tape.value(nodes[f"{prefix}{name}.b"]).shape[0]
        bias = tape.reshape(nodes[f"{prefix}{name}.b"], (1, c_out, 1, 1))
        return tape.add(out, bias)

    h = conv(x, "lift")
    for i in range(spec.depth):
        inner = act(conv(h, f"block{i}.conv1"))
        h = tape.add(h, conv(inner, f"block{i}.conv2"))
    out = conv(h, "proj")
    return out if len(shape) == 4 else tape.reshape(out, shape)


def resconv_forward(
    spec: ResConvSpec,
    params: ParamVector,
    g: FieldState | np.ndarray,
    prefix: str = "",
) -> FieldState | np.ndarray:
    """
    Apply the operator to a field with plain numpy.

    Returns a ``FieldState`` when given one, otherwise an array shaped like ``g``.
    """
    values = g.values if isinstance(g, FieldState) else np.asarray(g, dtype=np.float64)
    _check_field(spec, values.shape)
    x = values if values.ndim == 4 else values[None]
    act = ACTIVATIONS[spec.activation]

    def conv(h: np.ndarray, name: str) -> np.ndarray:
        bias = params.block(f"{prefix}{name}.b")
        return conv2d_periodic(h, params.block(f"{prefix}{name}.K")) + bias[
            None, :, None, None
        ]

    h = conv(x, "lift")
    for i in range(spec.depth):
        h = h + conv(act(conv(h, f"block{i}.conv1")), f"block{i}.conv2")
    out = conv(h, "proj").reshape(values.shape)
    return g.with_values(out) if isinstance(g, FieldState) else out
