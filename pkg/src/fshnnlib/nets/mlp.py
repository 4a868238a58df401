from dataclasses import dataclass
from typing import Any

import numpy as np

from ..autodiff import DualTape, ParamVector, glorot_uniform
from ..errors import ShapeError

ACTIVATIONS = {
    "tanh": np.tanh,
    "softplus": lambda x: np.logaddexp(0.0, x),
}


@dataclass(frozen=True)
class MlpSpec:
    """
    Fully connected network ``input -> hidden... -> output``.

    Parameters
    ----------
    input_dim : int
        Width of the input layer.
    hidden : tuple of int
        Hidden layer widths; at least one layer.
    output_dim : int
        Width of the output layer.
    activation : str
        ``"tanh"`` or ``"softplus"``; applied after every hidden layer, never
        after the output layer.
    """

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if not self.hidden:
            raise ValueError("An MLP needs at least one hidden layer.")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"All layer widths must be positive, got {self.widths}.")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"Unknown activation '{self.activation}', expected one of "
                f"{sorted(ACTIVATIONS)}."
            )

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def param_count(self) -> int:
        w = self.widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(self.n_layers))

    def block_names(self, prefix: str = "") -> list[str]:
        names = []
        for i in range(self.n_layers):
            names += [f"{prefix}W{i}", f"{prefix}b{i}"]
        return names

    def init_blocks(
        self, rng: np.random.Generator, prefix: str = ""
    ) -> list[tuple[str, np.ndarray]]:
        """Glorot-uniform weights of shape (out, in) and zero biases."""
        blocks = []
        for i in range(self.n_layers):
            fan_in, fan_out = self.widths[i], self.widths[i + 1]
            blocks.append(
                (f"{prefix}W{i}", glorot_uniform(rng, fan_in, fan_out, (fan_out, fan_in)))
            )
            blocks.append((f"{prefix}b{i}", np.zeros(fan_out)))
        return blocks

    def init_params(self, rng: np.random.Generator) -> ParamVector:
        return ParamVector.from_blocks(self.init_blocks(rng))

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "output_dim": self.output_dim,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MlpSpec":
        return cls(
            input_dim=int(data["input_dim"]),
            hidden=tuple(data["hidden"]),
            output_dim=int(data["output_dim"]),
            activation=data.get("activation", "tanh"),
        )


def _check_input(spec: MlpSpec, width: int) -> None:
    if width != spec.input_dim:
        raise ShapeError(f"MLP expects input width {spec.input_dim}, got {width}")


def mlp_record(
    tape: DualTape, spec: MlpSpec, nodes: dict[str, int], x: int, prefix: str = ""
) -> int:
    """
    Record the network on ``tape`` and return the output node.

    ``nodes`` maps block names (``{prefix}W0``, ``{prefix}b0``, ...) to tape
    leaves, as returned by ``ParamVector.bind``. ``x`` may carry leading batch
    axes.
    """
    _check_input(spec, tape.value(x).shape[-1])
    h = x
    for i in range(spec.n_layers):
        h = tape.affine(h, nodes[f"{prefix}W{i}"], nodes[f"{prefix}b{i}"])
        if i < spec.n_layers - 1:
            h = getattr(tape, spec.activation)(h)
    return h


def mlp_forward(
    spec: MlpSpec, params: ParamVector, x: np.ndarray, prefix: str = ""
) -> np.ndarray:
    """
    Plain numpy evaluation of the network.

    Parameters
    ----------
    spec : MlpSpec
        Network architecture.
    params : ParamVector
        Parameters with blocks ``{prefix}W{i}`` of shape (out, in) and
        ``{prefix}b{i}``.
    x : numpy.ndarray
        Input of shape ``(input_dim,)`` or ``(batch, input_dim)``.

    Returns
    -------
    numpy.ndarray
        Output of shape ``(output_dim,)`` or ``(batch, output_dim)``.

    Raises
    ------
    ShapeError
        If the last axis of ``x`` is not ``input_dim`` wide.
    """
    h = np.asarray(x, dtype=np.float64)
    _check_input(spec, h.shape[-1])
    act = ACTIVATIONS[spec.activation]
    for i in range(spec.n_layers):
        h = h @ params.block(f"{prefix}W{i}").T + params.block(f"{prefix}b{i}")
        if i < spec.n_layers - 1:
            h = act(h)
    return h
