from dataclasses import dataclass
from typing import Any

import numpy as np

from ..autodiff import DualTape, ParamVector
from ..errors import ShapeError
from ..nets.mlp import MlpSpec, mlp_forward, mlp_record

LINEAR = "linear."
RESIDUAL = "residual."


@dataclass(frozen=True)
class CombinerSpec:
    """
    Map from ``K`` single-scale energies to one energy.

    The output is ``w . m + b + residual(m)``: a linear path initialized to the
    plain sum (``w = 1``, ``b = 0``) plus an MLP whose output layer starts at
    zero, so a fresh combiner is exactly ``sum_k m_k``. ``hidden = ()`` drops
    the residual MLP.
    """

    n_inputs: int
    hidden: tuple[int, ...] = (16,)
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.n_inputs < 1:
            raise ValueError(f"Combiner needs at least one input, got {self.n_inputs}.")
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))

    @property
    def residual(self) -> MlpSpec | None:
        if not self.hidden:
            return None
        return MlpSpec(self.n_inputs, self.hidden, 1, self.activation)

    @property
    def param_count(self) -> int:
        residual = self.residual
        return self.n_inputs + 1 + (0 if residual is None else residual.param_count)

    def init_params(self, rng: np.random.Generator) -> ParamVector:
        blocks: list[tuple[str, np.ndarray]] = [
            (f"{LINEAR}W0", np.ones((1, self.n_inputs))),
            (f"{LINEAR}b0", np.zeros(1)),
        ]
        residual = self.residual
        if residual is not None:
            res_blocks = residual.init_blocks(rng, RESIDUAL)
            last = residual.n_layers - 1
            blocks += [
                (name, np.zeros_like(array))
                if name in (f"{RESIDUAL}W{last}", f"{RESIDUAL}b{last}")
                else (name, array)
                for name, array in res_blocks
            ]
        return ParamVector.from_blocks(blocks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_inputs": self.n_inputs,
            "hidden": list(self.hidden),
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CombinerSpec":
        return cls(
            n_inputs=int(data["n_inputs"]),
            hidden=tuple(data.get("hidden", ())),
            activation=data.get("activation", "tanh"),
        )


def _check_inputs(spec: CombinerSpec, width: int) -> None:
    if width != spec.n_inputs:
        raise ShapeError(f"Combiner expects {spec.n_inputs} energies, got {width}")


def combiner_record(
    tape: DualTape, spec: CombinerSpec, nodes: dict[str, int], m: int
) -> int:
    """Record the combiner on ``m`` of shape ``(..., K)``; returns shape ``(...)``."""
    _check_inputs(spec, tape.value(m).shape[-1])
    out = tape.affine(m, nodes[f"{LINEAR}W0"], nodes[f"{LINEAR}b0"])
    residual = spec.residual
    if residual is not None:
        out = tape.add(out, mlp_record(tape, residual, nodes, m, RESIDUAL))
    return tape.sum(out, axis=-1)


def combiner_forward(spec: CombinerSpec, params: ParamVector, m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    _check_inputs(spec, m.shape[-1])
    out = m @ params.block(f"{LINEAR}W0").T + params.block(f"{LINEAR}b0")
    residual = spec.residual
    if residual is not None:
        out = out + mlp_forward(residual, params, m, RESIDUAL)
    return np.asarray(out[..., 0])
