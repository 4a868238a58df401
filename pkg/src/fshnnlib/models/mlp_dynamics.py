from dataclasses import dataclass
from typing import Any

import numpy as np

from ..autodiff import DualTape, ParamVector
from ..errors import ShapeError
from ..nets.mlp import MlpSpec, mlp_forward, mlp_record
from .hamiltonian import GroupNodes


@dataclass
class MlpDynamicsModel:
    """
    Black-box one-step predictor ``z_{t+1} = z_t + net(z_t)``.

    The residual form makes a zero network the identity map. One application
    advances the state by ``dt_model``, the spacing of the training frames.
    """

    spec: MlpSpec
    params: ParamVector
    dt_model: float = 1.0

    kind = "mlp"

    def __post_init__(self) -> None:
        if self.spec.input_dim != self.spec.output_dim:
            raise ShapeError(
                f"dynamics network must map a state onto itself, got "
                f"{self.spec.input_dim} -> {self.spec.output_dim}"
            )

    @classmethod
    def create(
        cls,
        state_dim: int,
        hidden: tuple[int, ...],
        rng: np.random.Generator,
        activation: str = "tanh",
        dt_model: float = 1.0,
    ) -> "MlpDynamicsModel":
        spec = MlpSpec(state_dim, hidden, state_dim, activation)
        return cls(spec=spec, params=spec.init_params(rng), dt_model=dt_model)

    @property
    def groups(self) -> dict[str, ParamVector]:
        return {"net": self.params}

    @property
    def param_count(self) -> int:
        return self.spec.param_count

    def record(self, tape: DualTape, nodes: GroupNodes, z: int) -> int:
        return tape.add(z, mlp_record(tape, self.spec, nodes["net"], z))

    def step(self, z: np.ndarray) -> np.ndarray:
        return z + mlp_forward(self.spec, self.params, z)

    def header(self) -> dict[str, Any]:
        return {"kind": self.kind, "spec": self.spec.to_dict(), "dt_model": self.dt_model}
