"""
Hamiltonian models of canonical ODE states and the helpers shared by all models.

Every model exposes its trainable state as named parameter groups
(``model.groups``) and records its energy on a ``DualTape`` through
``model.record(tape, nodes, z, component)``, where ``nodes`` maps each group
to the block leaves returned by ``ParamVector.bind``. ``component=None``
records the full (combined) energy, an integer records one single-scale
component alone.
"""

from collections.abc import Collection
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np

from ..autodiff import DualTape, ParamVector, grad
from ..core.state import PhaseState
from ..errors import ShapeError
from ..nets.mlp import MlpSpec, mlp_record
from ..systems.registry import BenchmarkSystem
from .combiner import CombinerSpec, combiner_forward, combiner_record

GroupNodes = dict[str, dict[str, int]]


class HamiltonianModel(Protocol):
    @property
    def groups(self) -> dict[str, ParamVector]: ...

    def record(
        self, tape: DualTape, nodes: GroupNodes, z: int, component: int | None = None
    ) -> int: ...


def bind_groups(
    tape: DualTape, groups: dict[str, ParamVector], trainable: Collection[str] = ()
) -> tuple[GroupNodes, dict[str, list[int]]]:
    """
    Record every parameter group as tape leaves.

    Returns the block nodes per group and, per group, the leaf indices in
    layout order (the order ``ParamVector.flatten`` expects).
    """
    unknown = set(trainable) - set(groups)
    if unknown:
        raise KeyError(f"unknown parameter groups {sorted(unknown)}")
    nodes: GroupNodes = {}
    leaves: dict[str, list[int]] = {}
    for name, params in groups.items():
        nodes[name] = params.bind(tape, trainable=name in trainable)
        leaves[name] = [nodes[name][block] for block in params.names]
    return nodes, leaves


def group_leaves(leaves: dict[str, list[int]], names: Collection[str]) -> list[int]:
    """Leaf indices of the named groups, concatenated in ``names`` order."""
    return [i for name in names for i in leaves[name]]


def split_grads(
    groups: dict[str, ParamVector],
    names: Collection[str],
    values: list[np.ndarray],
) -> dict[str, np.ndarray]:
    """Pack per-leaf gradients ordered like ``group_leaves`` into one flat vector per group."""
    out = {}
    position = 0
    for name in names:
        params = groups[name]
        count = len(params.names)
        out[name] = params.flatten(dict(zip(params.names, values[position : position + count])))
        position += count
    return out


def _as_array(z: PhaseState | np.ndarray) -> np.ndarray:
    if isinstance(z, PhaseState):
        return z.values
    return np.asarray(z, dtype=np.float64)


def energy_and_gradient(
    model: HamiltonianModel,
    z: np.ndarray,
    component: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Energies ``H(z)`` and gradients ``dH/dz`` for one state or a batch.

    Samples in a batch do not interact, so the gradient of the batch sum is
    the stack of per-sample gradients.
    """
    tape = DualTape()
    z_node = tape.leaf(z)
    nodes, _ = bind_groups(tape, model.groups)
    energies = model.record(tape, nodes, z_node, component)
    total = tape.sum(energies) if tape.value(energies).ndim else energies
    tape.set_output(total)
    (gradient,) = grad(tape, [z_node])
    return tape.value(energies), gradient


def apply_canonical_j(gradient: np.ndarray) -> np.ndarray:
    """``J grad = (dH/dp, -dH/dq)`` along the last axis, without forming ``J``."""
    d = gradient.shape[-1] // 2
    return np.concatenate([gradient[..., d:], -gradient[..., :d]], axis=-1)


@dataclass
class HnnModel:
    """
    MLP Hamiltonian ``H_theta: R^{2d} -> R`` of canonical ``(q, p)`` states.

    Parameters
    ----------
    spec : MlpSpec
        Network with ``input_dim = 2 * dof`` and ``output_dim = 1``.
    params : ParamVector
        Network parameters.
    dof : int
        Degrees of freedom ``d``.
    """

    spec: MlpSpec
    params: ParamVector
    dof: int

    kind = "hnn"

    def __post_init__(self) -> None:
        if self.spec.input_dim != 2 * self.dof or self.spec.output_dim != 1:
            raise ShapeError(
                f"HNN of {self.dof} DOF needs a {2 * self.dof} -> 1 network, got "
                f"{self.spec.input_dim} -> {self.spec.output_dim}"
            )

    @classmethod
    def create(
        cls,
        dof: int,
        hidden: tuple[int, ...],
        rng: np.random.Generator,
        activation: str = "tanh",
    ) -> "HnnModel":
        spec = MlpSpec(2 * dof, hidden, 1, activation)
        return cls(spec=spec, params=spec.init_params(rng), dof=dof)

    @property
    def groups(self) -> dict[str, ParamVector]:
        return {"H": self.params}

    @property
    def param_count(self) -> int:
        return self.spec.param_count

    def record_with(self, tape: DualTape, block_nodes: dict[str, int], z: int) -> int:
        return tape.sum(mlp_record(tape, self.spec, block_nodes, z), axis=-1)

    def record(
        self, tape: DualTape, nodes: GroupNodes, z: int, component: int | None = None
    ) -> int:
        return self.record_with(tape, nodes["H"], z)

    def header(self) -> dict[str, Any]:
        return {"kind": self.kind, "spec": self.spec.to_dict(), "dof": self.dof}


@dataclass
class AnalyticHamiltonian:
    """Exact Hamiltonian of a benchmark system, recorded on the tape without parameters."""

    system: BenchmarkSystem
    kind = "analytic"

    @property
    def dof(self) -> int:
        return self.system.dof

    @property
    def groups(self) -> dict[str, ParamVector]:
        return {}

    def record(
        self, tape: DualTape, nodes: GroupNodes, z: int, component: int | None = None
    ) -> int:
        return self.system.record_hamiltonian(tape, z)


@dataclass
class FsHnnOdeModel:
    """
    Frequency-separable HNN: ``K`` single-scale components and a combiner.

    Component ``k`` is trained on data subsampled at ``intervals[k]``; every
    component evaluates the same full-resolution state.
    """

    components: list[HnnModel]
    intervals: list[int]
    combiner_spec: CombinerSpec
    combiner_params: ParamVector
    kind = "fs_hnn_ode"
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("FS-HNN needs at least one component.")
        if len(self.intervals) != len(self.components):
            raise ValueError(
                f"{len(self.intervals)} intervals for {len(self.components)} components."
            )
        if any(i < 1 for i in self.intervals) or any(
            b <= a for a, b in zip(self.intervals, self.intervals[1:])
        ):
            raise ValueError(
                f"Intervals must be positive and strictly increasing, got {self.intervals}."
            )
        if self.combiner_spec.n_inputs != len(self.components):
            raise ShapeError(
                f"combiner takes {self.combiner_spec.n_inputs} inputs for "
                f"{len(self.components)} components"
            )
        dofs = {c.dof for c in self.components}
        if len(dofs) != 1:
            raise ShapeError(f"components disagree on the DOF count: {sorted(dofs)}")

    @classmethod
    def create(
        cls,
        dof: int,
        intervals: list[int],
        hidden: tuple[int, ...],
        combiner_hidden: tuple[int, ...],
        rng: np.random.Generator,
        activation: str = "tanh",
    ) -> "FsHnnOdeModel":
        components = [HnnModel.create(dof, hidden, rng, activation) for _ in intervals]
        combiner_spec = CombinerSpec(len(intervals), combiner_hidden, activation)
        return cls(
            components=components,
            intervals=list(intervals),
            combiner_spec=combiner_spec,
            combiner_params=combiner_spec.init_params(rng),
        )

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def dof(self) -> int:
        return self.components[0].dof

    @property
    def groups(self) -> dict[str, ParamVector]:
        groups = {f"component{k}": c.params for k, c in enumerate(self.components)}
        groups["combiner"] = self.combiner_params
        return groups

    @property
    def param_count(self) -> int:
        return sum(c.param_count for c in self.components) + self.combiner_spec.param_count

    def record(
        self, tape: DualTape, nodes: GroupNodes, z: int, component: int | None = None
    ) -> int:
        if component is not None:
            return self.components[component].record_with(
                tape, nodes[f"component{component}"], z
            )
        batch = tape.value(z).shape[:-1]
        energies = [
            tape.reshape(c.record_with(tape, nodes[f"component{k}"], z), (*batch, 1))
            for k, c in enumerate(self.components)
        ]
        m = energies[0] if self.K == 1 else tape.concat(energies, axis=-1)
        return combiner_record(tape, self.combiner_spec, nodes["combiner"], m)

    def component_energies(self, z: np.ndarray) -> np.ndarray:
        """``(M_1(z), ..., M_K(z))`` stacked on a trailing axis."""
        return np.stack(
            [energy_and_gradient(self, z, k)[0] for k in range(self.K)], axis=-1
        )

    def combine(self, m: np.ndarray) -> np.ndarray:
        return combiner_forward(self.combiner_spec, self.combiner_params, m)

    def header(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "dof": self.dof,
            "intervals": list(self.intervals),
            "components": [c.spec.to_dict() for c in self.components],
            "combiner": self.combiner_spec.to_dict(),
            "metadata": self.metadata,
        }


def hamiltonian_vector_field(
    model: HamiltonianModel, z: PhaseState | np.ndarray, component: int | None = None
) -> np.ndarray:
    """
    ``dz/dt = J grad H(z)`` with the canonical ``J = [[0, I], [-I, 0]]``.

    Parameters
    ----------
    model : HnnModel, FsHnnOdeModel or AnalyticHamiltonian
        Energy model. For an FS-HNN the gradient flows through the combiner
        and every component.
    z : PhaseState or numpy.ndarray
        State ``(q, p)`` of shape ``(2d,)`` or a batch ``(B, 2d)``.
    component : int, optional
        Use one FS-HNN component alone.

    Returns
    -------
    numpy.ndarray
        ``(dH/dp, -dH/dq)`` shaped like ``z``.
    """
    _, gradient = energy_and_gradient(model, _as_array(z), component)
    return apply_canonical_j(gradient)


def multiscale_hamiltonian(
    model: HamiltonianModel, z: np.ndarray, component: int | None = None
) -> np.ndarray:
    """``combiner(M_1(z), ..., M_K(z))`` for a state or batch (any model kind)."""
    values = z.values if hasattr(z, "values") else np.asarray(z, dtype=np.float64)
    tape = DualTape()
    z_node = tape.leaf(values)
    nodes, _ = bind_groups(tape, model.groups)
    return tape.value(model.record(tape, nodes, z_node, component))
