"""
FS-HNN for field states: DeepONet energies, a combiner and a learned operator.

One model step computes the energy gradient ``g`` of the (normalized) field,
maps it through the residual CNN and removes the part of the result that is
parallel to ``g``, so the increment is orthogonal to the energy gradient up
to the regularizer ``xi``.

The operator acts on the variational derivative ``dH/dz / cell_area`` rather
than on the raw per-cell gradient, which keeps its input O(1) independent of
the grid resolution. The projection is unchanged by that rescaling apart from
the meaning of ``xi``.
"""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..autodiff import DualTape, ParamVector
from ..core.state import FieldState
from ..errors import ShapeError
from ..nets.deeponet import DeepONetSpec, deeponet_record
from ..nets.resconv import ResConvSpec, resconv_forward
from .combiner import CombinerSpec, combiner_record
from .hamiltonian import GroupNodes, energy_and_gradient, multiscale_hamiltonian


def project_orthogonal(
    grad_h: np.ndarray, raw: np.ndarray, xi: float, batch_ndim: int = 0
) -> np.ndarray:
    """
    ``raw - <g, raw> / (<g, g> + xi) * g``.

    Inner products are flat Euclidean sums over every axis after the first
    ``batch_ndim`` axes, so each sample in a batch is projected on its own.

    Parameters
    ----------
    grad_h : numpy.ndarray
        Energy gradient ``g``.
    raw : numpy.ndarray
        Unconstrained increment, same shape as ``grad_h``.
    xi : float
        Positive regularizer of the denominator.
    batch_ndim : int
        Number of leading batch axes.
    """
    if grad_h.shape != raw.shape:
        raise ShapeError(f"gradient shape {grad_h.shape} != increment shape {raw.shape}")
    if not xi > 0:
        raise ValueError(f"Projection regularizer must be positive, got {xi}.")
    axes = tuple(range(batch_ndim, grad_h.ndim))
    inner = np.sum(grad_h * raw, axis=axes, keepdims=True)
    norm = np.sum(grad_h * grad_h, axis=axes, keepdims=True)
    return np.asarray(raw - inner / (norm + xi) * grad_h)


def fit_normalization(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and standard deviation of ``(..., C, ny, nx)`` fields."""
    channel_first = np.moveaxis(states, -3, 0).reshape(states.shape[-3], -1)
    shift = channel_first.mean(axis=1)
    scale = channel_first.std(axis=1)
    scale[scale == 0] = 1.0
    return shift, scale


@dataclass
class FsHnnPdeModel:
    """
    Frequency-separable Hamiltonian model of periodic 2D fields.

    Attributes
    ----------
    component_specs, component_params : list
        ``K`` DeepONet energies, component ``k`` trained at ``intervals[k]``.
    combiner_spec, combiner_params
        Map from the ``K`` component energies to the total energy.
    operator_spec, operator_params
        Residual CNN applied to the energy gradient.
    xi : float
        Projection regularizer.
    dt_model : float
        Time span one model step represents; ``pde_step`` with another ``dt``
        scales the increment by ``dt / dt_model``.
    shift, scale : numpy.ndarray
        Per-channel normalization; every energy and increment lives in the
        normalized coordinates ``(z - shift) / scale``.
    grid_shape : tuple of int
        Grid the model was built for.
    """

    component_specs: list[DeepONetSpec]
    component_params: list[ParamVector]
    intervals: list[int]
    combiner_spec: CombinerSpec
    combiner_params: ParamVector
    operator_spec: ResConvSpec
    operator_params: ParamVector
    grid_shape: tuple[int, int]
    xi: float = 1.0e-8
    dt_model: float = 1.0
    shift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scale: np.ndarray = field(default_factory=lambda: np.zeros(0))
    metadata: dict[str, Any] = field(default_factory=dict)

    kind = "fs_hnn_pde"

    def __post_init__(self) -> None:
        if not self.xi > 0:
            raise ValueError(f"Projection regularizer xi must be positive, got {self.xi}.")
        if len(self.component_specs) != len(self.component_params) or not self.component_specs:
            raise ValueError("Need one parameter vector per DeepONet component.")
        if len(self.intervals) != self.K:
            raise ValueError(f"{len(self.intervals)} intervals for {self.K} components.")
        if any(b <= a for a, b in zip(self.intervals, self.intervals[1:])):
            raise ValueError(f"Intervals must be strictly increasing, got {self.intervals}.")
        if self.combiner_spec.n_inputs != self.K:
            raise ShapeError(
                f"combiner takes {self.combiner_spec.n_inputs} inputs for {self.K} components"
            )
        channels = self.operator_spec.field_channels
        if any(spec.channels != channels for spec in self.component_specs):
            raise ShapeError("DeepONet and operator channel counts differ")
        self.grid_shape = (int(self.grid_shape[0]), int(self.grid_shape[1]))
        for spec in self.component_specs:
            spec.pool_factor(self.grid_shape)
        if self.shift.size == 0:
            self.shift = np.zeros(channels)
        if self.scale.size == 0:
            self.scale = np.ones(channels)
        self.shift = np.asarray(self.shift, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)

    @classmethod
    def create(
        cls,
        channels: int,
        grid_shape: tuple[int, int],
        intervals: list[int],
        rng: np.random.Generator,
        latent: int = 16,
        hidden: tuple[int, ...] = (32,),
        stencil: int = 16,
        operator_channels: int = 8,
        operator_depth: int = 2,
        kernel_size: int = 3,
        combiner_hidden: tuple[int, ...] = (16,),
        activation: str = "tanh",
        xi: float = 1.0e-8,
        dt_model: float = 1.0,
    ) -> "FsHnnPdeModel":
        specs = [
            DeepONetSpec.build(channels, latent, hidden, stencil, activation)
            for _ in intervals
        ]
        combiner_spec = CombinerSpec(len(intervals), combiner_hidden, activation)
        operator_spec = ResConvSpec(
            channels, operator_channels, operator_depth, kernel_size, activation
        )
        return cls(
            component_specs=specs,
            component_params=[spec.init_params(rng) for spec in specs],
            intervals=list(intervals),
            combiner_spec=combiner_spec,
            combiner_params=combiner_spec.init_params(rng),
            operator_spec=operator_spec,
            operator_params=operator_spec.init_params(rng),
            grid_shape=grid_shape,
            xi=xi,
            dt_model=dt_model,
        )

    @property
    def K(self) -> int:
        return len(self.component_specs)

    @property
    def channels(self) -> int:
        return self.operator_spec.field_channels

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.grid_shape[0] * self.grid_shape[1])

    @property
    def groups(self) -> dict[str, ParamVector]:
        groups = {f"component{k}": p for k, p in enumerate(self.component_params)}
        groups["combiner"] = self.combiner_params
        groups["operator"] = self.operator_params
        return groups

    @property
    def param_count(self) -> int:
        """Trainable parameters of every energy, the combiner and the operator."""
        return (
            sum(spec.param_count for spec in self.component_specs)
            + self.combiner_spec.param_count
            + self.operator_spec.param_count
        )

    def _channel_view(self) -> tuple[np.ndarray, np.ndarray]:
        return self.shift[:, None, None], self.scale[:, None, None]

    def normalize(self, values: np.ndarray) -> np.ndarray:
        shift, scale = self._channel_view()
        return (values - shift) / scale

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        shift, scale = self._channel_view()
        return values * scale + shift

    def check_field(self, values: np.ndarray) -> None:
        if values.ndim not in (3, 4) or values.shape[-3:] != (self.channels, *self.grid_shape):
            raise ShapeError(
                f"model expects ({self.channels}, {self.grid_shape[0]}, "
                f"{self.grid_shape[1]}) fields, got {values.shape}"
            )

    def record(
        self, tape: DualTape, nodes: GroupNodes, z: int, component: int | None = None
    ) -> int:
        """Energy of normalized fields ``z``: a scalar, or ``(B,)`` for a batch."""

        def energy(k: int) -> int:
            return deeponet_record(
                tape, self.component_specs[k], nodes[f"component{k}"], z, self.cell_area
            )

        if component is not None:
            return energy(component)
        batch = tape.value(z).shape[:-3]
        energies = [tape.reshape(energy(k), (*batch, 1)) for k in range(self.K)]
        m = energies[0] if self.K == 1 else tape.concat(energies, axis=-1)
        return combiner_record(tape, self.combiner_spec, nodes["combiner"], m)

    def header(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "intervals": list(self.intervals),
            "components": [spec.to_dict() for spec in self.component_specs],
            "combiner": self.combiner_spec.to_dict(),
            "operator": self.operator_spec.to_dict(),
            "grid_shape": list(self.grid_shape),
            "xi": self.xi,
            "dt_model": self.dt_model,
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
            "metadata": self.metadata,
        }


def _field_values(z: FieldState | np.ndarray) -> np.ndarray:
    return z.values if isinstance(z, FieldState) else np.asarray(z, dtype=np.float64)


def pde_increment(
    model: FsHnnPdeModel, zn: np.ndarray, component: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradient field, raw operator output and projected increment at normalized ``zn``.

    Returns
    -------
    tuple of numpy.ndarray
        ``(g, raw, delta)``, each shaped like ``zn``.
    """
    _, gradient = energy_and_gradient(model, zn, component)
    g = gradient / model.cell_area
    raw = np.asarray(resconv_forward(model.operator_spec, model.operator_params, g))
    delta = project_orthogonal(g, raw, model.xi, batch_ndim=zn.ndim - 3)
    return g, raw, delta


def pde_step(
    model: FsHnnPdeModel,
    z: FieldState | np.ndarray,
    dt: float | None = None,
    component: int | None = None,
) -> FieldState | np.ndarray:
    """
    Advance a field (or a batch of fields) by one model step.

    ``z + delta`` in normalized coordinates, with ``delta`` scaled by
    ``dt / dt_model`` when ``dt`` is given.

    Raises
    ------
    ShapeError
        If the field does not match the model's channels and grid.
    """
    values = _field_values(z)
    model.check_field(values)
    zn = model.normalize(values)
    _, _, delta = pde_increment(model, zn, component)
    factor = 1.0 if dt is None else dt / model.dt_model
    out = model.denormalize(zn + factor * delta)
    return z.with_values(out) if isinstance(z, FieldState) else out


def field_hamiltonian(
    model: FsHnnPdeModel, z: FieldState | np.ndarray, component: int | None = None
) -> np.ndarray:
    """Learned energy of raw (unnormalized) fields."""
    values = _field_values(z)
    model.check_field(values)
    return multiscale_hamiltonian(model, model.normalize(values), component)
