from dataclasses import dataclass
from typing import Any

import numpy as np

from ..autodiff import DualTape, ParamVector
from ..core.state import FieldState
from ..errors import ShapeError
from .mlp import MlpSpec, mlp_record

BRANCH = "branch."
TRUNK = "trunk."


@dataclass(frozen=True)
class DeepONetSpec:
    """
    Branch/trunk pair whose inner product, summed over the grid, is a scalar energy.

    Parameters
    ----------
    branch : MlpSpec
        Consumes the field average-pooled to ``stencil x stencil`` per channel
        and flattened, i.e. ``channels * stencil**2`` inputs.
    trunk : MlpSpec
        Consumes a 2D coordinate on the unit square.
    channels : int
        Number of field channels.
    stencil : int
        Side length of the pooled branch input.
    """

    branch: MlpSpec
    trunk: MlpSpec
    channels: int
    stencil: int = 16

    def __post_init__(self) -> None:
        if self.branch.output_dim != self.trunk.output_dim:
            raise ShapeError(
                f"branch width {self.branch.output_dim} != trunk width "
                f"{self.trunk.output_dim}"
            )
        if self.trunk.input_dim != 2:
            raise ShapeError(f"trunk takes 2D coordinates, got {self.trunk.input_dim}")
        expected = self.channels * self.stencil**2
        if self.branch.input_dim != expected:
            raise ShapeError(
                f"branch input must be channels * stencil**2 = {expected}, "
                f"got {self.branch.input_dim}"
            )

    @classmethod
    def build(
        cls,
        channels: int,
        latent: int,
        hidden: tuple[int, ...],
        stencil: int = 16,
        activation: str = "tanh",
    ) -> "DeepONetSpec":
        return cls(
            branch=MlpSpec(channels * stencil**2, hidden, latent, activation),
            trunk=MlpSpec(2, hidden, latent, activation),
            channels=channels,
            stencil=stencil,
        )

    @property
    def latent(self) -> int:
        return self.branch.output_dim

    @property
    def param_count(self) -> int:
        return self.branch.param_count + self.trunk.param_count

    def init_blocks(
        self, rng: np.random.Generator, prefix: str = ""
    ) -> list[tuple[str, np.ndarray]]:
        return self.branch.init_blocks(rng, prefix + BRANCH) + self.trunk.init_blocks(
            rng, prefix + TRUNK
        )

    def init_params(self, rng: np.random.Generator) -> ParamVector:
        return ParamVector.from_blocks(self.init_blocks(rng))

    def pool_factor(self, grid_shape: tuple[int, int]) -> int:
        ny, nx = grid_shape
        if ny != nx or ny % self.stencil != 0:
            raise ShapeError(
                f"grid {ny}x{nx} does not pool onto a {self.stencil}x{self.stencil} "
                "stencil; use a square grid whose side is a multiple of the stencil"
            )
        return ny // self.stencil

    def to_dict(self) -> dict[str, Any]:
        return {
            "branch": self.branch.to_dict(),
            "trunk": self.trunk.to_dict(),
            "channels": self.channels,
            "stencil": self.stencil,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DeepONetSpec":
        return cls(
            branch=MlpSpec.from_dict(data["branch"]),
            trunk=MlpSpec.from_dict(data["trunk"]),
            channels=int(data["channels"]),
            stencil=int(data.get("stencil", 16)),
        )


def grid_coordinates(ny: int, nx: int) -> np.ndarray:
    """Grid nodes ``(i / nx, j / ny)`` of the periodic unit square, shape (ny*nx, 2)."""
    y, x = np.meshgrid(np.arange(ny) / ny, np.arange(nx) / nx, indexing="ij")
    return np.stack([x.ravel(), y.ravel()], axis=-1)


def deeponet_record(
    tape: DualTape,
    spec: DeepONetSpec,
    nodes: dict[str, int],
    z: int,
    cell_area: float | None = None,
    prefix: str = "",
) -> int:
    """
    Record ``H(z) = cell_area * <branch(pool(z)), sum_i trunk(x_i)>``.

    ``z`` is a tape node of shape ``(channels, ny, nx)`` or
    ``(batch, channels, ny, nx)``; the result is a scalar or a ``(batch,)``
    vector. The grid sum is taken over the trunk outputs before the inner
    product, so the summation order never depends on the field values.
    """
    shape = tape.value(z).shape
    if len(shape) not in (3, 4) or shape[-3] != spec.channels:
        raise ShapeError(
            f"DeepONet expects ({spec.channels}, ny, nx) fields, got {shape}"
        )
    ny, nx = shape[-2:]
    factor = spec.pool_factor((ny, nx))
    if cell_area is None:
        cell_area = 1.0 / (nx * ny)

    pooled = tape.avg_pool(z, factor) if factor > 1 else z
    batch = shape[:-3]
    flat = tape.reshape(pooled, (*batch, spec.branch.input_dim))
    b = mlp_record(tape, spec.branch, nodes, flat, prefix + BRANCH)

    coords = tape.const(grid_coordinates(ny, nx))
    t = mlp_record(tape, spec.trunk, nodes, coords, prefix + TRUNK)
    t_sum = tape.sum(t, axis=0)
    return tape.scale(tape.dot(b, t_sum), cell_area)


def deeponet_hamiltonian(
    spec: DeepONetSpec,
    params: ParamVector,
    z: FieldState | np.ndarray,
    cell_area: float | None = None,
) -> float:
    """
    Evaluate the learned energy functional of one field.

    Parameters
    ----------
    spec : DeepONetSpec
        Architecture.
    params : ParamVector
        Blocks ``branch.W0 ...`` and ``trunk.W0 ...``.
    z : FieldState or numpy.ndarray
        Field of shape ``(channels, ny, nx)``.
    cell_area : float, optional
        Quadrature weight per grid cell; defaults to ``1 / (nx * ny)``.

    Returns
    -------
    float
        ``H(z)``.

    Raises
    ------
    ShapeError
        If the grid cannot be pooled onto the configured stencil.
    """
    values = z.values if isinstance(z, FieldState) else z
    tape = DualTape()
    z_node = tape.leaf(values)
    nodes = params.bind(tape)
    out = deeponet_record(tape, spec, nodes, z_node, cell_area)
    return float(tape.value(out))
