import logging
from collections.abc import Callable
from typing import Any

import numpy as np

from ..core.trajectory import TrajectoryDataset
from ..errors import DivergenceError, FshnnError
from ..integrators.steppers import rk4_step
from .hamiltonian import hamiltonian_vector_field
from .mlp_dynamics import MlpDynamicsModel
from .pde import FsHnnPdeModel, pde_step

logger = logging.getLogger(__name__)


def _state_ndim(model: Any) -> int:
    return 3 if isinstance(model, FsHnnPdeModel) else 1


def _advance_fn(
    model: Any, dt: float, component: int | None
) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(model, FsHnnPdeModel):
        return lambda z: np.asarray(pde_step(model, z, dt, component))
    if isinstance(model, MlpDynamicsModel):
        if not np.isclose(dt, model.dt_model):
            logger.warning(
                "MLP predictor was trained at dt=%g; rolling out with its own step, "
                "not dt=%g",
                model.dt_model,
                dt,
            )
        return model.step

    def field(z: np.ndarray, t: float) -> np.ndarray:
        return hamiltonian_vector_field(model, z, component)

    return lambda z: rk4_step(field, z, 0.0, dt)


def _checked(advance: Callable[[np.ndarray], np.ndarray], z: np.ndarray, step: int) -> np.ndarray:
    try:
        out = advance(z)
    except (FshnnError, FloatingPointError) as e:
        raise DivergenceError(f"model step {step} failed: {e}", step) from e
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"state left the finite range at step {step}", step)
    return out


def model_rollout(
    model: Any,
    z0: np.ndarray,
    n_steps: int,
    dt: float,
    component: int | None = None,
) -> TrajectoryDataset:
    """
    Roll a learned model forward, saving every step.

    ODE energy models integrate ``J grad H`` with RK4, the MLP predictor
    iterates its map, and the field model iterates ``pde_step``.

    Parameters
    ----------
    model : HnnModel, FsHnnOdeModel, AnalyticHamiltonian, MlpDynamicsModel or FsHnnPdeModel
        Trained model.
    z0 : numpy.ndarray
        One initial state, or a batch of them along a leading axis.
    n_steps : int
        Number of steps; 0 returns the initial frame only.
    dt : float
        Step size. The MLP predictor always advances by its own
        ``dt_model``, which becomes the step of the result.
    component : int, optional
        Roll out one FS-HNN component alone.

    Returns
    -------
    TrajectoryDataset
        ``(n_traj, n_steps + 1, *state_shape)`` frames. A trajectory that
        leaves the finite range is filled with ``nan`` from that step on, and
        ``metadata["divergence_steps"]`` lists the first bad step per
        trajectory (``None`` when it stayed finite); ``metadata["divergence_step"]``
        is the earliest of them.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be non-negative, got {n_steps}.")
    z0 = np.asarray(z0, dtype=np.float64)
    batched = z0.ndim > _state_ndim(model)
    batch = z0 if batched else z0[None]
    frames = np.full((batch.shape[0], n_steps + 1, *batch.shape[1:]), np.nan)
    frames[:, 0] = batch
    divergence: list[int | None] = [None] * batch.shape[0]
    active = np.arange(batch.shape[0])
    advance = _advance_fn(model, dt, component)

    z = batch
    for step in range(1, n_steps + 1):
        if active.size == 0:
            break
        try:
            z = _checked(advance, z, step)
        except DivergenceError:
            # Find the offending trajectories one by one; the rest carry on.
            survivors, states = [], []
            for position, index in enumerate(active):
                try:
                    states.append(_checked(advance, z[position : position + 1], step)[0])
                    survivors.append(index)
                except DivergenceError as e:
                    divergence[index] = e.step
                    logger.warning("Trajectory %d diverged at step %d", index, e.step)
            active = np.asarray(survivors, dtype=int)
            if active.size == 0:
                break
            z = np.stack(states)
        frames[active, step] = z

    steps = [s for s in divergence if s is not None]
    metadata = {
        "divergence_steps": divergence,
        "divergence_step": min(steps) if steps else None,
        "model": getattr(model, "kind", type(model).__name__),
        "component": component,
    }
    if isinstance(model, MlpDynamicsModel):
        dt = model.dt_model
    return TrajectoryDataset(states=frames, dt=dt, metadata=metadata)
