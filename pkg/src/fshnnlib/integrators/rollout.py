import logging
from collections.abc import Callable

import numpy as np

from ..core.trajectory import TrajectoryDataset
from ..errors import FshnnError, IntegrationError
from .steppers import SplitSystemFn, VectorFieldFn

logger = logging.getLogger(__name__)

Array = np.ndarray
Stepper = Callable[[Array, float, float], Array]
SplitScheme = Callable[[SplitSystemFn, Array, Array, float], tuple[Array, Array]]
FieldScheme = Callable[[VectorFieldFn, Array, float, float], Array]


def split_stepper(scheme: SplitScheme, sys: SplitSystemFn, dof: int) -> Stepper:
    """Adapt a split scheme to flat ``z = (q, p)`` states."""

    def step(z: Array, t: float, dt: float) -> Array:
        q, p = scheme(sys, z[:dof], z[dof:], dt)
        return np.concatenate([q, p])

    return step


def field_stepper(scheme: FieldScheme, f: VectorFieldFn) -> Stepper:
    """Adapt a vector-field scheme (``rk4_step``, ``heun_rk2_step``, ...)."""

    def step(z: Array, t: float, dt: float) -> Array:
        return scheme(f, z, t, dt)

    return step


def rollout(
    stepper: Stepper,
    state0: Array,
    dt: float,
    n_steps: int,
    save_every: int = 1,
    t0: float = 0.0,
) -> TrajectoryDataset:
    """
    Integrate ``n_steps`` steps and keep every ``save_every``-th state.

    Parameters
    ----------
    stepper : callable
        ``(z, t, dt) -> z_next``.
    state0 : numpy.ndarray
        Initial state, saved as frame 0.
    dt : float
        Integrator step; negative values integrate backwards.
    n_steps : int
        Number of steps, at least 1.
    save_every : int
        Saving stride.

    Returns
    -------
    TrajectoryDataset
        One trajectory with ``n_steps // save_every + 1`` frames spaced
        ``save_every * dt`` apart.

    Raises
    ------
    IntegrationError
        If a step fails or leaves the finite range; ``err.frame`` is the index
        of the frame being produced.
    """
    if n_steps < 1:
        raise ValueError(f"Rollout needs at least one step, got {n_steps}.")
    if save_every < 1:
        raise ValueError(f"save_every must be positive, got {save_every}.")
    z = np.array(state0, dtype=np.float64)
    frames = np.empty((n_steps // save_every + 1, *z.shape))
    frames[0] = z
    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * dt
        frame = (step + save_every - 1) // save_every
        try:
            z = stepper(z, t, dt)
        except (FshnnError, FloatingPointError) as e:
            raise IntegrationError(
                f"step {step} failed while producing frame {frame}: {e}", frame=frame
            ) from e
        if not np.all(np.isfinite(z)):
            raise IntegrationError(
                f"state left the finite range at step {step} (frame {frame})",
                frame=frame,
            )
        if step % save_every == 0:
            frames[step // save_every] = z
    return TrajectoryDataset(states=frames[None], dt=save_every * dt)
