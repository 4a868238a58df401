import numpy as np

from ..errors import ShapeError
from .trajectory import TrajectoryDataset


def wrap_angle(theta: np.ndarray | float) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    # mod lands exact odd multiples of pi on -pi; move them to +pi.
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def subsample(traj: TrajectoryDataset, interval: int) -> TrajectoryDataset:
    """
    Keep frames ``0, I, 2I, ...`` of every trajectory.

    Parameters
    ----------
    traj : TrajectoryDataset
        Source dataset with frame spacing ``dt``.
    interval : int
        Positive subsampling interval ``I``.

    Returns
    -------
    TrajectoryDataset
        Dataset with ``ceil(n_frames / I)`` frames and ``dt = I * traj.dt``.
    """
    if interval < 1:
        raise ValueError(f"Subsampling interval must be positive, got {interval}.")
    energy = None if traj.energy is None else traj.energy[:, ::interval]
    metadata = dict(traj.metadata)
    metadata["interval"] = int(metadata.get("interval", 1)) * interval
    return traj.replace(
        states=traj.states[:, ::interval],
        energy=energy,
        dt=traj.dt * interval,
        metadata=metadata,
    )


def training_window(traj: TrajectoryDataset, n_steps: int) -> TrajectoryDataset:
    """First ``n_steps`` steps (``n_steps + 1`` frames) of every trajectory."""
    if n_steps < 1:
        raise ValueError(f"Training window needs at least one step, got {n_steps}.")
    energy = None if traj.energy is None else traj.energy[:, : n_steps + 1]
    return traj.replace(states=traj.states[:, : n_steps + 1], energy=energy)


def _unwrapped_states(traj: TrajectoryDataset) -> np.ndarray:
    states = traj.states
    if not traj.wrapped_dims:
        return states
    states = states.copy()
    for dim in traj.wrapped_dims:
        states[:, :, dim] = np.unwrap(states[:, :, dim], axis=1)
    return states


def derivative_estimates(traj: TrajectoryDataset) -> np.ndarray:
    """
    Finite-difference time derivatives at every frame.

    Interior frames use the central difference ``(z[n+1] - z[n-1]) / (2 dt)``;
    the end frames use second-order one-sided differences (first order when the
    trajectory only has two frames). Components listed in ``wrapped_dims`` are
    unwrapped along time first, so a jump across the branch cut at pi does not
    show up as a huge derivative.

    Returns
    -------
    numpy.ndarray
        Array shaped like ``traj.states``.
    """
    if traj.n_frames < 2:
        raise ShapeError(
            f"derivative estimate needs at least 2 frames, got {traj.n_frames}"
        )
    edge_order = 2 if traj.n_frames >= 3 else 1
    return np.gradient(_unwrapped_states(traj), traj.dt, axis=1, edge_order=edge_order)


def derivative_estimate(traj: TrajectoryDataset, index: int) -> np.ndarray:
    """Derivative estimate at one frame, shape ``(n_traj, *state_shape)``."""
    if not -traj.n_frames <= index < traj.n_frames:
        raise IndexError(f"frame {index} out of range for {traj.n_frames} frames")
    return derivative_estimates(traj)[:, index]


def derivative_pairs(traj: TrajectoryDataset) -> tuple[np.ndarray, np.ndarray]:
    """All (state, derivative estimate) pairs flattened over trajectories and frames."""
    derivatives = derivative_estimates(traj)
    flat_shape = (traj.n_traj * traj.n_frames, *traj.state_shape)
    return traj.states.reshape(flat_shape), derivatives.reshape(flat_shape)


def frame_pairs(
    traj: TrajectoryDataset, offset: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """All ``(z_t, z_{t+offset})`` pairs flattened over trajectories and frames."""
    if not 1 <= offset < traj.n_frames:
        raise ShapeError(
            f"frame offset {offset} needs more than {traj.n_frames} frames"
        )
    flat_shape = (-1, *traj.state_shape)
    current = traj.states[:, :-offset].reshape(flat_shape)
    following = traj.states[:, offset:].reshape(flat_shape)
    return current, following

