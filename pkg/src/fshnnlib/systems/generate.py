import concurrent.futures
import logging
import time
from typing import Any

import numpy as np

from ..core.queries import wrap_angle
from ..core.trajectory import TrajectoryDataset
from ..errors import IntegrationError
from .registry import BenchmarkSystem

logger = logging.getLogger(__name__)


def _segments(long_states: np.ndarray, n_traj: int, frames_per: int) -> np.ndarray:
    # Segment i covers frames [i*m, (i+1)*m]; neighbours share their boundary frame.
    return np.stack(
        [long_states[i * frames_per : (i + 1) * frames_per + 1] for i in range(n_traj)]
    )


def _generate_ode(
    system: BenchmarkSystem,
    n_traj: int,
    n_steps: int,
    dt: float,
    save_every: int,
    ic_seed: np.random.SeedSequence,
) -> np.ndarray:
    rng = np.random.default_rng(ic_seed)
    frames_per = n_steps // save_every
    try:
        long_states = system.simulate(rng, dt, n_traj * n_steps, save_every)
    except IntegrationError as e:
        frame = e.frame or 0
        trajectory = min(max(frame - 1, 0) // frames_per, n_traj - 1)
        raise IntegrationError(
            f"{system.name} trajectory {trajectory} failed: {e}",
            frame=frame - trajectory * frames_per,
            trajectory=trajectory,
        ) from e
    return _segments(long_states, n_traj, frames_per)


def _generate_field(
    system: BenchmarkSystem,
    n_traj: int,
    n_steps: int,
    dt: float,
    save_every: int,
    seeds: list[np.random.SeedSequence],
) -> np.ndarray:
    def simulate(index: int) -> tuple[int, np.ndarray]:
        rng = np.random.default_rng(seeds[index])
        try:
            return index, system.simulate(rng, dt, n_steps, save_every)
        except IntegrationError as e:
            raise IntegrationError(
                f"{system.name} trajectory {index} failed: {e}",
                frame=e.frame,
                trajectory=index,
            ) from e

    states = np.empty((n_traj, n_steps // save_every + 1, *system.state_shape))
    done = 0
    with concurrent.futures.ThreadPoolExecutor() as executor:
        futures = [executor.submit(simulate, i) for i in range(n_traj)]
        for future in concurrent.futures.as_completed(futures):
            index, frames = future.result()
            states[index] = frames
            done += 1
            logger.info("Processed trajectory %d / %d", done, n_traj)
    return states


def generate_dataset(
    system: BenchmarkSystem,
    n_traj: int,
    n_steps: int,
    dt: float | None = None,
    save_every: int = 1,
    seed: int = 0,
    metadata: dict[str, Any] | None = None,
) -> TrajectoryDataset:
    """
    Generate a seeded dataset of ``n_traj`` trajectories.

    ODE systems integrate one long trajectory of ``n_traj * n_steps`` steps
    from a single random initial condition and cut it into ``n_traj``
    contiguous segments. Field systems run ``n_traj`` independent rollouts
    concurrently, each from its own initial condition.

    Parameters
    ----------
    system : BenchmarkSystem
        Generator and its physical parameters.
    n_traj : int
        Number of trajectories (segments).
    n_steps : int
        Integrator steps per trajectory; a multiple of ``save_every``.
    dt : float, optional
        Integrator step. Defaults to the system's own step (the CFL step for
        shallow water); required for the other systems.
    save_every : int
        Keep every ``save_every``-th state.
    seed : int
        Root seed. Every trajectory draws from its own child of
        ``numpy.random.SeedSequence(seed)``, so the result does not depend on
        thread scheduling.

    Returns
    -------
    TrajectoryDataset
        States of shape ``(n_traj, n_steps // save_every + 1, *state_shape)``
        with the noiseless per-frame energy. Observation noise ``params.noise``
        is added to the stored states of ODE systems.

    Raises
    ------
    IntegrationError
        If a step fails; ``err.trajectory`` and ``err.frame`` locate it.
    """
    if n_traj < 1 or n_steps < 1 or save_every < 1:
        raise ValueError(
            f"n_traj, n_steps and save_every must be positive, got "
            f"{n_traj}, {n_steps}, {save_every}."
        )
    if n_steps % save_every:
        raise ValueError(
            f"n_steps ({n_steps}) must be a multiple of save_every ({save_every})."
        )
    dt = system.default_dt() if dt is None else dt
    if dt is None:
        raise ValueError(f"{system.name} needs an explicit time step.")

    logger.info("Generating %s dataset...", system.name)
    start_time = time.time()
    root = np.random.SeedSequence(seed)
    ic_seed, noise_seed, *trajectory_seeds = root.spawn(2 + n_traj)
    if system.is_field:
        states = _generate_field(
            system, n_traj, n_steps, dt, save_every, trajectory_seeds
        )
    else:
        states = _generate_ode(system, n_traj, n_steps, dt, save_every, ic_seed)
    energy = system.energy(states)
    if system.noise > 0 and not system.is_field:
        noise_rng = np.random.default_rng(noise_seed)
        states = states + noise_rng.normal(0.0, system.noise, size=states.shape)
        if system.wrapped_dims:
            dims = list(system.wrapped_dims)
            states[..., dims] = wrap_angle(states[..., dims])

    elapsed_time = time.time() - start_time
    logger.info("Process completed in %.2f seconds.", elapsed_time)
    info = {
        "params": system.params.to_dict(),
        "seed": seed,
        "n_steps": n_steps,
        "save_every": save_every,
        "integrator_dt": dt,
    }
    info.update(metadata or {})
    return TrajectoryDataset(
        states=states,
        dt=dt * save_every,
        energy=energy,
        system=system.name,
        channels=system.channels,
        wrapped_dims=system.wrapped_dims,
        spacing=system.spacing,
        metadata=info,
    )
