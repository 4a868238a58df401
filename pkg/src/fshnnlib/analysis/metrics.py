import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from ..core.queries import subsample
from ..core.trajectory import TrajectoryDataset
from ..errors import ShapeError
from ..io.reports import read_json, write_json

logger = logging.getLogger(__name__)

ENERGY_FLOOR = 1.0e-12

TrajectoryLike = TrajectoryDataset | np.ndarray


def _states(traj: TrajectoryLike) -> np.ndarray:
    if isinstance(traj, TrajectoryDataset):
        return traj.states
    return np.asarray(traj, dtype=np.float64)


def _check_shapes(pred: np.ndarray, truth: np.ndarray) -> None:
    if pred.shape != truth.shape:
        raise ShapeError(
            f"prediction shape {pred.shape} does not match reference {truth.shape}"
        )


def rollout_mse(pred: TrajectoryLike, truth: TrajectoryLike) -> float:
    """
    Mean squared difference over every frame and state component.

    Frames are paired by index, so both trajectories must share their shape.
    A prediction containing ``nan`` (a diverged rollout) gives ``nan``.
    """
    p, t = _states(pred), _states(truth)
    _check_shapes(p, t)
    return float(np.mean((p - t) ** 2))


def mse_curve(pred: TrajectoryLike, truth: TrajectoryLike) -> np.ndarray:
    """
    Per-frame MSE averaged over trajectories and state components.

    Parameters
    ----------
    pred, truth : TrajectoryDataset or numpy.ndarray
        ``(n_traj, n_frames, ...)`` frames.

    Returns
    -------
    numpy.ndarray
        Array of shape ``(n_frames,)``.
    """
    p, t = _states(pred), _states(truth)
    _check_shapes(p, t)
    if p.ndim < 3:
        raise ShapeError(f"expected (n_traj, n_frames, ...) states, got {p.shape}")
    squared = (p - t) ** 2
    axes = (0, *range(2, squared.ndim))
    return np.asarray(np.mean(squared, axis=axes))


def energy_deviation(
    traj: TrajectoryLike, energy_fn: Callable[[np.ndarray], np.ndarray]
) -> tuple[np.ndarray, bool]:
    """
    Relative energy deviation ``(E(z_t) - E(z_0)) / |E(z_0)|`` per trajectory.

    Parameters
    ----------
    traj : TrajectoryDataset or numpy.ndarray
        ``(n_traj, n_frames, ...)`` frames.
    energy_fn : callable
        Maps an array of states ``(..., *state_shape)`` to energies ``(...)``.

    Returns
    -------
    curve : numpy.ndarray
        Array of shape ``(n_traj, n_frames)``.
    absolute : bool
        ``True`` if some trajectory had ``|E(z_0)| < 1e-12``; its row then
        holds the absolute deviation ``E(z_t) - E(z_0)``.
    """
    energies = np.asarray(energy_fn(_states(traj)), dtype=np.float64)
    if energies.ndim != 2:
        raise ShapeError(f"energy function must return (n_traj, n_frames), got {energies.shape}")
    e0 = energies[:, :1]
    tiny = np.abs(e0) < ENERGY_FLOOR
    denominator = np.where(tiny, 1.0, np.abs(e0))
    absolute = bool(np.any(tiny))
    if absolute:
        logger.warning(
            "Initial energy below %g for %d trajectories; reporting absolute deviation",
            ENERGY_FLOOR,
            int(np.sum(tiny)),
        )
    return (energies - e0) / denominator, absolute


def align_time(
    pred: TrajectoryDataset, truth: TrajectoryDataset
) -> tuple[TrajectoryDataset, TrajectoryDataset]:
    """
    Put a prediction and its reference on a common frame grid.

    If the prediction step is an integer multiple ``m`` of the reference step
    the reference is subsampled by ``m``. Both are then cut to the common
    number of trajectories and frames.

    Raises
    ------
    ShapeError
        If the steps are not integer multiples or the state shapes differ.
    """
    ratio = pred.dt / truth.dt
    m = int(round(ratio))
    if m < 1 or not np.isclose(ratio, m, rtol=1e-9, atol=0.0):
        raise ShapeError(
            f"prediction step {pred.dt} is not a multiple of the reference step {truth.dt}"
        )
    if m > 1:
        truth = subsample(truth, m)
    if pred.state_shape != truth.state_shape:
        raise ShapeError(f"state shapes differ: {pred.state_shape} vs {truth.state_shape}")
    n_traj = min(pred.n_traj, truth.n_traj)
    n_frames = min(pred.n_frames, truth.n_frames)

    def cut(traj: TrajectoryDataset) -> TrajectoryDataset:
        energy = None if traj.energy is None else traj.energy[:n_traj, :n_frames]
        return traj.replace(states=traj.states[:n_traj, :n_frames], energy=energy)

    return cut(pred), cut(truth)


def zero_crossing_frequency(signal: np.ndarray, dt: float) -> float:
    """
    Angular frequency of an oscillating signal from its zero crossings.

    The mean is removed first; crossing times are located by linear
    interpolation, and consecutive crossings are half a period apart.

    Raises
    ------
    ValueError
        If fewer than two crossings are found.
    """
    x = np.asarray(signal, dtype=np.float64)
    x = x - x.mean()
    sign_change = np.nonzero(np.signbit(x[:-1]) != np.signbit(x[1:]))[0]
    if sign_change.size < 2:
        raise ValueError(
            f"Need at least two zero crossings, found {sign_change.size}."
        )
    fraction = x[sign_change] / (x[sign_change] - x[sign_change + 1])
    crossings = (sign_change + fraction) * dt
    half_period = (crossings[-1] - crossings[0]) / (crossings.size - 1)
    return float(np.pi / half_period)


def _finite_or_none(value: float | None) -> float | None:
    if value is None or not np.isfinite(value):
        return None
    return float(value)


@dataclass
class MetricReport:
    """
    Accuracy and conservation metrics of one rollout.

    Attributes
    ----------
    mse : float
        Rollout MSE over every frame (``nan`` after a divergence).
    times : numpy.ndarray
        Time of every frame.
    mse_curve : numpy.ndarray
        Per-frame MSE.
    energy_curve : numpy.ndarray or None
        Relative energy deviation averaged over trajectories.
    energy_absolute : bool
        The energy curve holds absolute deviations for some trajectory.
    divergence_step : int or None
        First non-finite step of the prediction.
    label : dict
        Identifies the run in tables: ``system``, ``model``, ``resolution``, ``seed``.
    """

    mse: float
    times: np.ndarray
    mse_curve: np.ndarray
    energy_curve: np.ndarray | None = None
    energy_absolute: bool = False
    divergence_step: int | None = None
    label: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.mse_curve = np.asarray(self.mse_curve, dtype=np.float64)
        if self.mse_curve.shape != self.times.shape:
            raise ShapeError("MSE curve and time axis differ in length")
        if self.energy_curve is not None:
            self.energy_curve = np.asarray(self.energy_curve, dtype=np.float64)
            if self.energy_curve.shape != self.times.shape:
                raise ShapeError("energy curve and time axis differ in length")

    def curves(self) -> pd.DataFrame:
        frame = pd.DataFrame({"time": self.times, "mse": self.mse_curve})
        if self.energy_curve is not None:
            frame["energy_deviation"] = self.energy_curve
        return frame

    def to_dict(self) -> dict[str, Any]:
        return {
            "mse": _finite_or_none(self.mse),
            "final_mse": _finite_or_none(float(self.mse_curve[-1])),
            "max_energy_deviation": (
                None
                if self.energy_curve is None
                else _finite_or_none(float(np.nanmax(np.abs(self.energy_curve))))
            ),
            "energy_absolute": self.energy_absolute,
            "divergence_step": self.divergence_step,
            "n_frames": int(self.times.size),
            "label": dict(self.label),
        }

    def save(self, path: str, provenance: dict[str, Any] | None = None) -> None:
        payload = self.to_dict()
        if provenance:
            payload["provenance"] = provenance
        write_json(path, payload)
        logger.info("Metric report saved to %s", path)


def load_report_summary(path: str) -> dict[str, Any]:
    """Scalar part of a saved ``MetricReport`` (curves live in the CSV)."""
    data = read_json(path)
    if "mse" not in data or "label" not in data:
        raise ValueError(f"'{path}' is not a metric report.")
    return data


def evaluate(
    pred: TrajectoryDataset,
    truth: TrajectoryDataset,
    energy_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    label: dict[str, Any] | None = None,
) -> MetricReport:
    """
    Compare a predicted rollout with reference data.

    The time grids are aligned with ``align_time``; the divergence step is
    taken from the prediction's metadata when ``model_rollout`` recorded one.
    Energy deviations skip diverged trajectories.
    """
    pred, truth = align_time(pred, truth)
    energy_curve = None
    absolute = False
    if energy_fn is not None:
        finite = np.all(np.isfinite(pred.states.reshape(pred.n_traj, -1)), axis=1)
        if np.any(finite):
            curve, absolute = energy_deviation(pred.states[finite], energy_fn)
            energy_curve = curve.mean(axis=0)
    divergence = pred.metadata.get("divergence_step")
    if divergence is None and not np.all(np.isfinite(pred.states)):
        flat = pred.states.reshape(pred.n_traj, pred.n_frames, -1)
        bad = ~np.all(np.isfinite(flat), axis=2)
        divergence = int(np.argmax(np.any(bad, axis=0)))
    return MetricReport(
        mse=rollout_mse(pred, truth),
        times=pred.times,
        mse_curve=mse_curve(pred, truth),
        energy_curve=energy_curve,
        energy_absolute=absolute,
        divergence_step=divergence,
        label=dict(label or {}),
    )
