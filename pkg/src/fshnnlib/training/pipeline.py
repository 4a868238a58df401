"""
Training loops: two-phase FS-HNN training plus the HNN and MLP baselines.

Phase 1 fits every component ``k`` on the training window subsampled at
interval ``I_k``. Phase 2 fits the combiner on the full-resolution window,
with the components frozen unless ``freeze_components`` is off. Field models
train the shared structure operator in both phases.
"""

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from ..autodiff import ParamVector
from ..config import TrainConfig
from ..core.queries import derivative_pairs, frame_pairs, subsample, training_window
from ..core.trajectory import TrajectoryDataset
from ..errors import ConfigError, FshnnError, NonFiniteError, TrainingError
from ..models.hamiltonian import FsHnnOdeModel, HnnModel
from ..models.mlp_dynamics import MlpDynamicsModel
from ..models.pde import FsHnnPdeModel, fit_normalization
from .losses import (
    OPERATOR,
    hnn_grad_loss,
    mlp_onestep_loss,
    pde_onestep_loss,
    resolve_loss,
)
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["phase", "component", "epoch", "loss"]

LossResult = tuple[float, dict[str, np.ndarray]]
LossFn = Callable[..., LossResult]


@dataclass
class TrainResult:
    """Trained model (updated in place) and its per-epoch loss history."""

    model: Any
    history: pd.DataFrame


def _fit(
    groups: dict[str, ParamVector],
    loss_fn: LossFn,
    data: tuple[np.ndarray, ...],
    config: TrainConfig,
    epochs: int,
    rng: np.random.Generator,
    phase: int,
    component: int | None,
) -> list[dict[str, Any]]:
    """
    Minibatch adaptive-moment descent of ``loss_fn`` over ``data``.

    ``loss_fn(*batch)`` returns the batch loss and the gradient of every group
    to train; the updated values are written back into ``groups``.
    """
    n = data[0].shape[0]
    if n == 0:
        raise ValueError(f"No training samples for phase {phase}.")
    state = AdamState()
    rows = []
    label = "combined" if component is None else f"component {component}"
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            index = order[start : start + config.batch_size]
            try:
                loss, grads = loss_fn(*(a[index] for a in data))
            except NonFiniteError as e:
                raise TrainingError(
                    f"non-finite values in phase {phase} ({label}), epoch {epoch}: {e}",
                    epoch=epoch,
                    phase=phase,
                ) from e
            finite = all(np.all(np.isfinite(g)) for g in grads.values())
            if not (np.isfinite(loss) and finite):
                raise TrainingError(
                    f"loss became non-finite in phase {phase} ({label}), epoch {epoch}",
                    epoch=epoch,
                    phase=phase,
                )
            updated, state = adam_step(groups, grads, state, config)
            for name, params in updated.items():
                groups[name].values[:] = params.values
            total += loss * index.size
        mean = total / n
        rows.append(
            {"phase": phase, "component": component, "epoch": epoch, "loss": mean}
        )
        if epoch % config.log_every == 0 or epoch == epochs - 1:
            logger.info(
                "Phase %d, %s, epoch %d / %d: loss %.6e",
                phase,
                label,
                epoch + 1,
                epochs,
                mean,
            )
    return rows


def _history(rows: list[dict[str, Any]]) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    frame["component"] = frame["component"].astype("Int64")
    return frame


def _check_intervals(model: FsHnnOdeModel | FsHnnPdeModel, config: TrainConfig) -> None:
    if list(config.intervals) != list(model.intervals):
        raise ConfigError(
            f"Training intervals {list(config.intervals)} do not match the model's "
            f"{list(model.intervals)}."
        )


def _ode_phases(
    model: FsHnnOdeModel,
    window: TrajectoryDataset,
    config: TrainConfig,
    rng: np.random.Generator,
) -> list[dict[str, Any]]:
    resolve_loss(model, config.phase1_loss)
    resolve_loss(model, config.phase2_loss)
    groups = model.groups
    rows = []
    for k, interval in enumerate(model.intervals):
        z, zdot = derivative_pairs(subsample(window, interval))
        name = f"component{k}"

        def component_loss(
            zb: np.ndarray, zdb: np.ndarray, k: int = k, name: str = name
        ) -> LossResult:
            return hnn_grad_loss(model, zb, zdb, component=k, trainable=[name])

        rows += _fit(
            groups, component_loss, (z, zdot), config, config.epochs, rng, 1, k
        )

    if config.skip_combiner:
        return rows
    trainable = ["combiner"]
    if not config.freeze_components:
        trainable += [f"component{k}" for k in range(model.K)]
    z, zdot = derivative_pairs(window)

    def combined_loss(zb: np.ndarray, zdb: np.ndarray) -> LossResult:
        return hnn_grad_loss(model, zb, zdb, trainable=trainable)

    rows += _fit(
        groups, combined_loss, (z, zdot), config, config.combiner_epochs, rng, 2, None
    )
    return rows


def _pde_phases(
    model: FsHnnPdeModel,
    window: TrajectoryDataset,
    config: TrainConfig,
    rng: np.random.Generator,
) -> list[dict[str, Any]]:
    resolve_loss(model, config.phase1_loss)
    resolve_loss(model, config.phase2_loss)
    model.shift, model.scale = fit_normalization(window.states)
    model.dt_model = window.dt
    groups = model.groups
    rows = []
    for k, interval in enumerate(model.intervals):
        z_t, z_next = frame_pairs(subsample(window, interval))
        trainable = [f"component{k}", OPERATOR]

        def component_loss(
            zb: np.ndarray,
            nb: np.ndarray,
            k: int = k,
            i: int = interval,
            names: list[str] = trainable,
        ) -> LossResult:
            return pde_onestep_loss(
                model, zb, nb, step_scale=i, component=k, trainable=names
            )

        rows += _fit(
            groups, component_loss, (z_t, z_next), config, config.epochs, rng, 1, k
        )

    if config.skip_combiner:
        return rows
    trainable = ["combiner", OPERATOR]
    if not config.freeze_components:
        trainable += [f"component{k}" for k in range(model.K)]
    z_t, z_next = frame_pairs(window)

    def combined_loss(zb: np.ndarray, nb: np.ndarray) -> LossResult:
        return pde_onestep_loss(model, zb, nb, trainable=trainable)

    rows += _fit(
        groups,
        combined_loss,
        (z_t, z_next),
        config,
        config.combiner_epochs,
        rng,
        2,
        None,
    )
    return rows


def train_fs_hnn(
    dataset: TrajectoryDataset,
    model: FsHnnOdeModel | FsHnnPdeModel,
    config: TrainConfig,
) -> TrainResult:
    """
    Two-phase FS-HNN training on the first ``config.window_steps`` steps.

    Parameters
    ----------
    dataset : TrajectoryDataset
        Full-resolution training data.
    model : FsHnnOdeModel or FsHnnPdeModel
        Initialized model; its parameters are trained in place.
    config : TrainConfig
        Optimizer, schedule and phase settings; ``config.intervals`` must equal
        ``model.intervals``.

    Returns
    -------
    TrainResult
        The model and a loss history with columns ``phase``, ``component``,
        ``epoch`` and ``loss`` (component is empty for phase 2).

    Raises
    ------
    TrainingError
        If a loss becomes non-finite; ``err.epoch`` and ``err.phase`` locate it.
    """
    _check_intervals(model, config)
    start = time.time()
    logger.info(
        "Training %s model with intervals %s...", model.kind, list(model.intervals)
    )
    window = training_window(dataset, config.window_steps)
    rng = np.random.default_rng(config.seed)
    if isinstance(model, FsHnnPdeModel):
        if not dataset.is_field:
            raise ConfigError("Field model needs a field dataset.")
        rows = _pde_phases(model, window, config, rng)
    else:
        if dataset.is_field:
            raise ConfigError("ODE model needs a phase-space dataset.")
        rows = _ode_phases(model, window, config, rng)
    model.metadata = {
        **model.metadata,
        "dt": dataset.dt,
        "window_steps": config.window_steps,
    }
    logger.info("Process completed in %.2f seconds.", time.time() - start)
    return TrainResult(model=model, history=_history(rows))


def union_resolutions(
    window: TrajectoryDataset, intervals: tuple[int, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Derivative pairs of the window subsampled at every interval, stacked."""
    pairs = [derivative_pairs(subsample(window, interval)) for interval in intervals]
    return (
        np.concatenate([z for z, _ in pairs]),
        np.concatenate([zdot for _, zdot in pairs]),
    )


def train_hnn(
    dataset: TrajectoryDataset, model: HnnModel, config: TrainConfig
) -> TrainResult:
    """
    Plain HNN training with the gradient-matching loss.

    With ``config.union_resolutions`` the model sees the training window at
    every interval in ``config.intervals`` at once; otherwise the window
    subsampled at ``config.intervals[0]``.
    """
    resolve_loss(model, config.phase1_loss)
    start = time.time()
    logger.info("Training hnn model...")
    window = training_window(dataset, config.window_steps)
    if config.union_resolutions:
        data = union_resolutions(window, config.intervals)
    else:
        data = derivative_pairs(subsample(window, config.intervals[0]))
    rng = np.random.default_rng(config.seed)

    def loss_fn(zb: np.ndarray, zdb: np.ndarray) -> LossResult:
        return hnn_grad_loss(model, zb, zdb)

    rows = _fit(model.groups, loss_fn, data, config, config.epochs, rng, 1, None)
    logger.info("Process completed in %.2f seconds.", time.time() - start)
    return TrainResult(model=model, history=_history(rows))


def train_mlp(
    dataset: TrajectoryDataset, model: MlpDynamicsModel, config: TrainConfig
) -> TrainResult:
    """
    One-step training of the black-box predictor on consecutive frames of the
    window subsampled at ``config.intervals[0]``; one model step then spans
    that many dataset steps.
    """
    resolve_loss(model, config.phase1_loss)
    if dataset.is_field:
        raise ConfigError("The MLP predictor handles phase-space datasets only.")
    start = time.time()
    logger.info("Training mlp model...")
    interval = config.intervals[0]
    window = subsample(training_window(dataset, config.window_steps), interval)
    model.dt_model = window.dt
    rng = np.random.default_rng(config.seed)

    def loss_fn(zb: np.ndarray, nb: np.ndarray) -> LossResult:
        return mlp_onestep_loss(model, zb, nb)

    data = frame_pairs(window)
    rows = _fit(model.groups, loss_fn, data, config, config.epochs, rng, 1, None)
    logger.info("Process completed in %.2f seconds.", time.time() - start)
    return TrainResult(model=model, history=_history(rows))


def train_model(
    dataset: TrajectoryDataset, model: Any, config: TrainConfig
) -> TrainResult:
    """Dispatch to the training loop of the model family."""
    if isinstance(model, (FsHnnOdeModel, FsHnnPdeModel)):
        return train_fs_hnn(dataset, model, config)
    if isinstance(model, HnnModel):
        return train_hnn(dataset, model, config)
    if isinstance(model, MlpDynamicsModel):
        return train_mlp(dataset, model, config)
    raise FshnnError(f"No training loop for {type(model).__name__}.")
