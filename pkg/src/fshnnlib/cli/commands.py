"""Implementations of the ``fshnn`` subcommands."""

import logging
import os
from typing import Any

import numpy as np

from ..analysis.metrics import evaluate
from ..analysis.tables import (
    collect_reports,
    format_table,
    resolution_label,
    results_table,
    size_table,
)
from ..config import ExperimentConfig, load_config
from ..core.queries import wrap_angle
from ..core.trajectory import TrajectoryDataset
from ..errors import ConfigError
from ..io.container import Record, RecordKind, write_container
from ..io.reports import read_json, write_csv
from ..models import build_model, load_model, model_rollout, save_model
from ..models.hamiltonian import FsHnnOdeModel
from ..models.pde import FsHnnPdeModel
from ..systems import generate_dataset, make_system
from ..training import train_model
from ..utils.paths import sidecar_path

logger = logging.getLogger(__name__)

FAMILY_OF_KIND = {
    "hnn": "hnn",
    "mlp": "mlp",
    "fs_hnn_ode": "fs_hnn",
    "fs_hnn_pde": "fs_hnn",
}


def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def _default_path(config: ExperimentConfig, suffix: str) -> str:
    return os.path.join(config.output_dir, f"{config.name}_{suffix}")


def _system_for(config: ExperimentConfig) -> Any:
    params = dict(config.system.params)
    if config.generation.noise is not None:
        params["noise"] = config.generation.noise
    return make_system(config.system.name, params)


def cmd_gen(config_path: str, out: str | None = None) -> str:
    """Generate the configured dataset; returns the dataset path."""
    config = load_config(config_path)
    system = _system_for(config)
    gen = config.generation
    if gen.dt is None and system.default_dt() is None:
        raise ConfigError(
            f"generation.dt is required for {system.name}, which has no default step."
        )
    dataset = generate_dataset(
        system,
        n_traj=gen.n_traj,
        n_steps=gen.n_steps,
        dt=gen.dt,
        save_every=gen.save_every,
        seed=gen.seed,
        metadata={"config": config.to_dict()},
    )
    path = out or _default_path(config, "data.fsh")
    dataset.save(path)
    return path


def cmd_train(config_path: str, dataset_path: str, out: str | None = None) -> str:
    """Train the configured model on a dataset; writes the checkpoint and loss CSV."""
    config = load_config(config_path)
    logger.info("Loading dataset...")
    dataset = TrajectoryDataset.load(dataset_path)
    rng = np.random.default_rng(np.random.SeedSequence(config.train.seed).spawn(1)[0])
    model = build_model(config.model, config.train, dataset, rng)
    result = train_model(dataset, model, config.train)
    path = out or _default_path(config, "model.fsh")
    provenance = {
        "config": config.to_dict(),
        "dataset": os.path.abspath(dataset_path),
        "system": dataset.system,
        "system_params": dataset.metadata.get("params", {}),
    }
    save_model(path, result.model, provenance)
    write_csv(f"{_stem(path)}_loss.csv", result.history)
    return path


def _resolution(model: Any, train: dict[str, Any], component: int | None) -> str:
    if isinstance(model, (FsHnnOdeModel, FsHnnPdeModel)):
        return resolution_label(list(model.intervals), component)
    if train.get("union_resolutions"):
        return "Com."
    interval = int(train.get("intervals", [1])[0])
    if interval in (1, 2, 3):
        return resolution_label([1, 2, 3], interval - 1)
    return f"I={interval}"


def cmd_rollout(
    checkpoint_path: str,
    dataset_path: str,
    steps: int,
    component: int | None = None,
    n_traj: int | None = None,
    out: str | None = None,
) -> str:
    """
    Roll the checkpoint out from the first frame of every dataset trajectory.

    Wrapped angle components are wrapped back into (-pi, pi] so predictions
    compare with the stored data.
    """
    model = load_model(checkpoint_path)
    if component is not None:
        if not isinstance(model, (FsHnnOdeModel, FsHnnPdeModel)):
            raise ConfigError(
                f"--component needs an FS-HNN checkpoint, got {model.kind}."
            )
        if not 0 <= component < model.K:
            raise ConfigError(
                f"--component must lie in [0, {model.K}), got {component}."
            )
    provenance = read_json(sidecar_path(checkpoint_path)).get("provenance", {})
    logger.info("Loading dataset...")
    dataset = TrajectoryDataset.load(dataset_path)
    z0 = dataset.states[:n_traj, 0]
    pred = model_rollout(model, z0, steps, dataset.dt, component)
    states = pred.states
    if dataset.wrapped_dims:
        dims = list(dataset.wrapped_dims)
        states[..., dims] = wrap_angle(states[..., dims])
    train = provenance.get("config", {}).get("train", {})
    pred = pred.replace(
        states=states,
        system=dataset.system,
        channels=dataset.channels,
        wrapped_dims=dataset.wrapped_dims,
        spacing=dataset.spacing,
        metadata={
            **pred.metadata,
            "family": FAMILY_OF_KIND.get(model.kind, model.kind),
            "resolution": _resolution(model, train, component),
            "seed": train.get("seed"),
            "param_count": model.param_count,
            "checkpoint": os.path.abspath(checkpoint_path),
            "dataset": os.path.abspath(dataset_path),
            "params": dataset.metadata.get("params", {}),
        },
    )
    suffix = "rollout.fsh" if component is None else f"rollout_c{component}.fsh"
    path = out or f"{_stem(checkpoint_path)}_{suffix}"
    pred.save(path)
    return path


def _energy_fn(name: str, truth: TrajectoryDataset) -> Any:
    params = truth.metadata.get("params") if truth.system == name else None
    return make_system(name, params).energy


def cmd_eval(
    pred_path: str, truth_path: str, energy: str | None = None, out: str | None = None
) -> str:
    """Write a MetricReport JSON, its CSV curves and a metrics container."""
    logger.info("Loading dataset...")
    pred = TrajectoryDataset.load(pred_path)
    truth = TrajectoryDataset.load(truth_path)
    label = {
        "system": truth.system or pred.system,
        "model": pred.metadata.get("family", "reference"),
        "resolution": pred.metadata.get("resolution", "Com."),
        "seed": pred.metadata.get("seed"),
        "param_count": pred.metadata.get("param_count"),
    }
    energy_fn = _energy_fn(energy, truth) if energy else None
    report = evaluate(pred, truth, energy_fn, label)
    stem = _stem(out) if out else f"{_stem(pred_path)}_metrics"
    report.save(
        f"{stem}.json",
        {
            "prediction": os.path.abspath(pred_path),
            "truth": os.path.abspath(truth_path),
        },
    )
    write_csv(f"{stem}_curves.csv", report.curves())
    records = [
        Record(RecordKind.METRICS, "time", report.times),
        Record(RecordKind.METRICS, "mse", report.mse_curve),
    ]
    if report.energy_curve is not None:
        records.append(
            Record(RecordKind.METRICS, "energy_deviation", report.energy_curve)
        )
    write_container(f"{stem}.fsh", records)
    logger.info("Rollout MSE %.6e", report.mse)
    return f"{stem}.json"


def cmd_table(pattern: str, out: str | None = None) -> str:
    """
    Aggregate metric reports into the MSE table and the model-size table.

    Returns the markdown of both. With ``out`` the MSE table goes to ``out``
    and the size table to ``<out stem>_sizes.csv``.
    """
    reports = collect_reports(pattern)
    table = results_table(reports)
    text = format_table(table)
    try:
        sizes = size_table(reports)
    except ValueError:
        logger.info("No parameter counts in the reports, size table skipped")
        sizes = None
    if sizes is not None:
        text += "\n\nTrainable parameters\n\n" + format_table(sizes, floatfmt=".0f")
    if out:
        write_csv(out, table)
        logger.info("Table saved to %s", out)
        if sizes is not None:
            write_csv(f"{_stem(out)}_sizes.csv", sizes)
    return text
