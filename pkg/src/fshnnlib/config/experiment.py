"""
Experiment configuration: a tree of dataclasses read from JSON.

Every level rejects unknown keys, and ``ExperimentConfig.to_dict`` returns the
tree with all defaults filled in, which is what gets written next to every
output file.
"""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, TypeVar

from ..errors import ConfigError
from ..systems.registry import make_system

logger = logging.getLogger(__name__)

SEED_ENV = "FSHNN_SEED"
MODEL_FAMILIES = ("fs_hnn", "hnn", "mlp")
LOSS_KINDS = ("auto", "hnn_grad", "pde_onestep", "mlp_onestep")

C = TypeVar("C")


def _check_intervals(intervals: tuple[int, ...]) -> None:
    if not intervals:
        raise ValueError("At least one subsampling interval is required.")
    if any(i < 1 for i in intervals):
        raise ValueError(f"Intervals must be positive, got {list(intervals)}.")
    if any(b <= a for a, b in zip(intervals, intervals[1:])):
        raise ValueError(f"Intervals must be strictly increasing, got {list(intervals)}.")


@dataclass
class SystemConfig:
    name: str = "pendulum"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # Validates the name and the physical parameters, and fills in defaults.
        self.params = make_system(self.name, self.params).params.to_dict()


@dataclass
class GenerationConfig:
    n_traj: int = 8
    n_steps: int = 1000
    dt: float | None = None
    save_every: int = 1
    seed: int = 0
    noise: float | None = None

    def __post_init__(self) -> None:
        if self.n_traj < 1 or self.n_steps < 1 or self.save_every < 1:
            raise ValueError("n_traj, n_steps and save_every must be positive.")
        if self.n_steps % self.save_every:
            raise ValueError(
                f"n_steps ({self.n_steps}) must be a multiple of save_every "
                f"({self.save_every})."
            )
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}.")
        if self.noise is not None and self.noise < 0:
            raise ValueError(f"noise must be non-negative, got {self.noise}.")


@dataclass
class ModelConfig:
    """
    Network sizes. ``hidden`` and ``activation`` apply to the HNN/FS-HNN
    energies, the MLP predictor and the DeepONet branch and trunk alike.
    """

    family: str = "fs_hnn"
    hidden: tuple[int, ...] = (64, 64)
    combiner_hidden: tuple[int, ...] = (16,)
    activation: str = "tanh"
    xi: float = 1.0e-8
    latent: int = 16
    stencil: int = 16
    operator_channels: int = 8
    operator_depth: int = 2
    kernel_size: int = 3

    def __post_init__(self) -> None:
        if self.family not in MODEL_FAMILIES:
            raise ValueError(f"Unknown model family '{self.family}'. Use one of {MODEL_FAMILIES}.")
        self.hidden = tuple(int(w) for w in self.hidden)
        self.combiner_hidden = tuple(int(w) for w in self.combiner_hidden)
        if not self.hidden:
            raise ValueError("model.hidden needs at least one layer.")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}.")


@dataclass
class TrainConfig:
    """
    Optimizer and schedule of the two-phase training.

    ``epochs`` counts passes over each component's data in phase 1 (and the
    single phase of HNN/MLP training); ``combiner_epochs`` counts phase 2.
    ``window_steps`` is the number of leading integrator steps of each
    trajectory used for fitting.
    """

    learning_rate: float = 1.0e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1.0e-8
    epochs: int = 200
    combiner_epochs: int = 100
    batch_size: int = 64
    intervals: tuple[int, ...] = (1, 2, 3)
    window_steps: int = 10
    seed: int = 0
    phase1_loss: str = "auto"
    phase2_loss: str = "auto"
    freeze_components: bool = True
    skip_combiner: bool = False
    union_resolutions: bool = False
    log_every: int = 10

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}.")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {value}.")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}.")
        if self.epochs < 0 or self.combiner_epochs < 0:
            raise ValueError("Epoch counts must be non-negative.")
        if self.batch_size < 1 or self.window_steps < 1 or self.log_every < 1:
            raise ValueError("batch_size, window_steps and log_every must be positive.")
        self.intervals = tuple(int(i) for i in self.intervals)
        _check_intervals(self.intervals)
        for name in ("phase1_loss", "phase2_loss"):
            if getattr(self, name) not in LOSS_KINDS:
                raise ValueError(f"{name} must be one of {LOSS_KINDS}, got {getattr(self, name)!r}.")


@dataclass
class EvalConfig:
    rollout_steps: int = 1000
    n_traj: int | None = None

    def __post_init__(self) -> None:
        if self.rollout_steps < 0:
            raise ValueError(f"rollout_steps must be non-negative, got {self.rollout_steps}.")
        if self.n_traj is not None and self.n_traj < 1:
            raise ValueError(f"n_traj must be positive, got {self.n_traj}.")


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    output_dir: str = "runs"
    system: SystemConfig = field(default_factory=SystemConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        # JSON has no tuples.
        return json.loads(json.dumps(data))


def _build(cls: type[C], data: Any, where: str) -> C:
    if not isinstance(data, dict):
        raise ConfigError(f"'{where}' must be an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in '{where}': {unknown}. Allowed: {sorted(known)}.")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid '{where}': {e}") from e


def config_from_dict(data: dict[str, Any], apply_env: bool = True) -> ExperimentConfig:
    """
    Build and validate an ``ExperimentConfig``.

    With ``apply_env``, an integer ``FSHNN_SEED`` environment variable replaces
    both ``generation.seed`` and ``train.seed``.
    """
    data = dict(data)
    sections = {
        "system": SystemConfig,
        "generation": GenerationConfig,
        "model": ModelConfig,
        "train": TrainConfig,
        "eval": EvalConfig,
    }
    if apply_env and os.environ.get(SEED_ENV):
        raw = os.environ[SEED_ENV]
        try:
            seed = int(raw)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV} must be an integer, got '{raw}'") from e
        logger.info("Seed overridden by %s=%d", SEED_ENV, seed)
        for section in ("generation", "train"):
            data[section] = {**data.get(section, {}), "seed": seed}
    built = {
        key: _build(cls, data.pop(key, {}), key) for key, cls in sections.items()
    }
    return _build(ExperimentConfig, {**data, **built}, "config")


def load_config(path: str, apply_env: bool = True) -> ExperimentConfig:
    """Read an ``ExperimentConfig`` from a JSON file."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file '{path}' not found.")
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file '{path}' is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file '{path}' must hold a JSON object.")
    return config_from_dict(data, apply_env)
