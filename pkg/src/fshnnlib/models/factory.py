import logging

import numpy as np

from ..config import ModelConfig, TrainConfig
from ..core.trajectory import TrajectoryDataset
from ..errors import ConfigError
from .hamiltonian import FsHnnOdeModel, HnnModel
from .mlp_dynamics import MlpDynamicsModel
from .pde import FsHnnPdeModel

logger = logging.getLogger(__name__)

Model = HnnModel | FsHnnOdeModel | FsHnnPdeModel | MlpDynamicsModel


def build_model(
    model_config: ModelConfig,
    train_config: TrainConfig,
    dataset: TrajectoryDataset,
    rng: np.random.Generator,
) -> Model:
    """
    Initialize the configured model family for the states of ``dataset``.

    Phase-space datasets take every family; field datasets only ``fs_hnn``,
    which then becomes an ``FsHnnPdeModel`` on the dataset's grid.
    """
    family = model_config.family
    mc = model_config
    if dataset.is_field:
        if family != "fs_hnn":
            raise ConfigError(f"Model family '{family}' cannot learn field datasets.")
        channels, ny, nx = dataset.state_shape
        model: Model = FsHnnPdeModel.create(
            channels,
            (ny, nx),
            list(train_config.intervals),
            rng,
            latent=mc.latent,
            hidden=mc.hidden,
            stencil=mc.stencil,
            operator_channels=mc.operator_channels,
            operator_depth=mc.operator_depth,
            kernel_size=mc.kernel_size,
            combiner_hidden=mc.combiner_hidden,
            activation=mc.activation,
            xi=mc.xi,
            dt_model=dataset.dt,
        )
    elif dataset.state_dim % 2:
        raise ConfigError(f"Phase-space states need an even width, got {dataset.state_dim}.")
    elif family == "fs_hnn":
        model = FsHnnOdeModel.create(
            dataset.state_dim // 2,
            list(train_config.intervals),
            mc.hidden,
            mc.combiner_hidden,
            rng,
            mc.activation,
        )
    elif family == "hnn":
        model = HnnModel.create(dataset.state_dim // 2, mc.hidden, rng, mc.activation)
    else:
        model = MlpDynamicsModel.create(
            dataset.state_dim, mc.hidden, rng, mc.activation, dataset.dt
        )
    logger.info("Built %s model for %s data", model.kind, dataset.system or "unnamed")
    return model
