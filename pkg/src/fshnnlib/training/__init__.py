from .losses import hnn_grad_loss, mlp_onestep_loss, pde_onestep_loss
from .optim import AdamState, adam_step
from .pipeline import (
    TrainResult,
    train_fs_hnn,
    train_hnn,
    train_mlp,
    train_model,
    union_resolutions,
)
