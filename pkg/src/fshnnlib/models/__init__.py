from .checkpoint import load_model, save_model
from .combiner import CombinerSpec, combiner_forward
from .hamiltonian import (
    AnalyticHamiltonian,
    FsHnnOdeModel,
    HnnModel,
    energy_and_gradient,
    hamiltonian_vector_field,
    multiscale_hamiltonian,
)
from .mlp_dynamics import MlpDynamicsModel
from .pde import FsHnnPdeModel, field_hamiltonian, fit_normalization, pde_step, project_orthogonal
from .rollout import model_rollout
from .factory import build_model
