from .deeponet import DeepONetSpec, deeponet_hamiltonian, deeponet_record
from .mlp import MlpSpec, mlp_forward, mlp_record
from .resconv import ResConvSpec, resconv_forward, resconv_record
