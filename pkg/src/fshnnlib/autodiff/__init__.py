from .params import ParamVector, glorot_uniform
from .tape import DualTape, Node, evaluate, grad, mixed_second

__all__ = [
    "DualTape",
    "Node",
    "ParamVector",
    "evaluate",
    "glorot_uniform",
    "grad",
    "mixed_second",
]
