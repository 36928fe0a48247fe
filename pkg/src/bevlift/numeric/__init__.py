from .tensor import (
    ComputeGraph, ContractError, NonFiniteError, ShapeError, Tensor, backward, concat,
    dropout, exp, finite_checks, index_select, layer_norm, log, matmul, no_grad, relu,
    sigmoid, softmax, unfold2d,
)
from .optim import Adam, AdamState, PlateauHalving, adam_step
from .gradcheck import grad_check, grad_check_params
from .checkpoint import CheckpointError, load_params, save_params, atomic_write

__all__ = [
    "Tensor", "ComputeGraph", "ContractError", "NonFiniteError", "ShapeError", "backward",
    "concat", "dropout", "exp", "finite_checks", "index_select", "layer_norm", "log",
    "matmul", "no_grad", "relu", "sigmoid", "softmax", "unfold2d",
    "Adam", "AdamState", "PlateauHalving", "adam_step", "grad_check", "grad_check_params",
    "CheckpointError", "load_params", "save_params", "atomic_write",
]
