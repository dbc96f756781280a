"""Minimal NumPy reverse-mode autodiff engine sized for 1-D CNNs and GRUs."""

from .functional import (
    activation,
    bce_with_logits,
    conv1d,
    dense,
    elu,
    gru_cell,
    relu,
    sigmoid,
    tanh,
)
from .gradcheck import gradcheck, numerical_grad, relative_error
from .optim import Adam, AdamState, adam_step, clip_grad_norm, global_norm
from .tensor import (
    GraphError,
    NdGradError,
    NonFiniteError,
    ShapeError,
    Tensor,
    as_tensor,
    concat,
    get_default_dtype,
    maximum,
    mean,
    no_grad,
    precision,
    set_default_dtype,
    sqrt,
    stack,
    take,
    zero_grad,
)

__all__ = [
    "Adam",
    "AdamState",
    "GraphError",
    "NdGradError",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "activation",
    "adam_step",
    "as_tensor",
    "bce_with_logits",
    "clip_grad_norm",
    "concat",
    "conv1d",
    "dense",
    "elu",
    "get_default_dtype",
    "global_norm",
    "gradcheck",
    "gru_cell",
    "maximum",
    "mean",
    "numerical_grad",
    "no_grad",
    "precision",
    "relative_error",
    "relu",
    "set_default_dtype",
    "sigmoid",
    "sqrt",
    "stack",
    "take",
    "tanh",
    "zero_grad",
]
