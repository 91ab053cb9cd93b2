"""Minimal reverse-mode autodiff core and layer primitives."""
from .gradcheck import grad_check
from .layers import MLP, ConvNet, Linear, LSTMCell, Module, Standardize, conv2d, lstm_cell, maxpool2d, split_cols
from .optim import Adam, AdamState, adam_step
from .tensor import (
    DimensionError,
    NumericError,
    Tensor,
    as_tensor,
    clip,
    concat,
    exp,
    leaky_relu,
    linear,
    log,
    log_softmax,
    no_grad,
    norm,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    stack,
    take_rows,
    tanh,
    transpose,
)

__all__ = [
    "Adam", "AdamState", "ConvNet", "DimensionError", "LSTMCell", "Linear", "MLP", "Module", "Standardize",
    "NumericError", "Tensor", "adam_step", "as_tensor", "clip", "concat", "conv2d", "exp",
    "grad_check", "leaky_relu", "linear", "log", "log_softmax", "lstm_cell", "maxpool2d",
    "no_grad", "norm", "relu", "reshape", "sigmoid", "softmax", "split_cols", "sqrt", "stack",
    "take_rows", "tanh", "transpose",
]
