"""Minimal float64 autodiff numerics used by the transformer and the logistic learners."""
from .optim import AdamState, ScheduleConfig, adam_step, lr_at
from .tensor import (
    GraphError,
    ShapeError,
    Tensor,
    add,
    as_tensor,
    backward,
    bce_with_logits,
    concat,
    div,
    exp,
    gelu,
    getitem,
    layer_norm,
    log,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax,
    square,
    sub,
    tanh,
    transpose,
    tsum,
)

__all__ = [
    "AdamState", "ScheduleConfig", "adam_step", "lr_at",
    "GraphError", "ShapeError", "Tensor", "add", "as_tensor", "backward",
    "bce_with_logits", "concat", "div", "exp", "gelu", "getitem", "layer_norm",
    "log", "matmul", "mean", "mul", "relu", "reshape", "sigmoid", "softmax",
    "square", "sub", "tanh", "transpose", "tsum",
]
