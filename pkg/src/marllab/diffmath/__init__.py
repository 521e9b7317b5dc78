from .adam import Adam
from .backend import backend_name, set_backend
from .checks import finite_difference_check
from .tensor import (
    Graph,
    GraphError,
    NumericError,
    Tensor,
    add,
    backward,
    clamp,
    concat,
    const,
    exp_,
    log_,
    matmul,
    mul,
    param,
    reciprocal_pos,
    record,
    relu,
    reshape,
    set_strict_nan,
    softmax,
    square_loss,
    strict_nan_enabled,
    tabs,
    tanh_,
    tmean,
    tslice,
    tsum,
    zeros,
)

__all__ = [
    "Adam", "Graph", "GraphError", "NumericError", "Tensor", "add",
    "backend_name", "backward", "clamp", "concat", "const", "exp_",
    "finite_difference_check", "log_", "matmul", "mul", "param",
    "reciprocal_pos", "record", "relu", "reshape", "set_backend",
    "set_strict_nan", "softmax", "square_loss", "strict_nan_enabled",
    "tabs", "tanh_", "tmean", "tslice", "tsum", "zeros",
]
