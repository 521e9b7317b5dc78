"""Pure numpy implementations of the hot elementwise kernels.

These are the reference semantics: the compiled twin in ``_kernels_cy``
must produce bit-identical results (same IEEE-754 operations in the same
per-element order, no fused multiply-add).  Reductions, matmul and
transcendentals stay in numpy in both backends so the two never diverge.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def relu_fwd(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0).astype(x.dtype, copy=False)


def relu_bwd_acc(grad: np.ndarray, g: np.ndarray, x: np.ndarray) -> None:
    """grad += g where x > 0 (in place)."""
    grad += g * (x > 0.0)


def tanh_bwd_acc(grad: np.ndarray, g: np.ndarray, y: np.ndarray) -> None:
    """grad += g * (1 - y^2) for y = tanh(x) (in place)."""
    grad += g * (1.0 - y * y)


def abs_bwd_acc(grad: np.ndarray, g: np.ndarray, x: np.ndarray) -> None:
    """grad += g * sign(x) (in place); sign(0) = 0."""
    grad += g * np.sign(x)


def mul_acc(grad: np.ndarray, g: np.ndarray, other: np.ndarray) -> None:
    """grad += g * other (in place), same-shape operands."""
    grad += g * other


def add_acc(grad: np.ndarray, g: np.ndarray) -> None:
    """grad += g (in place), same-shape operands."""
    grad += g


def exp_bwd_acc(grad: np.ndarray, g: np.ndarray, y: np.ndarray) -> None:
    """grad += g * y for y = exp(x) (in place)."""
    grad += g * y


def log_bwd_acc(grad: np.ndarray, g: np.ndarray, x: np.ndarray) -> None:
    """grad += g / x (in place)."""
    grad += g / x


def sq_loss_bwd_acc(
    grad: np.ndarray, diff: np.ndarray, scale: float, sign: float
) -> None:
    """grad += sign * scale * diff (in place); diff = a - b, scale = 2/N * g."""
    grad += (sign * scale) * diff


def adam_step(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    bc1: float,
    bc2: float,
) -> None:
    """One in-place Adam update; bc1/bc2 are the bias corrections 1-beta^t."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / bc1
    vhat = v / bc2
    p -= lr * (mhat / (np.sqrt(vhat) + eps))
