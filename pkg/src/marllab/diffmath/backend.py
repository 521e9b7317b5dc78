"""Kernel backend selection.

The compiled extension is used when importable; ``MARL_BACKEND=py`` forces
the numpy fallback, ``MARL_BACKEND=cy`` demands the extension (import error
if it is missing).  Both backends are bit-identical by construction, so the
choice affects speed only.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_np

_FORCE = os.environ.get("MARL_BACKEND", "auto").lower()

if _FORCE == "py":
    _impl = _kernels_np
elif _FORCE == "cy":
    from . import _kernels_cy as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np


def backend_name() -> str:
    return _impl.NAME


def set_backend(name: str) -> None:
    """Swap the kernel implementation at runtime (benchmarks and tests)."""
    global _impl
    if name in ("py", "numpy"):
        _impl = _kernels_np
    elif name in ("cy", "cython"):
        from . import _kernels_cy

        _impl = _kernels_cy
    else:
        raise ValueError(f"unknown backend {name!r}")


def _flat_ok(*arrays: np.ndarray) -> bool:
    return all(a.flags.c_contiguous for a in arrays)


# Thin wrappers: the compiled kernels want flat contiguous buffers of one
# dtype; anything else falls back to numpy for that call.

def relu_fwd(x: np.ndarray) -> np.ndarray:
    if _impl is not _kernels_np and _flat_ok(x) and x.dtype in (np.float32, np.float64):
        return _impl.relu_fwd(x)
    return _kernels_np.relu_fwd(x)


def _acc2(fn_name: str, grad: np.ndarray, g: np.ndarray, other: np.ndarray) -> None:
    if (
        _impl is not _kernels_np
        and _flat_ok(grad, g, other)
        and grad.dtype == g.dtype == other.dtype
        and grad.dtype in (np.float32, np.float64)
        and grad.shape == g.shape == other.shape
    ):
        getattr(_impl, fn_name)(grad.reshape(-1), g.reshape(-1), other.reshape(-1))
    else:
        getattr(_kernels_np, fn_name)(grad, g, other)


def relu_bwd_acc(grad, g, x) -> None:
    _acc2("relu_bwd_acc", grad, g, x)


def tanh_bwd_acc(grad, g, y) -> None:
    _acc2("tanh_bwd_acc", grad, g, y)


def abs_bwd_acc(grad, g, x) -> None:
    _acc2("abs_bwd_acc", grad, g, x)


def mul_acc(grad, g, other) -> None:
    _acc2("mul_acc", grad, g, other)


def exp_bwd_acc(grad, g, y) -> None:
    _acc2("exp_bwd_acc", grad, g, y)


def log_bwd_acc(grad, g, x) -> None:
    _acc2("log_bwd_acc", grad, g, x)


def add_acc(grad: np.ndarray, g: np.ndarray) -> None:
    if (
        _impl is not _kernels_np
        and _flat_ok(grad, g)
        and grad.dtype == g.dtype
        and grad.dtype in (np.float32, np.float64)
        and grad.shape == g.shape
    ):
        _impl.add_acc(grad.reshape(-1), g.reshape(-1))
    else:
        _kernels_np.add_acc(grad, g)


def sq_loss_bwd_acc(grad, diff, scale: float, sign: float) -> None:
    if (
        _impl is not _kernels_np
        and _flat_ok(grad, diff)
        and grad.dtype == diff.dtype
        and grad.dtype in (np.float32, np.float64)
        and grad.shape == diff.shape
    ):
        _impl.sq_loss_bwd_acc(grad.reshape(-1), diff.reshape(-1), scale, sign)
    else:
        _kernels_np.sq_loss_bwd_acc(grad, diff, scale, sign)


def adam_step(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2) -> None:
    if (
        _impl is not _kernels_np
        and _flat_ok(p, g, m, v)
        and p.dtype == g.dtype == m.dtype == v.dtype
        and p.dtype in (np.float32, np.float64)
    ):
        _impl.adam_step(
            p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1),
            lr, beta1, beta2, eps, bc1, bc2,
        )
    else:
        _kernels_np.adam_step(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2)
