"""Gradient verification against central finite differences.

Training runs in float32, where rounding noise on small-gradient
coordinates would swamp an h=1e-3 difference quotient, so the whole check
runs on a float64 shadow copy of the parameters: the same forward/backward
code is exercised, at a precision where the oracle is trustworthy.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import GraphError, Tensor, backward, record


def finite_difference_check(
    fn: Callable[[], Tensor],
    params: list[Tensor],
    h: float = 1e-3,
    max_coords: int = 64,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error |autodiff - central difference| / (|cd| + 1e-8).

    ``fn`` rebuilds the scalar-output computation from the current contents
    of ``params`` on every call.
    """
    saved_data = [p.data for p in params]
    saved_grad = [p.grad for p in params]
    shadow = [p.data.astype(np.float64) for p in params]
    worst = 0.0
    try:
        for p, s in zip(params, shadow):
            p.data = s
            p.grad = None
        with record():
            out = fn()
            if out.data.size != 1:
                raise GraphError("finite_difference_check needs a scalar-output graph")
            if out._tape is not None:
                backward(out)
            # else: output does not depend on any parameter; grads are zero
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                 for p in params]
        for p in params:
            p.grad = None

        coords = [(i, j) for i, p in enumerate(params) for j in range(p.data.size)]
        if len(coords) > max_coords:
            rng = rng or np.random.default_rng(0)
            picks = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[k] for k in picks]

        for i, j in coords:
            flat = shadow[i].reshape(-1)
            orig = flat[j]
            flat[j] = orig + h
            f_plus = float(fn().data)
            flat[j] = orig - h
            f_minus = float(fn().data)
            flat[j] = orig
            cd = (f_plus - f_minus) / (2.0 * h)
            ad = float(grads[i].reshape(-1)[j])
            err = abs(ad - cd) / (abs(cd) + 1e-8)
            if err > worst:
                worst = err
    finally:
        for p, d, g in zip(params, saved_data, saved_grad):
            p.data = d
            p.grad = g
    return worst
