"""Adam optimizer over diffmath parameter tensors."""

from __future__ import annotations

import numpy as np

from . import backend
from .tensor import GraphError, Tensor


class Adam:
    """Bias-corrected Adam; caller zeroes gradients after each step."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8) -> None:
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise GraphError(f"adam_step: parameter {p.name or p.op!r} has no gradient")
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            backend.adam_step(p.data, p.grad, m, v, self.lr, self.beta1,
                              self.beta2, self.eps, bc1, bc2)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
