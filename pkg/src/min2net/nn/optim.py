"""Adam optimizer."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .params import Param


class Adam:
    """Standard Adam with bias correction.

    The learning rate is read from the instance on every step so an external
    scheduler may mutate it between steps.
    """

    def __init__(self, params: list[Param], learning_rate=1e-3,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        if learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(
                    f"non-finite gradient in parameter {p.name!r}")
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m += (1 - b1) * (g - m)
            v += (1 - b2) * (g * g - v)
            p.value -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
