"""Adam with decoupled weight decay, over a dict of named numpy arrays."""
from __future__ import annotations

import numpy as np


class AdamW:
    """AdamW (Loshchilov & Hutter) with per-parameter learning rates.

    ``lr`` may be a float or a callable mapping a parameter name to its rate.
    A parameter whose gradient is ``None`` in a step is left completely
    untouched: no decay, no moment update, no step count.
    """

    def __init__(self, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        if isinstance(lr, (int, float)) and lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.state: dict[str, dict] = {}

    def rate(self, name: str) -> float:
        return self.lr(name) if callable(self.lr) else self.lr

    def step(self, params: dict, grads: dict) -> None:
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                continue
            st = self.state.get(name)
            if st is None:
                st = self.state[name] = {"t": 0, "m": np.zeros_like(p), "v": np.zeros_like(p)}
            st["t"] += 1
            t = st["t"]
            m, v = st["m"], st["v"]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)

            lr = self.rate(name)
            if self.weight_decay:
                p *= 1.0 - lr * self.weight_decay
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype, copy=False)
