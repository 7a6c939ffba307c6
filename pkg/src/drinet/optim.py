"""Adam with decoupled weight decay.

The decay step (w -= lr * wd * w) runs before the moment update, so the
moments track the raw gradients only.
"""
import numpy as np


class Adam:
    def __init__(self, params, lr=2e-4, weight_decay=1e-4,
                 betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            if self.weight_decay:
                p.data = p.data - self.lr * self.weight_decay * p.data
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_arrays(self):
        """Optimizer state as named 2-D arrays (for resumable checkpoints)."""
        out = {"adam.t": np.array([[float(self.t)]])}
        for p, m, v in zip(self.params, self.m, self.v):
            out[f"adam.m.{p.name}"] = m
            out[f"adam.v.{p.name}"] = v
        return out

    def load_state_arrays(self, arrays):
        self.t = int(arrays["adam.t"][0, 0])
        for i, p in enumerate(self.params):
            self.m[i] = arrays[f"adam.m.{p.name}"].copy()
            self.v[i] = arrays[f"adam.v.{p.name}"].copy()
