"""Small learned building blocks: Linear and (linear + ReLU) MLP stacks.

Weights init uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)] from a seeded
generator, so runs are reproducible.
"""
import numpy as np

from . import tensor as T
from .tensor import Parameter


def init_weight(rng, cin, cout):
    bound = np.sqrt(1.0 / cin)
    return rng.uniform(-bound, bound, size=(cin, cout))


class Linear:
    def __init__(self, rng, cin, cout, name, bias=True):
        self.w = Parameter(init_weight(rng, cin, cout), f"{name}.w")
        self.b = Parameter(np.zeros((1, cout)), f"{name}.b") if bias else None
        self.cin = cin
        self.cout = cout

    def __call__(self, x):
        return T.linear(x, self.w, self.b)

    def parameters(self):
        return [self.w] if self.b is None else [self.w, self.b]


class MLP:
    """linear -> relu, repeated; no activation after the last layer unless asked."""

    def __init__(self, rng, widths, name, final_relu=True):
        self.layers = [
            Linear(rng, cin, cout, f"{name}.{i}")
            for i, (cin, cout) in enumerate(zip(widths[:-1], widths[1:]))
        ]
        self.final_relu = final_relu

    def __call__(self, x):
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_relu:
                x = T.relu(x)
        return x

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]
