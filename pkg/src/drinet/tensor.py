"""Dense 2-D tensors with reverse-mode differentiation.

Every value is a row-major float64 matrix. Ops build an implicit tape by
linking output tensors to their parents together with a backward rule;
``backward`` on a 1x1 loss walks the tape in reverse topological order and
accumulates adjoints into ``grad`` of every reachable tensor that requires
gradients. Gradients accumulate across calls (+=); use ``zero_grads`` between
steps.
"""
from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class ContractError(ValueError):
    """An operation was called outside its contract."""


def _as_matrix(data):
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D value, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("non-finite values rejected at op boundary")
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = _as_matrix(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._backward = backward

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.shape != (1, 1):
            raise ContractError(f"item() on shape {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    __slots__ = ("name",)

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True)
        self.name = name


def _result(data, parents, backward):
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs, parents=tuple(parents),
                  backward=backward if needs else None)


def accumulate(adjoints, t, g):
    """Add adjoint g for tensor t (no-op unless t participates in grads)."""
    if not t.requires_grad:
        return
    key = id(t)
    if key in adjoints:
        adjoints[key] += g
    else:
        adjoints[key] = np.array(g, dtype=np.float64)


def _toposort(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Backpropagate from a scalar loss; accumulates into .grad buffers."""
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a 1x1 loss, got {loss.shape}")
    order = _toposort(loss)
    adjoints = {id(loss): np.ones((1, 1))}
    for node in reversed(order):
        g = adjoints.get(id(node))
        if g is None or node._backward is None:
            continue
        node._backward(g, adjoints)
    for node in order:
        if node.requires_grad and id(node) in adjoints:
            g = adjoints[id(node)]
            node.grad = g if node.grad is None else node.grad + g


def zero_grads(params):
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# ops
# ---------------------------------------------------------------------------

def linear(x, w, b=None):
    """out = x @ w (+ b broadcast over rows)."""
    if x.cols != w.rows:
        raise DimensionError(f"linear: {x.shape} @ {w.shape}")
    if b is not None and b.shape != (1, w.cols):
        raise DimensionError(f"linear bias shape {b.shape}, want (1, {w.cols})")
    out = x.data @ w.data
    if b is not None:
        out = out + b.data

    def bw(g, adj):
        accumulate(adj, x, g @ w.data.T)
        accumulate(adj, w, x.data.T @ g)
        if b is not None:
            accumulate(adj, b, g.sum(axis=0, keepdims=True))

    parents = (x, w) if b is None else (x, w, b)
    return _result(out, parents, bw)


def relu(x):
    mask = x.data > 0.0

    def bw(g, adj):
        accumulate(adj, x, g * mask)

    return _result(np.where(mask, x.data, 0.0), (x,), bw)


def add(x, y):
    if x.shape != y.shape:
        raise DimensionError(f"add: {x.shape} vs {y.shape}")

    def bw(g, adj):
        accumulate(adj, x, g)
        accumulate(adj, y, g)

    return _result(x.data + y.data, (x, y), bw)


def mul_elementwise(x, y):
    if x.shape != y.shape:
        raise DimensionError(f"mul_elementwise: {x.shape} vs {y.shape}")

    def bw(g, adj):
        accumulate(adj, x, g * y.data)
        accumulate(adj, y, g * x.data)

    return _result(x.data * y.data, (x, y), bw)


def scale(x, alpha):
    alpha = float(alpha)

    def bw(g, adj):
        accumulate(adj, x, g * alpha)

    return _result(x.data * alpha, (x,), bw)


def concat_cols(xs):
    xs = list(xs)
    if not xs:
        raise DimensionError("concat_cols of nothing")
    n = xs[0].rows
    if any(x.rows != n for x in xs):
        raise DimensionError("concat_cols: row counts differ")
    splits = np.cumsum([x.cols for x in xs])[:-1]

    def bw(g, adj):
        for x, piece in zip(xs, np.split(g, splits, axis=1)):
            accumulate(adj, x, piece)

    return _result(np.concatenate([x.data for x in xs], axis=1), xs, bw)


def slice_cols(x, start, stop):
    def bw(g, adj):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        accumulate(adj, x, full)

    return _result(x.data[:, start:stop], (x,), bw)


def slice_rows(x, index):
    index = np.asarray(index, dtype=np.int64)

    def bw(g, adj):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        accumulate(adj, x, full)

    return _result(x.data[index], (x,), bw)


def reduce_max_rows(x):
    """Column-wise max over all rows -> 1xC. Grad routes to the first argmax."""
    arg = np.argmax(x.data, axis=0)
    out = x.data[arg, np.arange(x.cols)].reshape(1, -1)

    def bw(g, adj):
        gx = np.zeros_like(x.data)
        gx[arg, np.arange(x.cols)] = g[0]
        accumulate(adj, x, gx)

    return _result(out, (x,), bw)


def softmax_rows(x):
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def bw(g, adj):
        dot = (g * p).sum(axis=1, keepdims=True)
        accumulate(adj, x, p * (g - dot))

    return _result(p, (x,), bw)


def sum_all(x):
    def bw(g, adj):
        accumulate(adj, x, np.full_like(x.data, g[0, 0]))

    return _result(np.array([[x.data.sum()]]), (x,), bw)
