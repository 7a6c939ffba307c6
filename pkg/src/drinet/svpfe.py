"""Voxel-to-point stage: submanifold sparse 3-D convolution bottlenecks and
attentive gathering back to points.

The convolution is submanifold: the output active set equals the input active
set, so stacking bottlenecks never dilates sparsity. Neighbor lookup uses
binary search over the packed sorted voxel keys.
"""
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import tensor as T
from .layers import Linear, init_weight
from .scatter import gather_nearest
from .tensor import Parameter, Tensor, _result, accumulate
from .voxels import pack_voxel_keys


@dataclass
class SparseVoxelTensor:
    coords: np.ndarray    # N_V x 3 int64, sorted canonical order
    feats: Tensor         # N_V x C
    scale: float

    def __post_init__(self):
        if len(self.coords) != self.feats.rows:
            raise ValueError("coords / feats row mismatch")


class SparseKernel:
    """K^3 stencil weights stored as one (K^3 * Cin) x Cout parameter."""

    def __init__(self, rng, cin, cout, name, kernel_size=3):
        if kernel_size % 2 != 1:
            raise ValueError("kernel size must be odd")
        self.kernel_size = kernel_size
        self.cin = cin
        self.cout = cout
        r = kernel_size // 2
        self.offsets = np.array(
            list(product(range(-r, r + 1), repeat=3)), dtype=np.int64)
        k3 = kernel_size ** 3
        self.weights = Parameter(init_weight(rng, k3 * cin, cout), f"{name}.w")

    def parameters(self):
        return [self.weights]


def _rulebook(coords, offsets):
    """Per stencil offset, the (target, source) active-voxel index pairs."""
    keys = pack_voxel_keys(coords)
    pairs = []
    for delta in offsets:
        qk = pack_voxel_keys(coords + delta)
        idx = np.searchsorted(keys, qk)
        idx_c = np.clip(idx, 0, len(keys) - 1)
        valid = keys[idx_c] == qk
        pairs.append((np.flatnonzero(valid), idx_c[valid]))
    return pairs


def sparse_conv3d(x, kernel):
    """Submanifold convolution: out[z] = sum_d x[z + d] @ W_d over active z + d."""
    if x.feats.cols != kernel.cin:
        raise T.DimensionError(
            f"sparse_conv3d: {x.feats.cols} channels vs kernel cin {kernel.cin}")
    pairs = _rulebook(x.coords, kernel.offsets)
    cin, cout = kernel.cin, kernel.cout
    feats, weights = x.feats, kernel.weights
    out = np.zeros((x.feats.rows, cout))
    for j, (tgt, src) in enumerate(pairs):
        if len(tgt):
            out[tgt] += feats.data[src] @ weights.data[j * cin:(j + 1) * cin]

    def bw(g, adj):
        if feats.requires_grad:
            gx = np.zeros_like(feats.data)
            for j, (tgt, src) in enumerate(pairs):
                if len(tgt):
                    gx[src] += g[tgt] @ weights.data[j * cin:(j + 1) * cin].T
            accumulate(adj, feats, gx)
        if weights.requires_grad:
            gw = np.zeros_like(weights.data)
            for j, (tgt, src) in enumerate(pairs):
                if len(tgt):
                    gw[j * cin:(j + 1) * cin] += feats.data[src].T @ g[tgt]
            accumulate(adj, weights, gw)

    out_feats = _result(out, (feats, weights), bw)
    return SparseVoxelTensor(x.coords, out_feats, x.scale)


class SparseBottleneck:
    """1x1x1 reduce -> 3x3x3 submanifold conv -> 1x1x1 expand, with residual."""

    def __init__(self, rng, cin, cout, name, mid=None, kernel_size=3):
        mid = mid or max(cout // 4, 1)
        self.reduce = Linear(rng, cin, mid, f"{name}.reduce")
        self.kernel = SparseKernel(rng, mid, mid, f"{name}.conv", kernel_size)
        self.expand = Linear(rng, mid, cout, f"{name}.expand")
        self.proj = Linear(rng, cin, cout, f"{name}.proj", bias=False) if cin != cout else None

    def __call__(self, x):
        h = T.relu(self.reduce(x.feats))
        h = T.relu(sparse_conv3d(SparseVoxelTensor(x.coords, h, x.scale), self.kernel).feats)
        h = self.expand(h)
        res = x.feats if self.proj is None else self.proj(x.feats)
        return SparseVoxelTensor(x.coords, T.relu(T.add(h, res)), x.scale)

    def parameters(self):
        out = self.reduce.parameters() + self.kernel.parameters() + self.expand.parameters()
        if self.proj is not None:
            out += self.proj.parameters()
        return out


def attentive_gather(v, vm, geo_feats, w_att):
    """Nearest gather modulated elementwise by learned geometry weights.

    geo_feats is the hybrid per-point geometry feature; w_att maps it to the
    voxel feature width. Points sharing a voxel get distinct outputs again.
    """
    f = gather_nearest(v.feats, vm)
    f_att = T.linear(geo_feats, w_att)
    if f_att.cols != f.cols:
        raise T.DimensionError(
            f"attention width {f_att.cols} vs gathered width {f.cols}")
    return T.mul_elementwise(f, f_att)


class SvpfeBlock:
    """Sparse bottleneck stack followed by (attentive) gathering to points."""

    def __init__(self, rng, cin, channels, geo_channels, name,
                 n_bottlenecks=2, attentive=True):
        self.bottlenecks = []
        c = cin
        for i in range(n_bottlenecks):
            self.bottlenecks.append(
                SparseBottleneck(rng, c, channels, f"{name}.bn{i}"))
            c = channels
        self.attentive = attentive
        self.w_att = Parameter(
            init_weight(rng, geo_channels, channels), f"{name}.att.w")

    def __call__(self, v, vm, geo_feats):
        for bn in self.bottlenecks:
            v = bn(v)
        if self.attentive:
            return v, attentive_gather(v, vm, geo_feats, self.w_att)
        return v, gather_nearest(v.feats, vm)

    def parameters(self):
        out = [p for bn in self.bottlenecks for p in bn.parameters()]
        out.append(self.w_att)
        return out
