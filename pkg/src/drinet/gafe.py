"""Geometry-aware feature extraction.

Per point and per voxel scale, the raw descriptor is
[offset to the voxel centroid | raw point row (coords + attributes) | offset
to the voxel corner]. Each scale runs an MLP on the descriptor, concatenates
it with its voxel-pooled broadcast, projects to a shared width, and the scales
are summed into the hybrid pointwise feature that seeds the iteration loop.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from . import tensor as T
from .layers import Linear, MLP
from .scatter import gather_nearest, scatter
from .tensor import Tensor
from .voxels import SENTINEL, voxel_center_offset


@dataclass
class GafeConfig:
    scales: list          # meters, ascending
    mlp_width: int
    out_channels: int

    def __post_init__(self):
        if not self.scales:
            raise ValueError("GAFE needs at least one scale")
        if any(s <= 0 for s in self.scales):
            raise ValueError("GAFE scales must be positive")
        if list(self.scales) != sorted(self.scales):
            raise ValueError("GAFE scales must be ascending")


def raw_geometry_feature(pc, vm):
    """N x (3 + 3 + D + 3) raw descriptor at vm's scale; masked rows are zero."""
    valid = vm.point_to_voxel != SENTINEL
    centroids = kernels.segment_mean(pc.coords, vm.sorted_points, vm.offsets)
    centroid_off = np.zeros((pc.n, 3))
    centroid_off[valid] = pc.coords[valid] - centroids[vm.point_to_voxel[valid]]
    raw_point = np.concatenate([pc.coords, pc.feats], axis=1)
    raw_point = np.where(valid[:, None], raw_point, 0.0)
    corner_off = voxel_center_offset(pc, vm).data
    return Tensor(np.concatenate([centroid_off, raw_point, corner_off], axis=1))


class Gafe:
    def __init__(self, rng, feat_dim, cfg, reduce="mean", name="gafe"):
        self.cfg = cfg
        self.reduce = reduce
        in_dim = 3 + 3 + feat_dim + 3
        self.mlps = []
        self.projs = []
        for i in range(len(cfg.scales)):
            self.mlps.append(MLP(rng, [in_dim, cfg.mlp_width], f"{name}.mlp{i}"))
            self.projs.append(
                Linear(rng, 2 * cfg.mlp_width, cfg.out_channels, f"{name}.proj{i}"))

    def __call__(self, pc, vms):
        """Hybrid feature N x out_channels; vms maps scale -> VoxelMap."""
        total = None
        for i, s in enumerate(self.cfg.scales):
            vm = vms[s]
            h = self.mlps[i](raw_geometry_feature(pc, vm))
            pooled = gather_nearest(scatter(h, vm, self.reduce), vm)
            term = self.projs[i](T.concat_cols([h, pooled]))
            total = term if total is None else T.add(total, term)
        return total

    def parameters(self):
        out = []
        for m in self.mlps:
            out.extend(m.parameters())
        for p in self.projs:
            out.extend(p.parameters())
        return out
