"""Point-to-voxel stage: multi-scale pooling over voxel neighborhoods and the
VoxelConv that forms the next sparse voxel feature map.

Multi-scale pooling, per scale s: pool point features into voxels, broadcast
back, concat with the original rows, and run a small MLP. The per-scale
outputs concatenate in scale order. VoxelConv is a per-point linear transform
followed by a scatter at the block's target scale; only occupied voxels
produce rows.
"""
from . import tensor as T
from .layers import Linear
from .scatter import gather_nearest, scatter
from .svpfe import SparseVoxelTensor


class MultiScalePooling:
    def __init__(self, rng, cin, width, scales, name, reduce="mean"):
        self.scales = list(scales)
        self.reduce = reduce
        self.mlps = [
            Linear(rng, 2 * cin, width, f"{name}.s{i}")
            for i in range(len(self.scales))
        ]

    def __call__(self, feats, vms):
        outs = []
        for s, mlp in zip(self.scales, self.mlps):
            vm = vms[s]
            pooled = gather_nearest(scatter(feats, vm, self.reduce), vm)
            outs.append(T.relu(mlp(T.concat_cols([feats, pooled]))))
        return T.concat_cols(outs) if len(outs) > 1 else outs[0]

    def parameters(self):
        return [p for m in self.mlps for p in m.parameters()]


def voxel_conv(feats, vm, w, reduce="mean"):
    """Per-point linear transform, then scatter into the occupied voxels."""
    transformed = T.linear(feats, w)
    vfeats = scatter(transformed, vm, reduce)
    return SparseVoxelTensor(vm.voxel_coords, vfeats, vm.scale)


class SpvfeBlock:
    """Multi-scale pooling followed by VoxelConv at the block's target scale."""

    def __init__(self, rng, cin, pool_width, out_channels, pooling_scales,
                 target_scale, name, reduce="mean", multiscale=True):
        scales = list(pooling_scales) if multiscale else [target_scale]
        self.pooling = MultiScalePooling(
            rng, cin, pool_width, scales, f"{name}.pool", reduce)
        self.conv = Linear(
            rng, pool_width * len(scales), out_channels, f"{name}.vconv", bias=False)
        self.target_scale = target_scale
        self.reduce = reduce

    def __call__(self, feats, vms):
        pooled = self.pooling(feats, vms)
        return voxel_conv(pooled, vms[self.target_scale], self.conv.w, self.reduce)

    def parameters(self):
        return self.pooling.parameters() + self.conv.parameters()
