"""Differentiable point-to-voxel scatter and voxel-to-point gather.

Scatter reduces all point feature rows sharing a voxel into one voxel row
(mean or max); gather broadcasts each voxel row back to its points. Masked
points are excluded from reductions and receive zero rows on gather.
"""
import numpy as np

from . import kernels
from .tensor import DimensionError, _result, accumulate


def scatter(feats, vm, reduce="mean"):
    """Reduce point features (N x C) to voxel features (N_V x C)."""
    if feats.rows != vm.n_points:
        raise DimensionError(
            f"scatter: {feats.rows} feature rows vs {vm.n_points} mapped points")
    if reduce == "mean":
        out = kernels.segment_mean(feats.data, vm.sorted_points, vm.offsets)
        counts = vm.counts.astype(np.float64)[:, None]

        def bw(g, adj):
            accumulate(adj, feats, kernels.gather_rows(g / counts, vm.point_to_voxel))

        return _result(out, (feats,), bw)
    if reduce == "max":
        out, arg = kernels.segment_max(feats.data, vm.sorted_points, vm.offsets)
        cols = np.arange(feats.cols)

        def bw(g, adj):
            gx = np.zeros_like(feats.data)
            np.add.at(gx, (arg, cols[None, :]), g)
            accumulate(adj, feats, gx)

        return _result(out, (feats,), bw)
    raise ValueError(f"unknown reduce {reduce!r} (want 'mean' or 'max')")


def gather_nearest(vfeats, vm):
    """Copy each voxel row (N_V x C) to its points (N x C); zeros when masked."""
    if vfeats.rows != vm.n_voxels:
        raise DimensionError(
            f"gather: {vfeats.rows} voxel rows vs {vm.n_voxels} voxels")
    out = kernels.gather_rows(vfeats.data, vm.point_to_voxel)

    def bw(g, adj):
        accumulate(adj, vfeats, kernels.scatter_add_rows(g, vm.point_to_voxel, vm.n_voxels))

    return _result(out, (vfeats,), bw)
