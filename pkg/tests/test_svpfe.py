import numpy as np
import pytest

import drinet.tensor as T
from conftest import random_cloud
from drinet.gradcheck import check_scalar_fn
from drinet.scatter import gather_nearest
from drinet.svpfe import (SparseBottleneck, SparseKernel, SparseVoxelTensor,
                          SvpfeBlock, attentive_gather, sparse_conv3d)
from drinet.tensor import Tensor
from drinet.voxels import voxelize


def _dense_conv_oracle(coords, feats, offsets, weights, cin):
    """Dense submanifold reference: scatter into an 8^3 grid, loop the stencil."""
    lo = coords.min(axis=0)
    grid = coords - lo
    shape = tuple(grid.max(axis=0) + 1)
    occupied = {tuple(g): i for i, g in enumerate(grid)}
    out = np.zeros((len(coords), weights.shape[1]))
    for i, g in enumerate(grid):
        for j, d in enumerate(offsets):
            nb = occupied.get(tuple(g + d))
            if nb is not None:
                out[i] += feats[nb] @ weights[j * cin:(j + 1) * cin]
    assert all(s <= 8 for s in shape)
    return out


def _random_voxel_tensor(rng, n, c, span=6):
    coords = np.unique(rng.integers(0, span, size=(n, 3)), axis=0)
    from drinet.voxels import pack_voxel_keys
    order = np.argsort(pack_voxel_keys(coords), kind="stable")
    coords = coords[order]
    feats = Tensor(rng.standard_normal((len(coords), c)))
    return SparseVoxelTensor(coords.astype(np.int64), feats, 1.0)


def test_conv_matches_dense_oracle(rng):
    v = _random_voxel_tensor(rng, 60, 4)
    k = SparseKernel(np.random.default_rng(0), 4, 3, "k")
    got = sparse_conv3d(v, k).feats.data
    want = _dense_conv_oracle(v.coords, v.feats.data, k.offsets, k.weights.data, 4)
    assert np.abs(got - want).max() < 1e-10


def test_conv_preserves_active_set(rng):
    v = _random_voxel_tensor(rng, 40, 3)
    out = sparse_conv3d(v, SparseKernel(np.random.default_rng(1), 3, 5, "k"))
    assert np.array_equal(out.coords, v.coords)
    assert out.feats.data.shape == (len(v.coords), 5)


def test_1x1x1_conv_equals_linear(rng):
    v = _random_voxel_tensor(rng, 30, 4)
    k = SparseKernel(np.random.default_rng(2), 4, 4, "k", kernel_size=1)
    got = sparse_conv3d(v, k).feats.data
    assert np.array_equal(got, v.feats.data @ k.weights.data)


def test_isolated_voxel_sees_only_center_tap(rng):
    # one voxel, no neighbors: only the (0,0,0) stencil entry contributes
    coords = np.array([[5, 5, 5]], dtype=np.int64)
    feats = Tensor(rng.standard_normal((1, 3)))
    k = SparseKernel(np.random.default_rng(3), 3, 2, "k")
    center = int(np.flatnonzero((k.offsets == 0).all(axis=1))[0])
    got = sparse_conv3d(SparseVoxelTensor(coords, feats, 1.0), k).feats.data
    want = feats.data @ k.weights.data[center * 3:(center + 1) * 3]
    assert np.array_equal(got, want)


def test_conv_translation_equivariance(rng):
    v = _random_voxel_tensor(rng, 50, 3)
    k = SparseKernel(np.random.default_rng(4), 3, 3, "k")
    base = sparse_conv3d(v, k).feats.data
    shifted = SparseVoxelTensor(v.coords + np.array([7, -3, 11]), v.feats, 1.0)
    got = sparse_conv3d(shifted, k).feats.data
    assert np.array_equal(got, base)


def test_even_kernel_size_rejected(rng):
    with pytest.raises(ValueError):
        SparseKernel(np.random.default_rng(0), 3, 3, "k", kernel_size=2)


def test_channel_mismatch_rejected(rng):
    v = _random_voxel_tensor(rng, 10, 4)
    k = SparseKernel(np.random.default_rng(0), 3, 3, "k")
    with pytest.raises(T.DimensionError):
        sparse_conv3d(v, k)


def test_bottleneck_zero_weights_is_relu_identity(rng):
    # cin == cout: residual is the identity, all transforms zeroed
    v = _random_voxel_tensor(rng, 25, 6)
    bn = SparseBottleneck(np.random.default_rng(5), 6, 6, "bn")
    assert bn.proj is None
    for p in bn.parameters():
        p.data[:] = 0.0
    out = bn(v)
    assert np.array_equal(out.feats.data, np.maximum(v.feats.data, 0.0))


def test_stacked_bottlenecks_preserve_active_set(rng):
    v = _random_voxel_tensor(rng, 35, 4)
    n = len(v.coords)
    g = np.random.default_rng(6)
    c = 4
    for i in range(4):
        v = SparseBottleneck(g, c, 8, f"bn{i}")(v)
        c = 8
    assert len(v.coords) == n
    assert v.feats.data.shape == (n, 8)


def test_unit_attention_equals_nearest_gather(rng):
    pc = random_cloud(rng, n=80)
    vm = voxelize(pc, 1.0)
    vfeats = Tensor(rng.standard_normal((vm.n_voxels, 5)))
    v = SparseVoxelTensor(vm.voxel_coords, vfeats, 1.0)
    # geometry channel of ones with an all-ones map gives unit attention
    geo = Tensor(np.ones((pc.n, 1)))
    w = Tensor(np.ones((1, 5)))
    got = attentive_gather(v, vm, geo, w).data
    assert np.array_equal(got, gather_nearest(vfeats, vm).data)


def test_attentive_gather_restores_within_voxel_uniqueness(rng):
    # two co-voxel points with distinct geometry rows get distinct features
    coords = np.array([[0.1, 0.1, 0.1], [0.4, 0.4, 0.4]])
    from drinet.voxels import PointCloud
    pc = PointCloud(coords, None)
    vm = voxelize(pc, 1.0)
    assert vm.n_voxels == 1
    v = SparseVoxelTensor(vm.voxel_coords, Tensor(np.full((1, 3), 2.0)), 1.0)
    geo = Tensor(np.array([[1.0], [3.0]]))
    w = Tensor(np.ones((1, 3)))
    out = attentive_gather(v, vm, geo, w).data
    assert np.array_equal(out[0], [2.0, 2.0, 2.0])
    assert np.array_equal(out[1], [6.0, 6.0, 6.0])


def test_block_and_conv_gradients(rng):
    pc = random_cloud(rng, n=20)
    vm = voxelize(pc, 1.0)
    blk = SvpfeBlock(np.random.default_rng(7), 3, 5, 4, "b", n_bottlenecks=1)
    vfeats = rng.standard_normal((vm.n_voxels, 3))
    geo = rng.standard_normal((pc.n, 4))
    r = rng.standard_normal((pc.n, 5))

    def build():
        v = SparseVoxelTensor(vm.voxel_coords, Tensor(vfeats), 1.0)
        _, pts = blk(v, vm, Tensor(geo))
        return T.sum_all(T.mul_elementwise(pts, Tensor(r)))

    assert check_scalar_fn(build, blk.parameters()) < 1e-4
