import numpy as np
import pytest

import drinet.tensor as T
from conftest import permute_cloud, random_cloud
from drinet.scatter import gather_nearest, scatter
from drinet.tensor import Tensor
from drinet.voxels import PointCloud, voxelize


def loop_scatter(feats, vm, reduce):
    """Per-voxel loop oracle."""
    out = np.zeros((vm.n_voxels, feats.shape[1]))
    for z in range(vm.n_voxels):
        members = vm.sorted_points[vm.offsets[z]:vm.offsets[z + 1]]
        rows = feats[members]
        out[z] = rows.mean(axis=0) if reduce == "mean" else rows.max(axis=0)
    return out


def one_voxel_cloud():
    return PointCloud(np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]]), None)


def test_scatter_mean_one_voxel():
    vm = voxelize(one_voxel_cloud(), 1.0)
    out = scatter(Tensor([[1.0], [3.0]]), vm, "mean")
    assert np.array_equal(out.data, [[2.0]])


def test_scatter_max_value_and_subgradient():
    vm = voxelize(one_voxel_cloud(), 1.0)
    feats = Tensor([[1.0], [3.0]], requires_grad=True)
    out = scatter(feats, vm, "max")
    assert np.array_equal(out.data, [[3.0]])
    T.backward(T.sum_all(out))
    assert np.array_equal(feats.grad, [[0.0], [1.0]])


def test_invalid_reduce_rejected(rng):
    vm = voxelize(random_cloud(rng, 5), 1.0)
    with pytest.raises(ValueError):
        scatter(Tensor(np.zeros((5, 1))), vm, "median")


def test_scatter_matches_loop_oracle(rng):
    pc = random_cloud(rng, n=200, spread=4.0)
    feats = Tensor(rng.uniform(-2, 2, (200, 8)))
    for s in (0.4, 0.8, 1.6):
        vm = voxelize(pc, s)
        for reduce in ("mean", "max"):
            got = scatter(feats, vm, reduce).data
            want = loop_scatter(feats.data, vm, reduce)
            assert np.allclose(got, want, atol=1e-12), (s, reduce)


def test_gather_broadcasts_copies():
    vm = voxelize(PointCloud(np.full((3, 3), 0.2), None), 1.0)
    out = gather_nearest(Tensor([[5.0, 6.0]]), vm)
    assert np.array_equal(out.data, [[5.0, 6.0]] * 3)


def test_gather_scatter_singleton_identity(rng):
    # one point per voxel: gather(scatter(mean)) is exactly the identity
    coords = np.array([[i * 2.0, 0.0, 0.0] for i in range(10)])
    pc = PointCloud(coords, None)
    vm = voxelize(pc, 1.0)
    feats = Tensor(rng.standard_normal((10, 4)))
    assert np.array_equal(gather_nearest(scatter(feats, vm, "mean"), vm).data, feats.data)


def test_gather_grad_counts(rng):
    pc = random_cloud(rng, n=30)
    vm = voxelize(pc, 1.0)
    vfeats = Tensor(rng.standard_normal((vm.n_voxels, 1)), requires_grad=True)
    T.backward(T.sum_all(gather_nearest(vfeats, vm)))
    assert np.array_equal(vfeats.grad[:, 0], vm.counts.astype(float))


def test_masked_points_gather_zeros(rng):
    pc = random_cloud(rng, n=12)
    pc.valid_mask[:4] = False
    vm = voxelize(pc, 1.0)
    out = gather_nearest(Tensor(np.ones((vm.n_voxels, 3))), vm).data
    assert np.array_equal(out[:4], np.zeros((4, 3)))
    assert np.array_equal(out[4:], np.ones((8, 3)))


def test_permutation_invariance_exact(rng):
    pc = random_cloud(rng, n=120)
    feats = rng.standard_normal((120, 6))
    vm = voxelize(pc, 0.8)
    base = {r: scatter(Tensor(feats), vm, r).data for r in ("mean", "max")}
    for _ in range(5):
        perm = rng.permutation(pc.n)
        vmp = voxelize(permute_cloud(pc, perm), 0.8)
        for reduce in ("mean", "max"):
            got = scatter(Tensor(feats[perm]), vmp, reduce).data
            assert np.array_equal(got, base[reduce])


def test_duality_mean_returns_voxel_features_exactly(rng):
    pc = random_cloud(rng, n=100)
    vm = voxelize(pc, 1.2)
    v = Tensor(rng.standard_normal((vm.n_voxels, 5)))
    back = scatter(gather_nearest(v, vm), vm, "mean")
    assert np.array_equal(back.data, v.data)


def test_broadcast_pair_idempotent(rng):
    pc = random_cloud(rng, n=80)
    vm = voxelize(pc, 0.9)
    x = Tensor(rng.standard_normal((80, 3)))
    for reduce in ("mean", "max"):
        once = gather_nearest(scatter(x, vm, reduce), vm)
        twice = gather_nearest(scatter(once, vm, reduce), vm)
        assert np.array_equal(once.data, twice.data)


def test_mean_scatter_linear(rng):
    pc = random_cloud(rng, n=60)
    vm = voxelize(pc, 1.0)
    x = rng.standard_normal((60, 4))
    y = rng.standard_normal((60, 4))
    a, b = 0.7, -1.3
    lhs = scatter(Tensor(a * x + b * y), vm, "mean").data
    rhs = a * scatter(Tensor(x), vm, "mean").data + b * scatter(Tensor(y), vm, "mean").data
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_scatter_row_count_checked(rng):
    vm = voxelize(random_cloud(rng, 10), 1.0)
    with pytest.raises(T.DimensionError):
        scatter(Tensor(np.zeros((9, 2))), vm)
    with pytest.raises(T.DimensionError):
        gather_nearest(Tensor(np.zeros((vm.n_voxels + 1, 2))), vm)
