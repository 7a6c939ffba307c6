"""Central finite-difference checks for every differentiable op.

Each check builds a small random instance, projects the op output onto a
fixed random direction to get a scalar, and compares the analytic gradient of
that scalar with central differences (h = 1e-5). The reported number is the
max relative error over elements where |fd| > 1e-8.
"""
import numpy as np

from . import tensor as T
from .losses import cross_entropy, lovasz_softmax
from .scatter import gather_nearest, scatter
from .svpfe import SparseBottleneck, SparseKernel, SparseVoxelTensor, sparse_conv3d, attentive_gather
from .spvfe import MultiScalePooling
from .tensor import Parameter, Tensor
from .voxels import PointCloud, voxelize

H = 1e-5
FD_FLOOR = 1e-8


def numeric_grad(f, x, h=H):
    """Central finite differences of scalar f over array x, elementwise."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def max_rel_error(analytic, numeric, floor=FD_FLOOR):
    mask = np.abs(numeric) > floor
    if not mask.any():
        return 0.0
    denom = np.abs(numeric[mask])
    return float(np.max(np.abs(analytic[mask] - numeric[mask]) / denom))


def check_scalar_fn(build, wrt):
    """Compare analytic vs numeric gradients of build() w.r.t. listed tensors.

    build() must construct the graph from the current .data of the tensors in
    wrt and return the scalar output tensor.
    """
    loss = build()
    T.zero_grads(wrt)
    T.backward(loss)
    worst = 0.0
    for t in wrt:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numeric_grad(lambda: build().item(), t.data)
        worst = max(worst, max_rel_error(analytic, numeric))
    return worst


def _projected(out, rng):
    r = Tensor(rng.standard_normal(out.shape))
    return T.sum_all(T.mul_elementwise(out, r)), r


def _random_cloud(rng, n=24, spread=2.0):
    coords = rng.uniform(-spread, spread, (n, 3))
    return PointCloud(coords, rng.uniform(-1, 1, (n, 1)))


def _sparse_input(rng, n=20, c=3):
    pc = _random_cloud(rng, n)
    vm = voxelize(pc, 1.0)
    feats = Tensor(rng.uniform(-2, 2, (vm.n_voxels, c)), requires_grad=True)
    return vm, feats


def run_all(seed=0):
    """Worst relative FD error per registered differentiable op."""
    rng = np.random.default_rng(seed)
    results = {}

    x = Tensor(rng.uniform(-2, 2, (5, 4)), requires_grad=True)
    w = Tensor(rng.uniform(-2, 2, (4, 3)), requires_grad=True)
    b = Tensor(rng.uniform(-2, 2, (1, 3)), requires_grad=True)
    r = Tensor(rng.standard_normal((5, 3)))
    results["linear"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(T.linear(x, w, b), r)), [x, w, b])

    x2 = Tensor(rng.uniform(-2, 2, (6, 5)), requires_grad=True)
    r2 = Tensor(rng.standard_normal((6, 5)))
    results["relu"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(T.relu(x2), r2)), [x2])
    results["softmax_rows"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(T.softmax_rows(x2), r2)), [x2])

    y2 = Tensor(rng.uniform(-2, 2, (6, 5)), requires_grad=True)
    results["add"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(T.add(x2, y2), r2)), [x2, y2])
    results["mul_elementwise"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(T.mul_elementwise(x2, y2), r2)), [x2, y2])

    rmax = Tensor(rng.standard_normal((1, 5)))
    results["reduce_max_rows"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(T.reduce_max_rows(x2), rmax)), [x2])

    pc = _random_cloud(rng, 30)
    vm = voxelize(pc, 1.0)
    pf = Tensor(rng.uniform(-2, 2, (30, 4)), requires_grad=True)
    rv = Tensor(rng.standard_normal((vm.n_voxels, 4)))
    results["scatter_mean"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(scatter(pf, vm, "mean"), rv)), [pf])
    results["scatter_max"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(scatter(pf, vm, "max"), rv)), [pf])

    vf = Tensor(rng.uniform(-2, 2, (vm.n_voxels, 4)), requires_grad=True)
    rp = Tensor(rng.standard_normal((30, 4)))
    results["gather_nearest"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(gather_nearest(vf, vm), rp)), [vf])

    geo = Tensor(rng.uniform(-2, 2, (30, 6)), requires_grad=True)
    w_att = Tensor(rng.uniform(-2, 2, (6, 4)), requires_grad=True)
    results["attentive_gather"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(
            attentive_gather(SparseVoxelTensor(vm.voxel_coords, vf, vm.scale),
                             vm, geo, w_att), rp)),
        [vf, geo, w_att])

    wv = Tensor(rng.uniform(-2, 2, (4, 3)), requires_grad=True)
    rvc = Tensor(rng.standard_normal((vm.n_voxels, 3)))
    results["voxel_conv"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(
            scatter(T.linear(pf, wv), vm, "mean"), rvc)), [pf, wv])

    svm, sfeats = _sparse_input(rng, 20, 3)
    kern = SparseKernel(np.random.default_rng(seed + 1), 3, 2, "gc.kern")
    rs = Tensor(rng.standard_normal((svm.n_voxels, 2)))
    sx = SparseVoxelTensor(svm.voxel_coords, sfeats, svm.scale)
    results["sparse_conv3d"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(sparse_conv3d(sx, kern).feats, rs)),
        [sfeats, kern.weights])

    bn = SparseBottleneck(np.random.default_rng(seed + 2), 3, 5, "gc.bn")
    rb = Tensor(rng.standard_normal((svm.n_voxels, 5)))
    results["sparse_bottleneck"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(bn(sx).feats, rb)),
        [sfeats] + bn.parameters())

    msp = MultiScalePooling(np.random.default_rng(seed + 3), 4, 3, [0.5, 1.0], "gc.msp")
    vms = {0.5: voxelize(pc, 0.5), 1.0: vm}
    rm = Tensor(rng.standard_normal((30, 6)))
    results["multiscale_pooling"] = check_scalar_fn(
        lambda: T.sum_all(T.mul_elementwise(msp(pf, vms), rm)),
        [pf] + msp.parameters())

    k = 4
    logits = Tensor(rng.uniform(-2, 2, (12, k)), requires_grad=True)
    labels = rng.integers(0, k, 12)
    labels[0] = 255  # exercise the ignore path
    results["cross_entropy"] = check_scalar_fn(
        lambda: cross_entropy(T.softmax_rows(logits), labels, 255), [logits])
    results["lovasz_softmax"] = check_scalar_fn(
        lambda: lovasz_softmax(T.softmax_rows(logits), labels, 255), [logits])

    return results
