"""Benchmark harness: scatter / gather / attentive gathering timings over
point counts, a reference trilinear gather for the cost comparison, and a
compiled-vs-NumPy kernel backend comparison.

The trilinear gather lives only here; the model path uses nearest gathering
plus the learned attention weights.
"""
import time

import numpy as np

from . import kernels
from . import tensor as T
from .scatter import gather_nearest, scatter
from .svpfe import SparseVoxelTensor, attentive_gather
from .tensor import Tensor
from .voxels import PointCloud, pack_voxel_keys, voxelize


def trilinear_gather_reference(vfeats, vm, coords):
    """Interpolate voxel features at point positions from the 8 surrounding
    voxel centers (missing neighbors renormalized away)."""
    s = vm.scale
    keys = pack_voxel_keys(vm.voxel_coords)
    # fractional position relative to the lower voxel-center lattice
    u = coords / s - 0.5
    base = np.floor(u).astype(np.int64)
    frac = u - base
    out = np.zeros((len(coords), vfeats.shape[1]))
    wsum = np.zeros(len(coords))
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corner = base + np.array([dx, dy, dz])
                w = (np.where(dx, frac[:, 0], 1 - frac[:, 0])
                     * np.where(dy, frac[:, 1], 1 - frac[:, 1])
                     * np.where(dz, frac[:, 2], 1 - frac[:, 2]))
                qk = pack_voxel_keys(corner)
                idx = np.searchsorted(keys, qk)
                idx_c = np.clip(idx, 0, len(keys) - 1)
                hit = keys[idx_c] == qk
                out[hit] += w[hit, None] * vfeats[idx_c[hit]]
                wsum += np.where(hit, w, 0.0)
    nz = wsum > 0
    out[nz] /= wsum[nz, None]
    return out


def _timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _random_instance(n_points, scale, channels=32, seed=0):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(-48, 48, (n_points, 3))
    coords[:, 2] = rng.uniform(-3, 1.8, n_points)
    pc = PointCloud(coords, rng.uniform(0, 1, (n_points, 1)))
    vm = voxelize(pc, scale)
    feats = Tensor(rng.standard_normal((n_points, channels)))
    vfeats = Tensor(rng.standard_normal((vm.n_voxels, channels)))
    return pc, vm, feats, vfeats


def run_op_bench(ops, n_points, scale, channels=32, repeats=3, seed=0):
    """Rows of (op, n_points, n_voxels, seconds, points_per_sec)."""
    pc, vm, feats, vfeats = _random_instance(n_points, scale, channels, seed)
    rng = np.random.default_rng(seed + 1)
    geo = Tensor(rng.standard_normal((n_points, channels)))
    w_att = Tensor(rng.standard_normal((channels, channels)))
    v = SparseVoxelTensor(vm.voxel_coords, vfeats, vm.scale)
    table = {
        "scatter": lambda: scatter(feats, vm, "mean"),
        "gather": lambda: gather_nearest(vfeats, vm),
        "attentive": lambda: attentive_gather(v, vm, geo, w_att),
        "trilinear": lambda: trilinear_gather_reference(vfeats.data, vm, pc.coords),
    }
    rows = []
    for op in ops:
        secs = _timeit(table[op], repeats)
        rows.append((op, n_points, vm.n_voxels, secs, n_points / secs))
    return rows


def run_backend_bench(n_points, scale, channels=32, repeats=3, seed=0):
    """Compare the compiled and NumPy kernel backends on the raw segment ops."""
    _, vm, feats, vfeats = _random_instance(n_points, scale, channels, seed)
    rows = []
    for name, mod in kernels.available_backends().items():
        for op, fn in (
            ("segment_sum", lambda m=mod: m.segment_sum(feats.data, vm.sorted_points, vm.offsets)),
            ("segment_max", lambda m=mod: m.segment_max(feats.data, vm.sorted_points, vm.offsets)),
            ("gather_rows", lambda m=mod: m.gather_rows(vfeats.data, vm.point_to_voxel)),
        ):
            secs = _timeit(fn, repeats)
            rows.append((f"{op}[{name}]", n_points, vm.n_voxels, secs, n_points / secs))
    return rows


def format_rows(rows):
    lines = [f"{'op':<24} {'points':>9} {'voxels':>9} {'seconds':>10} {'points/s':>12}"]
    for op, n, nv, secs, rate in rows:
        lines.append(f"{op:<24} {n:>9} {nv:>9} {secs:>10.5f} {rate:>12.0f}")
    return "\n".join(lines)
