"""Point clouds, range clipping and the per-scale point-to-voxel mapping.

Voxel indices follow the floor rule v = (floor(x/s), floor(y/s), floor(z/s)).
Grouping is done by a stable sort on packed integer keys, so the voxel list is
always in canonical lexicographic order regardless of input point order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

SENTINEL = -1          # point_to_voxel entry for masked points
IGNORE_ID = 255        # default "unknown" label

# packing constants: coordinates fit comfortably in +-2^20 cells per axis
_PACK_BIAS = 1 << 20
_PACK_BASE = 1 << 21


@dataclass
class PointCloud:
    coords: np.ndarray                 # N x 3 float64, meters
    feats: np.ndarray                  # N x D float64 (D may be 0)
    labels: np.ndarray | None = None   # N int64 class ids
    valid_mask: np.ndarray = None      # N bool

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ValueError(f"coords must be N x 3, got {self.coords.shape}")
        if not np.isfinite(self.coords).all():
            raise ValueError("non-finite coordinates")
        n = len(self.coords)
        if self.feats is None:
            self.feats = np.zeros((n, 0))
        self.feats = np.ascontiguousarray(self.feats, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.int64).reshape(n)
        if self.valid_mask is None:
            self.valid_mask = np.ones(n, dtype=bool)
        self.valid_mask = np.ascontiguousarray(self.valid_mask, dtype=bool).reshape(n)

    @property
    def n(self):
        return len(self.coords)

    def copy(self):
        return PointCloud(
            self.coords.copy(), self.feats.copy(),
            None if self.labels is None else self.labels.copy(),
            self.valid_mask.copy())


@dataclass
class VoxelMap:
    """Grouping of the unmasked points of one cloud at one voxel scale.

    sorted_points lists point indices grouped by voxel (CSR layout via
    offsets); within a group, points follow the canonical lexicographic
    coordinate order, so segment reductions are invariant to the input
    point permutation bit for bit.
    """
    scale: float
    point_to_voxel: np.ndarray    # N int64, SENTINEL for masked points
    voxel_coords: np.ndarray      # N_V x 3 int64, lexicographically sorted
    offsets: np.ndarray           # N_V + 1 int64
    sorted_points: np.ndarray     # int64 indices into the cloud
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.diff(self.offsets)

    @property
    def n_voxels(self):
        return len(self.voxel_coords)

    @property
    def n_points(self):
        return len(self.point_to_voxel)


def pack_voxel_keys(vcoords):
    """Fold integer (ix, iy, iz) rows into one int64 key; order-preserving."""
    v = vcoords.astype(np.int64) + _PACK_BIAS
    if (v < 0).any() or (v >= _PACK_BASE).any():
        raise ValueError("voxel index out of packable range")
    return (v[:, 0] * _PACK_BASE + v[:, 1]) * _PACK_BASE + v[:, 2]


def clip_range(pc, min_xyz, max_xyz, ignore_id=IGNORE_ID):
    """Mask points outside the half-open box [min, max); masked labels become ignore_id."""
    min_xyz = np.asarray(min_xyz, dtype=np.float64)
    max_xyz = np.asarray(max_xyz, dtype=np.float64)
    if not (min_xyz < max_xyz).all():
        raise ValueError("clip_range: min must be < max componentwise")
    out = pc.copy()
    inside = ((pc.coords >= min_xyz) & (pc.coords < max_xyz)).all(axis=1)
    out.valid_mask &= inside
    if out.labels is not None:
        out.labels[~out.valid_mask] = ignore_id
    return out


def voxelize(pc, s):
    """Build the VoxelMap of pc at cubic voxel scale s (meters)."""
    if s <= 0:
        raise ValueError(f"voxel scale must be positive, got {s}")
    n = pc.n
    p2v = np.full(n, SENTINEL, dtype=np.int64)
    valid = np.flatnonzero(pc.valid_mask)
    if len(valid) == 0:
        return VoxelMap(float(s), p2v, np.zeros((0, 3), dtype=np.int64),
                        np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    coords = pc.coords[valid]
    vc = np.floor(coords / float(s)).astype(np.int64)
    keys = pack_voxel_keys(vc)
    # voxel key is the primary sort key; coordinates break ties inside a
    # voxel so the reduction order does not depend on input point order
    order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0], keys))
    sorted_keys = keys[order]
    starts = np.flatnonzero(np.concatenate(([True], sorted_keys[1:] != sorted_keys[:-1])))
    offsets = np.concatenate((starts, [len(sorted_keys)])).astype(np.int64)
    voxel_coords = vc[order[starts]]
    voxel_of_sorted = np.cumsum(np.concatenate(([0], (sorted_keys[1:] != sorted_keys[:-1]).astype(np.int64))))
    sorted_points = valid[order]
    p2v[sorted_points] = voxel_of_sorted
    return VoxelMap(float(s), p2v, voxel_coords, offsets, sorted_points)


def voxel_center_offset(pc, vm):
    """Per-point offset c - s * v inside its voxel; zeros for masked points."""
    if vm.n_points != pc.n:
        raise ValueError("voxel map does not match this cloud")
    out = np.zeros((pc.n, 3))
    valid = vm.point_to_voxel != SENTINEL
    out[valid] = pc.coords[valid] - vm.scale * vm.voxel_coords[vm.point_to_voxel[valid]]
    return Tensor(out)
