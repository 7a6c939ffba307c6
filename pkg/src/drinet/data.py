"""Data: synthetic labeled scenes, augmentation, and LiDAR binary file I/O.

Frame files are consecutive little-endian float32 (x, y, z, intensity)
records. Label files are little-endian uint32 records whose low 16 bits carry
the semantic id; ids can be remapped through a "raw_id train_id" text table.
"""
from dataclasses import dataclass

import numpy as np

from .voxels import IGNORE_ID, PointCloud


class FormatError(ValueError):
    pass


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------

# class layout: 0 ground plane, 1 box clusters, 2 pole cylinders, 3 scattered noise
GROUND, BOX, POLE, NOISE = 0, 1, 2, 3


@dataclass
class SyntheticSceneSpec:
    n_points: int = 4096
    extent: float = 20.0          # scene is a square of side 2*extent
    n_boxes: int = 4
    n_poles: int = 6
    noise_fraction: float = 0.1
    seed: int = 0


def generate_scene(spec):
    """Deterministic labeled outdoor-style scene (4 classes, intensity feature)."""
    rng = np.random.default_rng(spec.seed)
    n_noise = int(spec.n_points * spec.noise_fraction)
    n_struct = spec.n_points - n_noise
    n_box = n_struct // 3
    n_pole = n_struct // 6
    n_ground = n_struct - n_box - n_pole

    e = spec.extent
    ground = np.column_stack([
        rng.uniform(-e, e, n_ground),
        rng.uniform(-e, e, n_ground),
        rng.normal(0.0, 0.05, n_ground),
    ])

    centers = rng.uniform(-0.7 * e, 0.7 * e, size=(spec.n_boxes, 2))
    sizes = rng.uniform(1.0, 3.0, size=(spec.n_boxes, 3))
    which = rng.integers(0, spec.n_boxes, n_box)
    boxes = np.column_stack([
        centers[which, 0] + rng.uniform(-0.5, 0.5, n_box) * sizes[which, 0],
        centers[which, 1] + rng.uniform(-0.5, 0.5, n_box) * sizes[which, 1],
        rng.uniform(0.0, 1.0, n_box) * sizes[which, 2],
    ])

    pole_xy = rng.uniform(-0.8 * e, 0.8 * e, size=(spec.n_poles, 2))
    which_p = rng.integers(0, spec.n_poles, n_pole)
    theta = rng.uniform(0, 2 * np.pi, n_pole)
    poles = np.column_stack([
        pole_xy[which_p, 0] + 0.15 * np.cos(theta),
        pole_xy[which_p, 1] + 0.15 * np.sin(theta),
        rng.uniform(0.0, 5.0, n_pole),
    ])

    noise = np.column_stack([
        rng.uniform(-e, e, n_noise),
        rng.uniform(-e, e, n_noise),
        rng.uniform(0.0, 6.0, n_noise),
    ])

    coords = np.concatenate([ground, boxes, poles, noise])
    labels = np.concatenate([
        np.full(n_ground, GROUND), np.full(n_box, BOX),
        np.full(n_pole, POLE), np.full(n_noise, NOISE)]).astype(np.int64)
    intensity = rng.uniform(0.0, 1.0, (spec.n_points, 1))
    # per-class intensity bias so the attribute channel carries signal too
    intensity[:, 0] += 0.2 * labels
    return PointCloud(coords, intensity, labels)


def generate_shape(family, n_points=512, seed=0):
    """Point cloud of one of two separable shape families (classification).

    family 0: spherical shell; family 1: cube surface.
    """
    rng = np.random.default_rng(seed)
    if family == 0:
        d = rng.normal(size=(n_points, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        coords = d * rng.uniform(0.9, 1.1, (n_points, 1))
    elif family == 1:
        face = rng.integers(0, 6, n_points)
        uv = rng.uniform(-1.0, 1.0, (n_points, 2))
        coords = np.empty((n_points, 3))
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        for a in range(3):
            sel = axis == a
            others = [b for b in range(3) if b != a]
            coords[sel, a] = sign[sel]
            coords[sel, others[0]] = uv[sel, 0]
            coords[sel, others[1]] = uv[sel, 1]
    else:
        raise DataError(f"unknown shape family {family}")
    coords = coords + np.array([0.0, 0.0, 1.5])   # keep z above ground
    return PointCloud(coords, rng.uniform(0.0, 1.0, (n_points, 1)))


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

@dataclass
class AugmentFlags:
    rotation: bool = True
    flip: bool = True
    scaling: bool = False     # indoor-style extras
    jitter: bool = False


def augment(pc, flags, rng):
    """Global yaw rotation, per-axis flips, optional scaling and jitter."""
    out = pc.copy()
    coords = out.coords
    if flags.rotation:
        a = rng.uniform(0.0, 2 * np.pi)
        c, s = np.cos(a), np.sin(a)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        coords = coords @ rot.T
    if flags.flip:
        if rng.random() < 0.5:
            coords = coords * np.array([-1.0, 1.0, 1.0])
        if rng.random() < 0.5:
            coords = coords * np.array([1.0, -1.0, 1.0])
    if flags.scaling:
        coords = coords * rng.uniform(0.95, 1.05)
    if flags.jitter:
        coords = coords + rng.normal(0.0, 0.01, coords.shape)
    out.coords = np.ascontiguousarray(coords)
    return out


# ---------------------------------------------------------------------------
# LiDAR binary I/O
# ---------------------------------------------------------------------------

def read_lidar_bin(path):
    """Parse (x, y, z, intensity) float32 records into a PointCloud."""
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 4 != 0:
        raise FormatError(f"{path}: size not divisible by 16-byte records")
    pts = raw.reshape(-1, 4).astype(np.float64)
    return PointCloud(pts[:, :3], pts[:, 3:4])


def write_lidar_bin(path, pc):
    rec = np.column_stack([pc.coords, pc.feats[:, :1] if pc.feats.shape[1] else
                           np.zeros((pc.n, 1))]).astype("<f4")
    rec.tofile(path)


def read_remap_table(path):
    """Text table of "raw_id train_id" lines."""
    table = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{path}: bad remap line {line!r}")
            table[int(parts[0])] = int(parts[1])
    return table


def read_labels(path, remap=None):
    """Parse uint32 label records; semantic id is the low 16 bits."""
    raw = np.fromfile(path, dtype="<u4")
    sem = (raw & 0xFFFF).astype(np.int64)
    if remap is None:
        return sem
    out = np.empty_like(sem)
    for i, v in enumerate(sem):
        if int(v) not in remap:
            raise DataError(f"{path}: label id {v} missing from remap table")
        out[i] = remap[int(v)]
    return out


def write_labels(path, labels):
    np.asarray(labels, dtype="<u4").tofile(path)
