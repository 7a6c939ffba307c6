import numpy as np
import pytest

from drinet.voxels import PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_cloud(rng, n=50, spread=4.0, feat_dim=1, labels=None, num_classes=4):
    coords = rng.uniform(-spread, spread, (n, 3))
    feats = rng.uniform(-1, 1, (n, feat_dim))
    if labels is True:
        labels = rng.integers(0, num_classes, size=n)
    return PointCloud(coords, feats, labels)


def permute_cloud(pc, perm):
    return PointCloud(
        pc.coords[perm], pc.feats[perm],
        None if pc.labels is None else pc.labels[perm],
        pc.valid_mask[perm])
