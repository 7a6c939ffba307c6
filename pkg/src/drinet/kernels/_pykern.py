"""NumPy fallback for the segment-reduce / gather hot kernels.

Semantics are identical to the compiled backend in ``_ckern.pyx``; this module
is selected automatically when the extension is unavailable (or when
DRINET_FORCE_PYTHON_KERNELS is set).
"""
import numpy as np

NAME = "numpy"


def segment_sum(feats, sorted_idx, offsets):
    """Sum feature rows per CSR segment.

    feats: (N, C) float64, sorted_idx: point indices grouped by segment,
    offsets: (n_seg + 1,) int64. Returns (n_seg, C).
    """
    n_seg = len(offsets) - 1
    if n_seg == 0:
        return np.zeros((0, feats.shape[1]), dtype=np.float64)
    gathered = feats[sorted_idx]
    return np.add.reduceat(gathered, offsets[:-1], axis=0)


def segment_mean(feats, sorted_idx, offsets):
    """Mean per segment, computed as base + sum(x - base) / count.

    The offset form makes the mean of identical rows return that row
    bit-exactly (broadcast/reduce round trips stay lossless).
    """
    n_seg = len(offsets) - 1
    if n_seg == 0:
        return np.zeros((0, feats.shape[1]), dtype=np.float64)
    gathered = feats[sorted_idx]
    counts = np.diff(offsets)
    seg_of = np.repeat(np.arange(n_seg), counts)
    base = gathered[offsets[:-1]]
    diffs = np.add.reduceat(gathered - base[seg_of], offsets[:-1], axis=0)
    return base + diffs / counts[:, None]


def segment_max(feats, sorted_idx, offsets):
    """Max per segment, plus the original row index attaining it.

    Ties resolve to the earliest entry in the segment's canonical order.
    Returns (out (n_seg, C), arg (n_seg, C) int64 indices into feats).
    """
    n_seg = len(offsets) - 1
    n_in_seg = len(sorted_idx)
    c = feats.shape[1]
    if n_seg == 0:
        return np.zeros((0, c)), np.zeros((0, c), dtype=np.int64)
    gathered = feats[sorted_idx]
    out = np.maximum.reduceat(gathered, offsets[:-1], axis=0)
    # first position per segment where the max is attained
    seg_of = np.repeat(np.arange(n_seg), np.diff(offsets))
    is_max = gathered == out[seg_of]
    pos = np.where(is_max, np.arange(n_in_seg)[:, None], n_in_seg)
    first = np.minimum.reduceat(pos, offsets[:-1], axis=0)
    arg = sorted_idx[first]
    return out, arg


def gather_rows(vfeats, p2v):
    """Copy row p2v[i] of vfeats into row i; negative indices give zeros."""
    out = np.zeros((len(p2v), vfeats.shape[1]), dtype=np.float64)
    valid = p2v >= 0
    out[valid] = vfeats[p2v[valid]]
    return out


def scatter_add_rows(rows, p2v, n_out):
    """Accumulate rows into n_out buckets keyed by p2v (negatives dropped)."""
    out = np.zeros((n_out, rows.shape[1]), dtype=np.float64)
    valid = p2v >= 0
    np.add.at(out, p2v[valid], rows[valid])
    return out
