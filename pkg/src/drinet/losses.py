"""Training losses (cross-entropy + Lovász-softmax on probabilities) and
segmentation metrics (confusion matrix, per-class IoU, mIoU, accuracy)."""
import numpy as np

from .tensor import _result, accumulate


class DataError(ValueError):
    pass


def _valid_index(probs, labels, ignore_id):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(labels) != probs.rows:
        raise DataError(f"{len(labels)} labels for {probs.rows} rows")
    keep = np.flatnonzero(labels != ignore_id)
    if keep.size and (labels[keep].min() < 0 or labels[keep].max() >= probs.cols):
        raise DataError("label id out of range")
    return labels, keep


def cross_entropy(probs, labels, ignore_id, eps=1e-12):
    """Mean of -log p[label] over non-ignored points (scalar tensor)."""
    labels, keep = _valid_index(probs, labels, ignore_id)
    if keep.size == 0:
        raise DataError("cross_entropy: no labeled points")
    picked = probs.data[keep, labels[keep]]
    value = -np.log(np.maximum(picked, eps)).mean()

    def bw(g, adj):
        gp = np.zeros_like(probs.data)
        gp[keep, labels[keep]] = -1.0 / (np.maximum(picked, eps) * keep.size)
        accumulate(adj, probs, g[0, 0] * gp)

    return _result(np.array([[value]]), (probs,), bw)


def lovasz_jaccard_grad(gt_sorted):
    """Gradient of the Jaccard error extension along sorted errors."""
    gts = gt_sorted.sum()
    intersection = gts - np.cumsum(gt_sorted)
    union = gts + np.cumsum(1.0 - gt_sorted)
    jaccard = 1.0 - intersection / union
    if len(jaccard) > 1:
        jaccard[1:] = jaccard[1:] - jaccard[:-1]
    return jaccard


def lovasz_softmax(probs, labels, ignore_id):
    """Lovász extension of the per-class Jaccard error, averaged over the
    classes present among the non-ignored labels."""
    labels, keep = _valid_index(probs, labels, ignore_id)
    if keep.size == 0:
        raise DataError("lovasz_softmax: no labeled points")
    lab = labels[keep]
    present = np.unique(lab)
    total = 0.0
    grad = np.zeros_like(probs.data)
    for c in present:
        fg = (lab == c).astype(np.float64)
        p_c = probs.data[keep, c]
        errors = np.where(fg > 0.5, 1.0 - p_c, p_c)
        perm = np.argsort(-errors, kind="stable")
        coeffs = lovasz_jaccard_grad(fg[perm])
        total += float(errors[perm] @ coeffs)
        # d errors / d p_c is -1 on foreground, +1 on background
        sign = np.where(fg > 0.5, -1.0, 1.0)
        gc = np.zeros(keep.size)
        gc[perm] = coeffs
        grad[keep, c] += sign * gc
    k = len(present)
    value = total / k
    grad /= k

    def bw(g, adj):
        accumulate(adj, probs, g[0, 0] * grad)

    return _result(np.array([[value]]), (probs,), bw)


def confusion_matrix(pred, labels, num_classes, ignore_id):
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    keep = labels != ignore_id
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (labels[keep], pred[keep]), 1)
    return conf


def iou_from_confusion(conf):
    """(per-class IoU with NaN for absent classes, mIoU, overall accuracy)."""
    tp = np.diag(conf).astype(np.float64)
    fp = conf.sum(axis=0) - tp
    fn = conf.sum(axis=1) - tp
    union = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, tp / np.maximum(union, 1), np.nan)
    valid = union > 0
    miou = float(iou[valid].mean()) if valid.any() else float("nan")
    total = conf.sum()
    acc = float(tp.sum() / total) if total else float("nan")
    return iou, miou, acc


def confusion_and_miou(pred, labels, num_classes, ignore_id):
    conf = confusion_matrix(pred, labels, num_classes, ignore_id)
    iou, miou, acc = iou_from_confusion(conf)
    return conf, iou, miou, acc
