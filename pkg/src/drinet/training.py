"""Training loops, learning-rate schedule, metrics CSV, resumable checkpoints.

Determinism contract: the augmentation stream is keyed by the absolute step
index, so a run resumed from a checkpoint sees exactly the same data as an
uninterrupted run with the same seed.
"""
import os
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .checkpoint import load_arrays, load_params, save_arrays
from .config import dataclass_from_text, dataclass_to_text
from .data import AugmentFlags, SyntheticSceneSpec, augment, generate_scene
from .losses import confusion_matrix, cross_entropy, iou_from_confusion, lovasz_softmax
from .optim import Adam


@dataclass
class TrainConfig:
    lr: float = 2e-4
    weight_decay: float = 1e-4
    lr_decay: float = 0.8
    decay_every: int = 5
    epochs: int = 1
    steps_per_epoch: int = 300
    batch_size: int = 1
    seed: int = 0
    lovasz_weight: float = 1.0
    augment_rotation: bool = False
    augment_flip: bool = False
    augment_scaling: bool = False
    augment_jitter: bool = False

    def __post_init__(self):
        if self.lr <= 0 or not (0 < self.lr_decay <= 1):
            raise ValueError("lr must be positive and decay in (0, 1]")

    def flags(self):
        return AugmentFlags(self.augment_rotation, self.augment_flip,
                            self.augment_scaling, self.augment_jitter)

    def any_augment(self):
        return (self.augment_rotation or self.augment_flip
                or self.augment_scaling or self.augment_jitter)

    def to_text(self):
        return dataclass_to_text(self, "train.")

    @classmethod
    def from_text(cls, text):
        return dataclass_from_text(cls, text, "train.")


def lr_at_epoch(cfg, epoch):
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.decay_every)


class SyntheticDataset:
    """Fixed pool of generated scenes; scene i is deterministic in (seed, i)."""

    def __init__(self, n_scenes=1, base_spec=None, seed=0):
        base = base_spec or SyntheticSceneSpec()
        self.specs = [
            SyntheticSceneSpec(base.n_points, base.extent, base.n_boxes,
                               base.n_poles, base.noise_fraction, seed + i)
            for i in range(n_scenes)
        ]
        self._cache = {}

    def __len__(self):
        return len(self.specs)

    def scene(self, i):
        i = i % len(self.specs)
        if i not in self._cache:
            self._cache[i] = generate_scene(self.specs[i])
        return self._cache[i]


def segmentation_loss(model, pc, lovasz_weight=1.0, vms=None):
    out = model.forward_segmentation(pc, vms)
    ignore = model.cfg.ignore_id
    labels = pc.labels.copy()
    labels[~pc.valid_mask] = ignore
    loss = cross_entropy(out.probs, labels, ignore)
    if lovasz_weight:
        loss = T.add(loss, T.scale(lovasz_softmax(out.probs, labels, ignore), lovasz_weight))
    return loss, out, labels


def format_metrics_row(epoch, split, iou, miou, acc, loss):
    cells = [str(epoch), split]
    cells += ["" if np.isnan(v) else f"{v:.10g}" for v in iou]
    cells += [f"{miou:.10g}", f"{acc:.10g}", f"{loss:.10g}"]
    return ",".join(cells)


def metrics_header(num_classes):
    return ",".join(["epoch", "split"]
                    + [f"iou_{c}" for c in range(num_classes)]
                    + ["miou", "acc", "loss"])


def evaluate(model, clouds, lovasz_weight=1.0):
    """Confusion-matrix metrics plus mean loss over a list of clouds."""
    k = model.cfg.num_classes
    conf = np.zeros((k, k), dtype=np.int64)
    losses = []
    for pc in clouds:
        loss, out, labels = segmentation_loss(model, pc, lovasz_weight)
        conf += confusion_matrix(out.pred, labels, k, model.cfg.ignore_id)
        losses.append(loss.item())
    iou, miou, acc = iou_from_confusion(conf)
    return iou, miou, acc, float(np.mean(losses))


def save_training_checkpoint(path, model, opt, step):
    arrays = {p.name: p.data for p in model.parameters()}
    arrays.update(opt.state_arrays())
    arrays["trainer.step"] = np.array([[float(step)]])
    save_arrays(path, arrays)


def load_training_checkpoint(path, model, opt):
    arrays = load_arrays(path)
    load_params(path, model.parameters())
    opt.load_state_arrays(arrays)
    return int(arrays["trainer.step"][0, 0])


def train_segmentation(model, tcfg, dataset, out_dir=None, val_dataset=None,
                       resume_from=None, log=None):
    """Run the segmentation training loop; returns the metrics CSV rows."""
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    opt = Adam(model.parameters(), lr=tcfg.lr, weight_decay=tcfg.weight_decay)
    start_step = 0
    if resume_from:
        start_step = load_training_checkpoint(resume_from, model, opt)

    k = model.cfg.num_classes
    rows = [metrics_header(k)]
    total_steps = tcfg.epochs * tcfg.steps_per_epoch
    flags = tcfg.flags()
    static_data = not tcfg.any_augment()
    vm_cache = {}

    epoch = start_step // tcfg.steps_per_epoch
    conf = np.zeros((k, k), dtype=np.int64)
    epoch_losses = []
    for step in range(start_step, total_steps):
        epoch = step // tcfg.steps_per_epoch
        opt.lr = lr_at_epoch(tcfg, epoch)
        opt.zero_grad()
        batch_loss = None
        for j in range(tcfg.batch_size):
            idx = (step * tcfg.batch_size + j) % len(dataset)
            pc = dataset.scene(idx)
            vms = None
            if static_data:
                if idx not in vm_cache:
                    vm_cache[idx] = model.build_voxel_maps(pc)
                vms = vm_cache[idx]
            else:
                pc = augment(pc, flags, np.random.default_rng([tcfg.seed, step, j]))
            loss, out, labels = segmentation_loss(model, pc, tcfg.lovasz_weight, vms)
            conf += confusion_matrix(out.pred, labels, k, model.cfg.ignore_id)
            epoch_losses.append(loss.item())
            batch_loss = loss if batch_loss is None else T.add(batch_loss, loss)
        T.backward(T.scale(batch_loss, 1.0 / tcfg.batch_size))
        opt.step()

        if (step + 1) % tcfg.steps_per_epoch == 0:
            iou, miou, acc = iou_from_confusion(conf)[:3]
            rows.append(format_metrics_row(
                epoch, "train", iou, miou, acc, float(np.mean(epoch_losses))))
            if val_dataset is not None:
                viou, vmiou, vacc, vloss = evaluate(
                    model, [val_dataset.scene(i) for i in range(len(val_dataset))],
                    tcfg.lovasz_weight)
                rows.append(format_metrics_row(epoch, "val", viou, vmiou, vacc, vloss))
            if log:
                log(rows[-1])
            conf = np.zeros((k, k), dtype=np.int64)
            epoch_losses = []
            if out_dir:
                save_training_checkpoint(
                    os.path.join(out_dir, "checkpoint.driw"), model, opt, step + 1)

    if out_dir:
        with open(os.path.join(out_dir, "metrics.csv"), "w") as f:
            f.write("\n".join(rows) + "\n")
        with open(os.path.join(out_dir, "model.cfg"), "w") as f:
            f.write(model.cfg.to_text())
        save_training_checkpoint(
            os.path.join(out_dir, "checkpoint.driw"), model, opt, total_steps)
    return rows


def train_classification(model, tcfg, clouds, labels, steps, log=None):
    """Overfit loop for the classification head; returns accuracy history."""
    opt = Adam(model.parameters(), lr=tcfg.lr, weight_decay=tcfg.weight_decay)
    labels = np.asarray(labels, dtype=np.int64)
    vms = [model.build_voxel_maps(pc) for pc in clouds]
    history = []
    for step in range(steps):
        opt.zero_grad()
        correct = 0
        total_loss = None
        for pc, y, vm in zip(clouds, labels, vms):
            logits = model.forward_classification(pc, vm)
            probs = T.softmax_rows(logits)
            loss = cross_entropy(probs, np.array([y]), model.cfg.ignore_id)
            correct += int(np.argmax(logits.data[0]) == y)
            total_loss = loss if total_loss is None else T.add(total_loss, loss)
        T.backward(T.scale(total_loss, 1.0 / len(clouds)))
        opt.step()
        history.append(correct / len(clouds))
        if log:
            log(f"step {step}: acc {history[-1]:.3f}")
    return history
