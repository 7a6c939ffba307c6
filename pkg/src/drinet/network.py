"""Full network: geometry features feeding an iterated point/voxel loop.

Each iteration scatters point features into a sparse voxel map at the
iteration's target scale, refines them with sparse bottlenecks, and gathers
them back to points. The per-iteration point features concatenate into the
head (softmax segmentation, or column-max + linear classification).
"""
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import dataclass_from_text, dataclass_to_text
from .gafe import Gafe, GafeConfig
from .layers import Linear
from .spvfe import SpvfeBlock
from .svpfe import SvpfeBlock
from .tensor import Tensor
from .voxels import IGNORE_ID, SENTINEL, voxelize


class ConfigError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


@dataclass
class ModelConfig:
    num_classes: int = 4
    in_feat_dim: int = 1                 # point attributes beyond xyz
    n_iterations: int = 2
    spvfe_target_scales: tuple = (0.4, 0.8)
    pooling_scales: tuple = (0.4, 0.8, 1.6, 3.2)
    gafe_scales: tuple = (0.4, 0.8, 1.6, 3.2)
    gafe_mlp_width: int = 16
    gafe_out_channels: int = 32
    pooling_width: int = 16
    voxel_channels: int = 32
    n_bottlenecks: int = 2
    head_hidden: int = 32
    head: str = "segmentation"           # or "classification"
    scatter_reduce: str = "mean"
    attentive: bool = True
    multiscale_pooling: bool = True
    ignore_id: int = IGNORE_ID
    seed: int = 0

    def __post_init__(self):
        if len(self.spvfe_target_scales) != self.n_iterations:
            raise ConfigError("need one target scale per iteration")
        for s in (*self.spvfe_target_scales, *self.pooling_scales, *self.gafe_scales):
            if s <= 0:
                raise ConfigError("scales must be positive")
        if self.head not in ("segmentation", "classification"):
            raise ConfigError(f"unknown head {self.head!r}")
        if self.scatter_reduce not in ("mean", "max"):
            raise ConfigError(f"unknown reduce {self.scatter_reduce!r}")

    def to_text(self):
        return dataclass_to_text(self, "model.")

    @classmethod
    def from_text(cls, text):
        return dataclass_from_text(cls, text, "model.")


@dataclass
class SegmentationOutput:
    logits: Tensor        # N x K
    probs: Tensor         # N x K, rows sum to 1
    pred: np.ndarray      # N int64, ignore_id on masked points


class DRINet:
    def __init__(self, cfg):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.gafe = Gafe(
            rng, cfg.in_feat_dim,
            GafeConfig(sorted(cfg.gafe_scales), cfg.gafe_mlp_width, cfg.gafe_out_channels),
            reduce=cfg.scatter_reduce)
        self.spvfe_blocks = []
        self.svpfe_blocks = []
        cin = cfg.gafe_out_channels
        for i, target in enumerate(cfg.spvfe_target_scales):
            self.spvfe_blocks.append(SpvfeBlock(
                rng, cin, cfg.pooling_width, cfg.voxel_channels,
                cfg.pooling_scales, target, f"spvfe{i}",
                reduce=cfg.scatter_reduce, multiscale=cfg.multiscale_pooling))
            self.svpfe_blocks.append(SvpfeBlock(
                rng, cfg.voxel_channels, cfg.voxel_channels,
                cfg.gafe_out_channels, f"svpfe{i}",
                n_bottlenecks=cfg.n_bottlenecks, attentive=cfg.attentive))
            cin = cfg.voxel_channels
        head_in = cfg.n_iterations * cfg.voxel_channels
        self.head_mlp = [
            Linear(rng, head_in, cfg.head_hidden, "head.0"),
            Linear(rng, cfg.head_hidden, cfg.num_classes, "head.1"),
        ]
        # op-count instrumentation for structural (ablation) checks
        self.op_counts = {}

    # -- plumbing ----------------------------------------------------------

    def parameters(self):
        out = self.gafe.parameters()
        for blk in self.spvfe_blocks:
            out.extend(blk.parameters())
        for blk in self.svpfe_blocks:
            out.extend(blk.parameters())
        for layer in self.head_mlp:
            out.extend(layer.parameters())
        return out

    def needed_scales(self):
        scales = set(self.cfg.gafe_scales) | set(self.cfg.spvfe_target_scales)
        if self.cfg.multiscale_pooling:
            scales |= set(self.cfg.pooling_scales)
        return sorted(scales)

    def build_voxel_maps(self, pc):
        return {s: voxelize(pc, s) for s in self.needed_scales()}

    def _count(self, key, n=1):
        self.op_counts[key] = self.op_counts.get(key, 0) + n

    # -- forward -----------------------------------------------------------

    def _iterate(self, pc, vms=None):
        if not pc.valid_mask.any():
            raise EmptyInputError("no unmasked points")
        self.op_counts = {}
        if vms is None:
            vms = self.build_voxel_maps(pc)
        geo = self.gafe(pc, vms)
        feats = geo
        collected = []
        for spvfe, svpfe in zip(self.spvfe_blocks, self.svpfe_blocks):
            self._count("pooling_scales", len(spvfe.pooling.scales))
            voxel_map = vms[spvfe.target_scale]
            v = spvfe(feats, vms)
            self._count("attentive_gather", int(svpfe.attentive))
            self._count("nearest_gather", int(not svpfe.attentive))
            v, feats = svpfe(v, voxel_map, geo)
            collected.append(feats)
        return T.concat_cols(collected) if len(collected) > 1 else collected[0]

    def _head(self, x):
        h = T.relu(self.head_mlp[0](x))
        return self.head_mlp[1](h)

    def forward_segmentation(self, pc, vms=None):
        if self.cfg.head != "segmentation":
            raise ConfigError("model configured with a classification head")
        logits = self._head(self._iterate(pc, vms))
        probs = T.softmax_rows(logits)
        pred = np.argmax(probs.data, axis=1).astype(np.int64)
        pred[~pc.valid_mask] = self.cfg.ignore_id
        return SegmentationOutput(logits, probs, pred)

    def forward_classification(self, pc, vms=None):
        if self.cfg.head != "classification":
            raise ConfigError("model configured with a segmentation head")
        feats = self._iterate(pc, vms)
        valid = np.flatnonzero(pc.valid_mask)
        pooled = T.reduce_max_rows(T.slice_rows(feats, valid)) if len(valid) != pc.n \
            else T.reduce_max_rows(feats)
        return self._head(pooled)
