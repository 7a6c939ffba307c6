"""Command line entry point: train, infer, gradcheck, bench."""
import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import gradcheck, kernels
from .bench import format_rows, run_backend_bench, run_op_bench
from .checkpoint import load_params
from .config import dataclass_from_text, dataclass_to_text
from .data import (SyntheticSceneSpec, generate_shape, read_labels,
                   read_lidar_bin, read_remap_table, write_labels)
from .network import DRINet, ModelConfig
from .training import (SyntheticDataset, TrainConfig, train_classification,
                       train_segmentation)
from .voxels import clip_range

GRADCHECK_TOL = 1e-4

PLY_PALETTE = [
    (70, 130, 180), (220, 20, 60), (119, 172, 48), (255, 215, 0),
    (138, 43, 226), (0, 206, 209), (255, 140, 0), (128, 128, 128),
]


@dataclass
class DataConfig:
    n_scenes: int = 2
    n_points: int = 4096
    extent: float = 20.0
    seed: int = 0
    clip_min: tuple = (-48.0, -48.0, -3.0)
    clip_max: tuple = (48.0, 48.0, 1.8)
    clip: bool = True
    remap: str = ""

    def to_text(self):
        return dataclass_to_text(self, "data.")

    @classmethod
    def from_text(cls, text):
        return dataclass_from_text(cls, text, "data.")


def _load_config(path):
    if not os.path.isfile(path):
        print(f"config not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    with open(path) as f:
        text = f.read()
    return (ModelConfig.from_text(text), TrainConfig.from_text(text),
            DataConfig.from_text(text))


def _clip(pc, dcfg, ignore_id):
    if dcfg.clip:
        return clip_range(pc, dcfg.clip_min, dcfg.clip_max, ignore_id)
    return pc


class _FileDataset:
    def __init__(self, clouds):
        self.clouds = clouds

    def __len__(self):
        return len(self.clouds)

    def scene(self, i):
        return self.clouds[i % len(self.clouds)]


def cmd_train(args):
    mcfg, tcfg, dcfg = _load_config(args.config)
    if args.seed is not None:
        tcfg.seed = args.seed
        mcfg.seed = args.seed
    model = DRINet(mcfg)
    os.makedirs(args.out, exist_ok=True)

    if mcfg.head == "classification":
        rng_seeds = range(dcfg.seed, dcfg.seed + dcfg.n_scenes)
        clouds, labels = [], []
        for s in rng_seeds:
            for fam in (0, 1):
                clouds.append(generate_shape(fam, n_points=dcfg.n_points, seed=s))
                labels.append(fam)
        steps = tcfg.epochs * tcfg.steps_per_epoch
        hist = train_classification(model, tcfg, clouds, labels, steps,
                                    log=print if args.verbose else None)
        with open(os.path.join(args.out, "metrics.csv"), "w") as f:
            f.write("step,split,acc\n")
            f.writelines(f"{i},train,{a:.10g}\n" for i, a in enumerate(hist))
        with open(os.path.join(args.out, "model.cfg"), "w") as f:
            f.write(mcfg.to_text())
        from .training import save_training_checkpoint
        from .optim import Adam
        save_training_checkpoint(os.path.join(args.out, "checkpoint.driw"),
                                 model, Adam(model.parameters()), steps)
        print(f"final train accuracy: {hist[-1]:.4f}")
        return 0

    if args.data_dir:
        frames = sorted(f for f in os.listdir(args.data_dir) if f.endswith(".bin"))
        if not frames:
            print(f"no .bin frames in {args.data_dir}", file=sys.stderr)
            return 2
        remap = read_remap_table(dcfg.remap) if dcfg.remap else None
        clouds = []
        for name in frames:
            pc = read_lidar_bin(os.path.join(args.data_dir, name))
            lab = os.path.join(args.data_dir, name[:-4] + ".label")
            if os.path.isfile(lab):
                pc.labels = read_labels(lab, remap)
            clouds.append(_clip(pc, dcfg, mcfg.ignore_id))
        dataset = _FileDataset(clouds)
    else:
        spec = SyntheticSceneSpec(n_points=dcfg.n_points, extent=dcfg.extent,
                                  seed=dcfg.seed)
        dataset = SyntheticDataset(dcfg.n_scenes, spec, dcfg.seed)

    rows = train_segmentation(
        model, tcfg, dataset, out_dir=args.out,
        resume_from=args.resume, log=print if args.verbose else None)
    print(rows[-1])
    print(f"wrote {os.path.join(args.out, 'metrics.csv')}")
    return 0


def cmd_infer(args):
    cfg_path = args.model_config or os.path.join(
        os.path.dirname(os.path.abspath(args.checkpoint)), "model.cfg")
    if not os.path.isfile(cfg_path):
        print(f"model config not found: {cfg_path}", file=sys.stderr)
        return 2
    with open(cfg_path) as f:
        text = f.read()
    mcfg = ModelConfig.from_text(text)
    dcfg = DataConfig.from_text(text) if "data." in text else DataConfig()
    if args.no_clip:
        dcfg.clip = False
    model = DRINet(mcfg)
    try:
        load_params(args.checkpoint, model.parameters())
    except (OSError, ValueError) as e:
        print(f"cannot load checkpoint: {e}", file=sys.stderr)
        return 1
    pc = read_lidar_bin(args.input)
    pc = _clip(pc, dcfg, mcfg.ignore_id)
    out = model.forward_segmentation(pc)
    write_labels(args.out, out.pred)
    if args.ply:
        _write_ply(args.ply, pc, out.pred)
    print(f"wrote {len(out.pred)} predictions to {args.out}")
    return 0


def _write_ply(path, pc, pred):
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {pc.n}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        f.write("end_header\n")
        for (x, y, z), c in zip(pc.coords, pred):
            r, g, b = PLY_PALETTE[int(c) % len(PLY_PALETTE)]
            f.write(f"{x:.4f} {y:.4f} {z:.4f} {r} {g} {b}\n")


def cmd_gradcheck(args):
    results = gradcheck.run_all(seed=args.seed)
    if args.module != "all":
        if args.module not in results:
            print(f"unknown op {args.module!r}; known: {', '.join(sorted(results))}",
                  file=sys.stderr)
            return 2
        results = {args.module: results[args.module]}
    ok = True
    for op, err in sorted(results.items()):
        status = "ok" if err < GRADCHECK_TOL else "FAIL"
        print(f"{op:<22} worst rel err {err:.3e}  {status}")
        ok &= err < GRADCHECK_TOL
    return 0 if ok else 1


def cmd_bench(args):
    ops = ["scatter", "gather", "attentive", "trilinear"] if args.op == "all" else [args.op]
    if args.op == "backends":
        rows = run_backend_bench(args.points, args.scale, repeats=args.repeats)
    else:
        rows = run_op_bench(ops, args.points, args.scale, repeats=args.repeats)
    print(f"kernel backend: {kernels.BACKEND}")
    print(format_rows(rows))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="drinet",
                                description="point cloud segmentation engine")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("DRINET_THREADS", "1")),
                   help="kernel parallelism cap (default 1 for reproducibility)")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--data-dir", default=None, help="directory of .bin/.label frames")
    t.add_argument("--synthetic", action="store_true",
                   help="use generated scenes (default when no --data-dir)")
    t.add_argument("--resume", default=None, help="checkpoint to resume from")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(fn=cmd_train)

    i = sub.add_parser("infer", help="predict labels for one frame")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--model-config", default=None)
    i.add_argument("--input", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--ply", default=None, help="also write a colored text PLY")
    i.add_argument("--no-clip", action="store_true")
    i.set_defaults(fn=cmd_infer)

    g = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    g.add_argument("--module", default="all")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=cmd_gradcheck)

    b = sub.add_parser("bench", help="kernel timing report")
    b.add_argument("--op", default="all",
                   choices=["scatter", "gather", "attentive", "trilinear", "all", "backends"])
    b.add_argument("--points", type=int, default=100_000)
    b.add_argument("--scale", type=float, default=0.4)
    b.add_argument("--repeats", type=int, default=3)
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return args.fn(args)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
