"""Command line surface.

Subcommands: filter (structure-preserving smoothing), synth-blocks
(sparse annotation synthesis), demo-train (the toy self-training
loop), verify (oracle suite), bench (timings).  Exit codes: 0 on
success, 1 on any input or validation error, 2 when verification
fails.
"""

import argparse
import sys

import numpy as np

from .annotations import sample_point_annotation, synth_block_annotation
from .bench import run_bench, write_bench_csv
from .errors import ArgumentError, CapacityError, TelError
from .filter import DENSE_NODE_LIMIT, dense_distance, transmittances, tree_filter
from .grid import weighted_grid
from .losses import AGGREGATIONS, ASSIGNMENTS, LossConfig
from .mst import mst_tree
from .tensors import (DenseTensor, LabelMap, load_image, load_label_map,
                      load_tensor, save_image, save_label_map, save_tensor)
from .toy import (TrainConfig, checkerboard_fixture, evaluate, forward,
                  run_training, save_checkpoint, two_region_fixture,
                  write_metrics_csv)
from .verify import run_verification


def _common(sub):
    sub.add_argument("--seed", type=int, default=0,
                     help="seed for every random draw (default 0)")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads for channel-parallel filtering")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tel",
        description="Minimum-spanning-tree filtering and sparse-label "
                    "self-training tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="smooth an image along its MST")
    p.add_argument("--input", required=True, help="input PNG")
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--guide", help="PNG or .telt tensor the tree is built "
                                   "from (default: the input)")
    p.add_argument("--output", required=True,
                   help="output path; .png clamps to bytes, anything else "
                        "is written as a raw tensor")
    p.add_argument("--dump-distance",
                   help="also write the dense pairwise distance matrix "
                        f"(grids up to {DENSE_NODE_LIMIT} pixels)")
    _common(p)

    p = sub.add_parser("synth-blocks", help="thin a label map to its "
                                            "region interiors")
    p.add_argument("--labels", required=True, help="full label PNG")
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--output", required=True)
    _common(p)

    p = sub.add_parser("demo-train", help="run the toy self-training loop")
    p.add_argument("--fixture", default="two-region",
                   help="two-region | checkerboard | IMAGE.png:LABELS.png")
    p.add_argument("--lambda", dest="lam", type=float, default=0.4)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=2.0)
    p.add_argument("--metrics", help="CSV path for per-step metrics")
    p.add_argument("--prediction", help="PNG path for the final argmax map")
    p.add_argument("--checkpoint", help="tensor path for final parameters")
    p.add_argument("--num-classes", type=int,
                   help="class count for a custom image:labels pair")
    p.add_argument("--assignment", choices=ASSIGNMENTS, default="l1")
    p.add_argument("--aggregation", choices=AGGREGATIONS, default="lh_cascade")
    p.add_argument("--detach", action="store_true",
                   help="stop gradients at the pseudo targets")
    p.add_argument("--naive-threshold", type=float,
                   help="confidence-thresholded hard pseudo labels instead "
                        "of tree filtering")
    p.add_argument("--eval-interval", type=int, default=1)
    _common(p)

    p = sub.add_parser("verify", help="run the oracle checks")
    p.add_argument("--max-size", type=int, default=64)
    p.add_argument("--trials", type=int, default=100)
    _common(p)

    p = sub.add_parser("bench", help="time the pipeline stages")
    p.add_argument("--sizes", default="64,128,256,512",
                   help="comma-separated grid side lengths")
    p.add_argument("--output", help="CSV path")
    p.add_argument("--channels", type=int, default=21)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--compare-backends", action="store_true",
                   help="rerun every size on each kernel backend")
    _common(p)

    return parser


def _load_guide(path):
    if path.endswith(".telt"):
        return load_tensor(path)
    return load_image(path)


def cmd_filter(args):
    image = load_image(args.input)
    guide = _load_guide(args.guide) if args.guide else image
    if (guide.height, guide.width) != (image.height, image.width):
        raise ArgumentError(
            f"guide is {guide.height}x{guide.width}, "
            f"input is {image.height}x{image.width}")
    tree = mst_tree(weighted_grid(guide.data))
    trans = transmittances(tree, args.sigma)
    if args.dump_distance:
        if tree.num_nodes > DENSE_NODE_LIMIT:
            raise CapacityError(
                f"distance dump needs {tree.num_nodes}^2 entries; grids "
                f"above {DENSE_NODE_LIMIT} pixels are refused")
        dist = dense_distance(tree)
        save_tensor(DenseTensor.from_array(dist[None]), args.dump_distance)
    out = tree_filter(image.data, tree, trans, threads=args.threads)
    result = DenseTensor.from_array(out)
    if args.output.endswith(".png"):
        save_image(result, args.output)
    else:
        save_tensor(result, args.output)
    print(f"filtered {args.input} ({image.channels}x{image.height}"
          f"x{image.width}, sigma {args.sigma}) -> {args.output}")
    return 0


def cmd_synth_blocks(args):
    full = load_label_map(args.labels, args.num_classes)
    sparse = synth_block_annotation(full, args.ratio, args.seed)
    save_label_map(sparse, args.output)
    total = int(full.labeled_mask().sum())
    kept = int(sparse.labeled_mask().sum())
    achieved = kept / total if total else 0.0
    print(f"kept {kept} of {total} labeled pixels "
          f"(achieved ratio {achieved:.4f}, target {args.ratio})")
    return 0


def _fixture(args):
    if args.fixture == "two-region":
        image, full = two_region_fixture(seed=args.seed)
    elif args.fixture == "checkerboard":
        image, full = checkerboard_fixture(seed=args.seed)
    elif ":" in args.fixture:
        img_path, lab_path = args.fixture.split(":", 1)
        if not args.num_classes:
            raise ArgumentError(
                "--num-classes is required for a custom image:labels pair")
        image = load_image(img_path)
        return image, None, load_label_map(lab_path, args.num_classes)
    else:
        raise ArgumentError(
            f"unknown fixture {args.fixture!r}; want two-region, "
            "checkerboard, or IMAGE.png:LABELS.png")
    sparse = sample_point_annotation(full, 1, args.seed)
    return image, full, sparse


def cmd_demo_train(args):
    image, full, sparse = _fixture(args)
    loss = LossConfig(lam=args.lam, sigma_low=args.sigma,
                      assignment=args.assignment,
                      aggregation=args.aggregation, detach=args.detach,
                      naive_threshold=args.naive_threshold)
    config = TrainConfig(steps=args.steps, learning_rate=args.lr,
                         seed=args.seed, eval_interval=args.eval_interval,
                         loss=loss)
    model, history = run_training(image, sparse, config, full_labels=full)
    last = history[-1]
    print(f"step {last.step}: L_seg {last.seg:.4f}, L_tree {last.tree:.4f}")
    probs, _ = forward(model, image)
    if full is not None:
        ev = evaluate(probs, full)
        print(f"final pixel accuracy {ev.pixel_acc:.4f}, mIoU {ev.miou:.4f}")
    if args.metrics:
        write_metrics_csv(history, args.metrics)
    if args.prediction:
        pred = probs.reshape(probs.shape[0], image.height,
                             image.width).argmax(axis=0).astype(np.uint8)
        save_label_map(LabelMap.from_array(pred, sparse.num_classes),
                       args.prediction)
    if args.checkpoint:
        save_checkpoint(model, args.checkpoint)
    return 0


def cmd_verify(args):
    ok = run_verification(max_size=args.max_size, trials=args.trials,
                          seed=args.seed, report=print)
    return 0 if ok else 2


def cmd_bench(args):
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError:
        raise ArgumentError(f"bad --sizes {args.sizes!r}") from None
    if not sizes or any(s < 2 for s in sizes):
        raise ArgumentError(f"bad --sizes {args.sizes!r}")
    rows = run_bench(sizes, channels=args.channels, seed=args.seed,
                     repeats=args.repeats, threads=args.threads,
                     compare_backends=args.compare_backends, report=print)
    if args.output:
        write_bench_csv(rows, args.output, with_backend=args.compare_backends)
    return 0


_HANDLERS = {
    "filter": cmd_filter,
    "synth-blocks": cmd_synth_blocks,
    "demo-train": cmd_demo_train,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except TelError as exc:
        print(f"tel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
