"""Command-line entry points: classify, experiment, filter-classes, render."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import hypercube
from .hypercube import DataError, LabelMap
from .mrf import GridGraph, PottsParams, alpha_expansion
from .protocol import DEFAULT_BETA_GRID, DEFAULT_TRAIN_GRID, ExperimentConfig, overall_accuracy, run_experiment
from .render import write_ppm
from .unary import ExternalProvider, TrainingSet, make_provider

log = logging.getLogger("sammrf")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    if any(not np.isfinite(v) or v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"beta values must be finite and >= 0: {text!r}")
    return values


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError(f"training sizes must be integers >= 2: {text!r}")
    return values


def _nonneg(text: str) -> float:
    v = float(text)
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"must be finite and >= 0: {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return v


def _load_inputs(args):
    cube = hypercube.load_cube(args.cube)
    if not args.raw:
        cube = hypercube.normalize_bands(cube)
    labels = hypercube.load_labels(args.labels, (cube.width, cube.height))
    return cube, labels


def _write_config(out_dir: Path, args, extra: dict | None = None) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    resolved.update(extra or {})
    (out_dir / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True, default=list) + "\n")


def cmd_classify(args) -> int:
    cube, train_map = _load_inputs(args)
    C = train_map.class_count
    if C < 1:
        raise DataError("training label map has no labeled pixels")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    provider = make_provider(args.provider, args.l2, args.ext_probs)
    truth = train_map.flat()
    train_idx = np.flatnonzero(truth > 0)
    if isinstance(provider, ExternalProvider):
        unary = provider.unaries(cube, None, C)
    else:
        unary = provider.unaries(cube, TrainingSet.from_pixels(cube, truth, train_idx), C)
    labels, energy = alpha_expansion(unary, PottsParams(args.beta), GridGraph(cube.width, cube.height))
    pred = labels.reshape(cube.height, cube.width)
    hypercube.write_labels(pred, out / "predicted.csv")
    write_ppm(pred, out / "map.ppm", C)
    _write_config(out, args, {"class_count": C, **provider.metadata()})
    print(f"energy {energy:.6f}")
    if args.test_labels:
        test = hypercube.load_labels(args.test_labels, (cube.width, cube.height))
        idx = np.flatnonzero(test.flat() > 0)
        print(f"overall accuracy {100 * overall_accuracy(pred, test, idx):.2f}% on {idx.size} test pixels")
    return 0


def cmd_experiment(args) -> int:
    cube, labels = _load_inputs(args)
    config = ExperimentConfig(
        beta_grid=args.beta_grid,
        train_per_class_grid=args.train_per_class,
        test_per_class=args.test_per_class,
        repetitions=args.repetitions,
        base_seed=args.seed,
        provider=args.provider,
        lr_lambda=args.l2,
        ext_probs=args.ext_probs,
        unary_fraction=args.unary_fraction,
        retrain_full=not args.keep_subset_model,
        workers=args.threads,
        record_timings=not args.no_timings,
    )
    if config.provider == "external" and not config.ext_probs:
        raise ValueError("--provider external needs --ext-probs")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = run_experiment(cube, labels, config)
    (out / "results.csv").write_text(table.to_csv())
    (out / "trials.json").write_text(table.trial_log())
    counts = labels.class_counts()
    _write_config(out, args, {"class_count": labels.class_count,
                              "class_pixel_counts": {str(k): v for k, v in counts.items()}})
    sys.stdout.write(table.to_csv())
    return 0


def cmd_filter_classes(args) -> int:
    labels = hypercube.load_labels(args.labels)
    filtered, mapping = hypercube.filter_classes(labels, args.min_pixels)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    hypercube.write_labels(filtered, out)
    sidecar = out.with_suffix(".remap.json")
    sidecar.write_text(hypercube.remap_json(mapping, labels.class_counts(), args.min_pixels) + "\n")
    print(f"kept {filtered.class_count} of {labels.class_count} classes; mapping in {sidecar}")
    return 0


def cmd_render(args) -> int:
    labels = hypercube.load_labels(args.labels)
    write_ppm(labels.labels, args.out, args.classes or labels.class_count)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cube", required=True, help="cube header file")
    p.add_argument("--provider", choices=("sam", "lr", "external"), default="sam")
    p.add_argument("--lambda", dest="l2", type=_nonneg, default=1.0, help="L2 strength for --provider lr")
    p.add_argument("--ext-probs", help="probability CSV (placeholders {trial}, {train}, {stage} allowed)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--raw", action="store_true", help="skip per-band z-score normalization")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sammrf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify a scene and write the label map")
    _common(p)
    p.add_argument("--labels", required=True, help="training label CSV (0 = unlabeled)")
    p.add_argument("--test-labels", help="label CSV of held-out pixels to score")
    p.add_argument("--beta", type=_nonneg, default=1.0, help="Potts cost")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("experiment", help="repeated randomized trials with beta cross-validation")
    _common(p)
    p.add_argument("--labels", required=True, help="ground-truth label CSV")
    p.add_argument("--beta-grid", type=_float_list, default=DEFAULT_BETA_GRID)
    p.add_argument("--train-per-class", type=_int_list, default=DEFAULT_TRAIN_GRID)
    p.add_argument("--test-per-class", type=_positive_int, default=50)
    p.add_argument("--unary-fraction", type=float, default=0.7)
    p.add_argument("--repetitions", type=_positive_int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keep-subset-model", action="store_true",
                   help="use the unary model fitted on the unary-training subset for the final map")
    p.add_argument("--no-timings", action="store_true", help="leave wall times out of the results")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("filter-classes", help="drop small classes and renumber the rest")
    p.add_argument("--labels", required=True)
    p.add_argument("--min-pixels", type=_positive_int, default=150)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter_classes)

    p = sub.add_parser("render", help="render a label CSV as a PPM image")
    p.add_argument("--labels", required=True)
    p.add_argument("--classes", type=_positive_int, help="palette size (default: max label)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ValueError, OSError) as exc:
        print(f"sammrf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
