"""Repeated-trial experiment harness: splits, beta cross-validation, accuracy tables."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .hypercube import LabelMap, Split, SplitSpec, SpectralCube, make_split
from .mrf import GridGraph, PottsParams, alpha_expansion
from .unary import ExternalProvider, TrainingSet, UnaryField, make_provider

log = logging.getLogger(__name__)

DEFAULT_BETA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_TRAIN_GRID = (10, 20, 30, 40, 50, 60, 70)
RESULT_COLUMNS = ("trainPerClass", "variant", "meanAccuracyPercent", "stdAccuracyPercent",
                  "meanChosenBeta", "meanSeconds")


@dataclass(frozen=True)
class ExperimentConfig:
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    train_per_class_grid: tuple[int, ...] = DEFAULT_TRAIN_GRID
    test_per_class: int = 50
    repetitions: int = 30
    base_seed: int = 0
    provider: str = "sam"
    lr_lambda: float = 1.0
    ext_probs: str | None = None
    unary_fraction: float = 0.7
    retrain_full: bool = True
    workers: int = 1
    record_timings: bool = True

    def __post_init__(self):
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        object.__setattr__(self, "train_per_class_grid", tuple(int(t) for t in self.train_per_class_grid))
        if not self.beta_grid:
            raise ValueError("beta grid must not be empty")
        if any(not np.isfinite(b) or b < 0 for b in self.beta_grid):
            raise ValueError(f"beta grid entries must be finite and >= 0: {self.beta_grid}")
        if not self.train_per_class_grid:
            raise ValueError("train-per-class grid must not be empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.provider not in ("sam", "lr", "external"):
            raise ValueError(f"unknown provider {self.provider!r}")
        if self.lr_lambda < 0:
            raise ValueError("lambda must be >= 0")

    def split_spec(self, train_per_class: int, trial_index: int) -> SplitSpec:
        return SplitSpec(train_per_class, self.test_per_class, self.unary_fraction,
                         self.base_seed + trial_index)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BetaSelection:
    beta: float
    scores: dict[float, float]


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    train_per_class: int
    seed: int
    split_digest: str
    chosen_beta: float
    pixelwise_accuracy: float
    mrf_accuracy: float
    validation_scores: dict[float, float] = field(default_factory=dict)
    validation_accuracy_beta0: float = float("nan")
    timings: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["validation_scores"] = {repr(k): v for k, v in self.validation_scores.items()}
        return d


def overall_accuracy(predicted, truth, eval_pixels) -> float:
    """Fraction of ``eval_pixels`` whose predicted label equals the truth."""
    idx = np.asarray(eval_pixels, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ValueError("no evaluation pixels")
    t = truth.flat() if isinstance(truth, LabelMap) else np.asarray(truth).reshape(-1)
    if np.any(t[idx] == 0):
        raise ValueError("evaluation pixel without ground truth")
    p = np.asarray(predicted).reshape(-1)
    return float(np.count_nonzero(p[idx] == t[idx])) / idx.size


def select_beta(unary: UnaryField, truth, validation_pixels, beta_grid, grid: GridGraph | None = None) -> BetaSelection:
    """Pick the grid value whose full-image map is most accurate on the validation pixels.

    Ties go to the smallest beta.
    """
    if len(beta_grid) == 0:
        raise ValueError("beta grid must not be empty")
    grid = grid or GridGraph.for_field(unary)
    scores = {}
    for beta in sorted(set(float(b) for b in beta_grid)):
        y, _ = alpha_expansion(unary, PottsParams(beta), grid)
        scores[beta] = overall_accuracy(y, truth, validation_pixels)
    best = max(scores.values())
    chosen = min(b for b, s in scores.items() if s == best)
    return BetaSelection(chosen, scores)


def _unaries(provider, cube, truth_flat, indices, class_count, trial, train, stage) -> UnaryField:
    if isinstance(provider, ExternalProvider):
        provider.context = {"trial": trial, "train": train, "stage": stage}
        return provider.unaries(cube, None, class_count)
    return provider.unaries(cube, TrainingSet.from_pixels(cube, truth_flat, indices), class_count)


def _check_disjoint(split: Split) -> None:
    test = set(split.test_indices().tolist())
    train = split.training_indices().tolist()
    if test.intersection(train) or len(set(train)) != len(train):
        raise RuntimeError("split leaks test pixels into training")


def run_trial(cube: SpectralCube, labels: LabelMap, train_per_class: int, config: ExperimentConfig,
              trial_index: int) -> TrialResult:
    """One randomized trial: split, fit unaries, choose beta, final map, score test pixels."""
    if (cube.width, cube.height) != (labels.width, labels.height):
        raise ValueError("cube and label map dimensions differ")
    spec = config.split_spec(train_per_class, trial_index)
    split = make_split(labels, spec)
    _check_disjoint(split)
    truth = labels.flat()
    C = labels.class_count
    grid = GridGraph(cube.width, cube.height)
    provider = make_provider(config.provider, config.lr_lambda, config.ext_probs)
    clock = time.perf_counter

    t0 = clock()
    sub_unary = _unaries(provider, cube, truth, split.unary_indices(), C, trial_index, train_per_class, "unary")
    t1 = clock()
    valid = split.validation_indices()
    selection = select_beta(sub_unary, truth, valid, config.beta_grid, grid)
    if 0.0 in selection.scores:
        acc0 = selection.scores[0.0]
    else:
        acc0 = overall_accuracy(sub_unary.argmin(), truth, valid)
    t2 = clock()
    if config.retrain_full:
        unary = _unaries(provider, cube, truth, split.training_indices(), C, trial_index, train_per_class, "final")
    else:
        unary = sub_unary
    t3 = clock()
    pixelwise = unary.argmin()
    y, _ = alpha_expansion(unary, PottsParams(selection.beta), grid)
    t4 = clock()

    test = split.test_indices()
    timings = {
        "unary_subset": t1 - t0,
        "beta_selection": t2 - t1,
        "unary_final": t3 - t2,
        "inference": t4 - t3,
    }
    return TrialResult(
        trial_index=trial_index,
        train_per_class=train_per_class,
        seed=spec.seed,
        split_digest=split.digest(),
        chosen_beta=selection.beta,
        pixelwise_accuracy=overall_accuracy(pixelwise, truth, test),
        mrf_accuracy=overall_accuracy(y, truth, test),
        validation_scores=selection.scores,
        validation_accuracy_beta0=acc0,
        timings=timings if config.record_timings else {},
    )


@dataclass
class ResultTable:
    rows: list[dict]
    trials: list[TrialResult]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()

    def trial_log(self) -> str:
        return json.dumps([t.to_json() for t in self.trials], indent=2, sort_keys=True) + "\n"

    def row(self, train_per_class: int, variant: str) -> dict:
        for r in self.rows:
            if r["trainPerClass"] == train_per_class and r["variant"] == variant:
                return r
        raise KeyError((train_per_class, variant))


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2 or np.all(v == v[0]):
        return float(v[0]) if v.size else float("nan"), 0.0
    return float(v.mean()), float(v.std(ddof=1))


def summarize(trials: list[TrialResult], config: ExperimentConfig) -> ResultTable:
    trials = sorted(trials, key=lambda t: (t.train_per_class, t.trial_index))
    if config.repetitions == 1:
        log.warning("one repetition: standard deviations are reported as 0")
    rows = []
    for n in config.train_per_class_grid:
        group = [t for t in trials if t.train_per_class == n]
        if len(group) != config.repetitions:
            raise RuntimeError(f"expected {config.repetitions} trials for {n} per class, got {len(group)}")
        beta = float(np.mean([t.chosen_beta for t in group]))
        for variant, attr in (("pixelwise", "pixelwise_accuracy"), ("mrf", "mrf_accuracy")):
            m, s = mean_std([100.0 * getattr(t, attr) for t in group])
            if config.record_timings:
                unary_s = [t.timings["unary_final"] for t in group]
                infer_s = [t.timings["inference"] for t in group]
                secs = np.mean(unary_s) if variant == "pixelwise" else np.mean(np.add(unary_s, infer_s))
                secs_txt = f"{secs:.4f}"
            else:
                secs_txt = ""
            rows.append({
                "trainPerClass": n,
                "variant": variant,
                "meanAccuracyPercent": f"{m:.2f}",
                "stdAccuracyPercent": f"{s:.2f}",
                "meanChosenBeta": f"{beta:.6g}" if variant == "mrf" else "",
                "meanSeconds": secs_txt,
            })
    return ResultTable(rows, trials)


def _trial_job(args):
    return run_trial(*args)


def run_experiment(cube: SpectralCube, labels: LabelMap, config: ExperimentConfig) -> ResultTable:
    jobs = [(cube, labels, n, config, t)
            for n in config.train_per_class_grid for t in range(config.repetitions)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trials = list(pool.map(_trial_job, jobs))
    else:
        trials = []
        for job in jobs:
            trials.append(_trial_job(job))
            t = trials[-1]
            log.info("train=%d trial=%d beta=%g pixelwise=%.4f mrf=%.4f", t.train_per_class,
                     t.trial_index, t.chosen_beta, t.pixelwise_accuracy, t.mrf_accuracy)
    return summarize(trials, config)
