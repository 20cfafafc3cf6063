"""Unary energy providers: minimum spectral angle, softmax regression, external maps."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from .hypercube import DataError, SpectralCube
from .spectral import angle_matrix

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class UnaryField:
    """Energy of every class at every pixel, shape ``(width * height, C)``.

    Column ``c - 1`` holds the energy of class ``c``.
    """

    energies: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        e = np.ascontiguousarray(self.energies, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != self.width * self.height or e.shape[1] < 1:
            raise ValueError(f"energies must be ({self.width * self.height}, C), got {e.shape}")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ValueError("unary energies must be finite and >= 0")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @property
    def class_count(self) -> int:
        return self.energies.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.energies.shape[0]

    def argmin(self) -> np.ndarray:
        """Pixel-wise labels (1-based); ``np.argmin`` picks the lowest class on ties."""
        return np.argmin(self.energies, axis=1) + 1


@dataclass(frozen=True)
class TrainingSet:
    spectra: np.ndarray  # (n, bands)
    labels: np.ndarray  # (n,), values 1..C

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.spectra, dtype=np.float64))
        y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ValueError("one label per training spectrum")
        if y.size and y.min() < 1:
            raise ValueError("training labels must be >= 1")
        object.__setattr__(self, "spectra", x)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_pixels(cls, cube: SpectralCube, truth: np.ndarray, indices) -> "TrainingSet":
        idx = np.asarray(indices, dtype=np.int64)
        return cls(cube.pixels()[idx], np.asarray(truth).reshape(-1)[idx])

    @property
    def class_count(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0


# ------------------------------------------------------------------ SAM


def sam_unary(cube: SpectralCube, train: TrainingSet, class_count: int | None = None) -> UnaryField:
    """Energy of class c = smallest spectral angle to any class-c exemplar."""
    C = class_count or train.class_count
    if train.spectra.shape[1] != cube.bands:
        raise ValueError(f"training spectra have {train.spectra.shape[1]} bands, cube has {cube.bands}")
    pixels = cube.pixels()
    best = np.empty((cube.n_pixels, C))
    for c in range(1, C + 1):
        ex = train.spectra[train.labels == c]
        if ex.shape[0] == 0:
            raise ValueError(f"class {c} has no training exemplar")
        best[:, c - 1] = angle_matrix(pixels, ex).min(axis=1)
    return UnaryField(best, cube.width, cube.height)


# ------------------------------------------------------------------ logistic regression


@dataclass(frozen=True)
class LrModel:
    weights: np.ndarray  # (C, bands + 1), bias last
    l2_strength: float
    grad_norm: float = 0.0
    converged: bool = True

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]


def _augment(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def lr_objective(w_flat: np.ndarray, xa: np.ndarray, y0: np.ndarray, n_classes: int, l2: float):
    """Regularized multinomial cross-entropy and its gradient.

    ``sum_n -log softmax(W x_n)[y_n] + l2/2 * |W_nonbias|^2`` with ``xa`` the
    bias-augmented features and ``y0`` 0-based labels.
    """
    w = w_flat.reshape(n_classes, xa.shape[1])
    scores = xa @ w.T
    logp = log_softmax(scores, axis=1)
    rows = np.arange(xa.shape[0])
    core = w[:, :-1]
    f = -logp[rows, y0].sum() + 0.5 * l2 * np.sum(core * core)
    resid = np.exp(logp)
    resid[rows, y0] -= 1.0
    g = resid.T @ xa
    g[:, :-1] += l2 * core
    return f, g.ravel()


def train_lr(train: TrainingSet, l2_strength: float = 1.0, class_count: int | None = None,
             max_iter: int = 1000, tol: float = 1e-6) -> LrModel:
    """Fit L2-regularized softmax regression by L-BFGS from zero weights.

    Training rows are put in a canonical order first so that the fitted model
    does not depend on how the caller ordered them.
    """
    if l2_strength < 0:
        raise ValueError("l2_strength must be >= 0")
    x = train.spectra
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature in training set")
    C = class_count or train.class_count
    if len(np.unique(train.labels)) < 2:
        raise ValueError("logistic regression needs at least two classes")
    order = np.lexsort(tuple(x.T[::-1]) + (train.labels,))
    xa = _augment(x[order])
    y0 = train.labels[order] - 1
    res = minimize(
        lr_objective, np.zeros(C * xa.shape[1]), args=(xa, y0, C, l2_strength),
        jac=True, method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": tol, "ftol": 0.0, "maxcor": 20},
    )
    w = res.x.reshape(C, xa.shape[1])
    # biases are unregularized and only defined up to a common shift
    w[:, -1] -= w[:, -1].mean()
    gnorm = float(np.max(np.abs(lr_objective(w.ravel(), xa, y0, C, l2_strength)[1])))
    converged = gnorm <= tol
    if not converged:
        log.warning("logistic regression stopped after %d iterations with gradient norm %.3g",
                    res.nit, gnorm)
    return LrModel(w, float(l2_strength), gnorm, converged)


def lr_probabilities(model: LrModel, cube: SpectralCube) -> np.ndarray:
    """Softmax class probabilities, shape ``(n_pixels, C)``."""
    if model.weights.shape[1] != cube.bands + 1:
        raise ValueError("model band count does not match cube")
    scores = cube.pixels() @ model.weights[:, :-1].T + model.weights[:, -1]
    return softmax(scores, axis=1)


# ------------------------------------------------------------------ probabilities -> energies


def neglog_unary(probs: np.ndarray, width: int, height: int, floor: float = PROB_FLOOR) -> UnaryField:
    p = np.asarray(probs, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1 + 1e-9):
        raise ValueError("probabilities must lie in [0, 1]")
    # + 0.0 turns -0.0 (from p == 1) into 0.0
    return UnaryField(-np.log(np.maximum(p, floor)) + 0.0, width, height)


def load_external_probabilities(path: str | Path, width: int, height: int, classes: int) -> np.ndarray:
    """Read a per-pixel probability CSV (row-major pixels, one column per class)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"probability file not found: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if len(rows) != width * height:
        raise DataError(f"{path}: {len(rows)} rows, expected {width * height} (one per pixel)")
    for lineno, r in enumerate(rows, 1):
        if len(r) != classes:
            raise DataError(f"{path}: row {lineno} has {len(r)} columns, expected {classes}")
    try:
        p = np.array([[float(cell) for cell in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric probability") from exc
    if not np.all(np.isfinite(p)):
        raise DataError(f"{path}: non-finite probability")
    if np.any(p < 0):
        raise DataError(f"{path}: negative probability at pixel {np.argwhere(p < 0)[0][0]}")
    sums = p.sum(axis=1)
    bad = np.flatnonzero((sums < 0.9) | (sums > 1.1))
    if bad.size:
        raise DataError(f"{path}: row {bad[0] + 1} sums to {sums[bad[0]]:.4g}")
    return p / sums[:, None]


# ------------------------------------------------------------------ providers


class SamProvider:
    name = "sam"

    def unaries(self, cube: SpectralCube, train: TrainingSet, class_count: int) -> UnaryField:
        return sam_unary(cube, train, class_count)

    def metadata(self) -> dict:
        return {"provider": self.name}


class LrProvider:
    name = "lr"

    def __init__(self, l2_strength: float = 1.0):
        self.l2_strength = l2_strength

    def unaries(self, cube: SpectralCube, train: TrainingSet, class_count: int) -> UnaryField:
        model = train_lr(train, self.l2_strength, class_count)
        return neglog_unary(lr_probabilities(model, cube), cube.width, cube.height)

    def metadata(self) -> dict:
        return {"provider": self.name, "lambda": self.l2_strength}


class ExternalProvider:
    """Probabilities produced elsewhere (e.g. an SVM or GP classifier).

    ``template`` may contain ``{trial}``, ``{train}`` and ``{stage}``
    (``unary`` while choosing beta, ``final`` for the reported map)
    placeholders, filled in per trial by the experiment harness.
    """

    name = "external"

    def __init__(self, template: str):
        self.template = template
        self.context = {"trial": 0, "train": 0, "stage": "final"}

    def path(self) -> str:
        return self.template.format(**self.context)

    def unaries(self, cube: SpectralCube, train: TrainingSet | None, class_count: int) -> UnaryField:
        probs = load_external_probabilities(self.path(), cube.width, cube.height, class_count)
        return neglog_unary(probs, cube.width, cube.height)

    def metadata(self) -> dict:
        return {"provider": self.name, "ext_probs": self.template}


def make_provider(name: str, l2_strength: float = 1.0, ext_probs: str | None = None):
    if name == "sam":
        return SamProvider()
    if name == "lr":
        return LrProvider(l2_strength)
    if name == "external":
        if not ext_probs:
            raise ValueError("the external provider needs a probability file")
        return ExternalProvider(ext_probs)
    raise ValueError(f"unknown provider {name!r}")
