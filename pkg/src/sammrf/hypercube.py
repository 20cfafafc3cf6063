"""Hyperspectral cube and label-map data model, file I/O and train/test splitting.

Cubes are held in pixel-interleaved order as a ``(height, width, bands)``
float64 array. Pixel ``i`` is ``row * width + col``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEADER_KEYS = ("width", "height", "bands", "data", "byteorder", "dtype", "layout")


class DataError(ValueError):
    """Raised for malformed or inconsistent input files and data."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpectralCube:
    values: np.ndarray  # (height, width, bands)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or min(v.shape) < 1:
            raise DataError(f"cube must be (height, width, bands) with all sizes >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            r, c, b = np.argwhere(~np.isfinite(v))[0]
            raise DataError(f"non-finite value at row {r}, col {c}, band {b}")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def pixels(self) -> np.ndarray:
        """Spectra as an ``(n_pixels, bands)`` view, row-major pixel order."""
        return self.values.reshape(-1, self.bands)


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray  # (height, width) int, 0 = unlabeled
    class_count: int = -1

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise DataError(f"label map must be 2-D, got shape {lab.shape}")
        if lab.size and not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise DataError("label map must hold integers")
        lab = lab.astype(np.int64)
        if lab.size and lab.min() < 0:
            raise DataError("negative label in label map")
        top = int(lab.max()) if lab.size else 0
        count = top if self.class_count < 0 else self.class_count
        if top > count:
            raise DataError(f"label {top} exceeds class count {count}")
        object.__setattr__(self, "labels", _freeze(lab))
        object.__setattr__(self, "class_count", int(count))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def flat(self) -> np.ndarray:
        return self.labels.reshape(-1)

    def class_counts(self) -> dict[int, int]:
        counts = np.bincount(self.flat(), minlength=self.class_count + 1)
        return {c: int(counts[c]) for c in range(1, self.class_count + 1)}


@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int
    test_per_class: int = 50
    unary_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.train_per_class < 2:
            raise ValueError("train_per_class must be >= 2")
        if self.test_per_class < 1:
            raise ValueError("test_per_class must be >= 1")
        if not 0.0 < self.unary_fraction < 1.0:
            raise ValueError("unary_fraction must lie strictly between 0 and 1")

    @property
    def unary_count(self) -> int:
        # round half up
        return int(math.floor(self.unary_fraction * self.train_per_class + 0.5))


@dataclass(frozen=True)
class Split:
    """Per-class pixel indices; keys are class labels 1..C."""

    unary_train: dict[int, np.ndarray] = field(default_factory=dict)
    beta_validation: dict[int, np.ndarray] = field(default_factory=dict)
    test: dict[int, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def _cat(parts: dict[int, np.ndarray]) -> np.ndarray:
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([parts[c] for c in sorted(parts)]).astype(np.int64)

    def unary_indices(self) -> np.ndarray:
        return self._cat(self.unary_train)

    def validation_indices(self) -> np.ndarray:
        return self._cat(self.beta_validation)

    def training_indices(self) -> np.ndarray:
        """Unary-train and beta-validation pixels together."""
        return np.concatenate([self.unary_indices(), self.validation_indices()])

    def test_indices(self) -> np.ndarray:
        return self._cat(self.test)

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (self.unary_train, self.beta_validation, self.test):
            for c in sorted(part):
                h.update(np.asarray(part[c], dtype="<i8").tobytes())
                h.update(b"|")
            h.update(b"#")
        return h.hexdigest()[:16]


# ---------------------------------------------------------------- file I/O


def read_header(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"cube header not found: {path}")
    header = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        header[key.strip().lower()] = value.strip()
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise DataError(f"{path}: missing header keys {missing}")
    for key, want in (("byteorder", "little"), ("dtype", "float32"), ("layout", "bsq")):
        if header[key].lower() != want:
            raise DataError(f"{path}: {key} must be {want!r}, got {header[key]!r}")
    return header


def load_cube(header_path: str | Path) -> SpectralCube:
    """Read a BSQ float32 little-endian cube described by an ASCII header."""
    header_path = Path(header_path)
    header = read_header(header_path)
    try:
        width, height, bands = (int(header[k]) for k in ("width", "height", "bands"))
    except ValueError as exc:
        raise DataError(f"{header_path}: non-integer dimension") from exc
    if min(width, height, bands) < 1:
        raise DataError(f"{header_path}: dimensions must be >= 1")
    data_path = header_path.parent / header["data"]
    if not data_path.is_file():
        raise DataError(f"cube payload not found: {data_path}")
    raw = np.fromfile(data_path, dtype="<f4")
    expected = width * height * bands
    if raw.size != expected or data_path.stat().st_size != 4 * expected:
        raise DataError(
            f"{data_path}: size mismatch, expected {expected} float32 values, found {data_path.stat().st_size / 4:g}"
        )
    bsq = raw.reshape(bands, height, width)
    bad = np.argwhere(~np.isfinite(bsq))
    if bad.size:
        b, r, c = bad[0]
        raise DataError(f"{data_path}: non-finite value at row {r}, col {c}, band {b}")
    return SpectralCube(np.transpose(bsq, (1, 2, 0)).astype(np.float64))


def write_cube(cube: SpectralCube, header_path: str | Path, data_name: str | None = None) -> Path:
    """Write ``cube`` as float32 BSQ plus header. Returns the header path."""
    header_path = Path(header_path)
    data_name = data_name or header_path.with_suffix(".bsq").name
    bsq = np.transpose(cube.values, (2, 0, 1)).astype("<f4")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    bsq.tofile(header_path.parent / data_name)
    header_path.write_text(
        f"width: {cube.width}\nheight: {cube.height}\nbands: {cube.bands}\n"
        f"data: {data_name}\nbyteorder: little\ndtype: float32\nlayout: bsq\n"
    )
    return header_path


def load_labels(path: str | Path, expected: tuple[int, int] | None = None) -> LabelMap:
    """Read a CSV label map. ``expected`` is ``(width, height)``."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"label file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([int(cell) for cell in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer label") from exc
            if len(rows[-1]) != len(rows[0]):
                raise DataError(f"{path}:{lineno}: row has {len(rows[-1])} columns, expected {len(rows[0])}")
    if not rows:
        raise DataError(f"{path}: empty label map")
    arr = np.array(rows, dtype=np.int64)
    if expected is not None:
        width, height = expected
        if arr.shape != (height, width):
            raise DataError(f"{path}: label map is {arr.shape[1]}x{arr.shape[0]}, expected {width}x{height}")
    if arr.min() < 0:
        r, c = np.argwhere(arr < 0)[0]
        raise DataError(f"{path}: negative label at row {r}, col {c}")
    return LabelMap(arr)


def write_labels(labels: np.ndarray | LabelMap, path: str | Path) -> None:
    arr = labels.labels if isinstance(labels, LabelMap) else np.asarray(labels)
    Path(path).write_text("".join(",".join(str(int(v)) for v in row) + "\n" for row in arr))


# ---------------------------------------------------------------- transforms


def normalize_bands(cube: SpectralCube) -> SpectralCube:
    """Z-score every band over all pixels (population std); constant bands become 0."""
    x = cube.pixels()
    # test constancy on the raw values: a rounded mean leaves tiny residuals
    varying = np.ptp(x, axis=0) > 0
    # z-scores are scale free; working in [-1, 1] avoids underflow and overflow
    scale = np.where(varying, np.max(np.abs(x), axis=0), 1.0)
    unit = x / scale
    centered = unit - unit.mean(axis=0)
    std = np.sqrt(np.mean(centered * centered, axis=0))
    out = np.where(varying, centered / np.where(varying, std, 1.0), 0.0)
    return SpectralCube(out.reshape(cube.values.shape))


def filter_classes(labels: LabelMap, min_pixels: int) -> tuple[LabelMap, dict[int, int]]:
    """Drop classes with fewer than ``min_pixels`` pixels and remap survivors to 1..C'.

    Returns the new map and ``{original: new}`` for the kept classes.
    """
    if min_pixels < 1:
        raise ValueError("min_pixels must be >= 1")
    counts = labels.class_counts()
    kept = [c for c in sorted(counts) if counts[c] >= min_pixels]
    if not kept:
        raise DataError(f"no class has at least {min_pixels} pixels")
    mapping = {orig: new for new, orig in enumerate(kept, 1)}
    lut = np.zeros(labels.class_count + 1, dtype=np.int64)
    for orig, new in mapping.items():
        lut[orig] = new
    return LabelMap(lut[labels.labels], class_count=len(kept)), mapping


def _fisher_yates(items: list[int], rng: random.Random) -> None:
    for i in range(len(items) - 1, 0, -1):
        j = rng.randrange(i + 1)
        items[i], items[j] = items[j], items[i]


def make_split(labels: LabelMap, spec: SplitSpec) -> Split:
    """Random per-class test / unary-train / beta-validation split.

    Each class's pixel indices are sorted, shuffled by Fisher-Yates with a
    ``random.Random(spec.seed)`` (MT19937) stream shared across classes in
    ascending class order, then cut as test | unary-train | validation.
    """
    flat = labels.flat()
    need = spec.train_per_class + spec.test_per_class
    rng = random.Random(spec.seed)
    n_unary = spec.unary_count
    unary, valid, test = {}, {}, {}
    for c in range(1, labels.class_count + 1):
        idx = np.flatnonzero(flat == c).tolist()
        if len(idx) < need:
            raise DataError(f"class {c} has {len(idx)} labeled pixels, needs {need}")
        _fisher_yates(idx, rng)
        t = spec.test_per_class
        test[c] = _freeze(np.array(idx[:t], dtype=np.int64))
        train = idx[t:need]
        unary[c] = _freeze(np.array(train[:n_unary], dtype=np.int64))
        valid[c] = _freeze(np.array(train[n_unary:], dtype=np.int64))
    return Split(unary, valid, test)


def remap_json(mapping: dict[int, int], counts: dict[int, int], min_pixels: int) -> str:
    return json.dumps(
        {
            "min_pixels": min_pixels,
            "mapping": {str(k): v for k, v in mapping.items()},
            "original_counts": {str(k): v for k, v in counts.items()},
        },
        indent=2,
        sort_keys=True,
    )
