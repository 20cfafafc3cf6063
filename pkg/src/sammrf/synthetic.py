"""Synthetic piecewise-homogeneous scenes for tests, demos and timing."""
from __future__ import annotations

import numpy as np

from .hypercube import LabelMap, SpectralCube


def make_scene(width: int = 64, height: int = 64, classes: int = 4, bands: int = 30,
               regions: int | None = None, separation: float = 0.15, noise: float = 0.12,
               seed: int = 0) -> tuple[SpectralCube, LabelMap]:
    """Voronoi regions, each one class, filled with noisy class spectra.

    Class means share a common smooth spectrum and differ by ``separation``
    times a random perturbation; every pixel gets multiplicative brightness
    jitter plus additive Gaussian noise of relative size ``noise``.
    """
    rng = np.random.default_rng(seed)
    regions = regions or 3 * classes
    seeds_xy = rng.uniform(0, 1, (regions, 2)) * (width, height)
    region_class = np.concatenate([np.arange(1, classes + 1), rng.integers(1, classes + 1, regions - classes)])
    yy, xx = np.mgrid[0:height, 0:width]
    d = (xx[..., None] - seeds_xy[:, 0]) ** 2 + (yy[..., None] - seeds_xy[:, 1]) ** 2
    labels = region_class[np.argmin(d, axis=2)]

    wl = np.linspace(0, 1, bands)
    base = 1.0 + 0.5 * np.sin(2 * np.pi * wl) + 0.3 * wl
    means = base * (1.0 + separation * rng.standard_normal((classes, bands)))
    spectra = means[labels - 1]
    gain = rng.uniform(0.7, 1.3, (height, width, 1))
    values = gain * spectra + noise * base.mean() * rng.standard_normal((height, width, bands))
    return SpectralCube(values), LabelMap(labels, class_count=classes)
