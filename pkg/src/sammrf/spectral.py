"""Spectral angle mapper and the ESAM / squared-exponential kernels."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

MIN_NORM = 1e-12


@dataclass(frozen=True)
class EsamParams:
    """``gain * exp(-angle / scale)``."""

    gain: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        for name in ("gain", "scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"ESAM {name} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class SeParams:
    """``gain * exp(-|x1 - x2|^2 / (2 lengthscale^2))``."""

    gain: float = 1.0
    lengthscale: float = 1.0

    def __post_init__(self):
        for name in ("gain", "lengthscale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"SE {name} must be finite and > 0, got {v}")


def _as_rows(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a spectrum or a list of spectra")
    return np.ascontiguousarray(arr)


# Entry (i, j) of every matrix below is a plain left-to-right sum over bands,
# so it never depends on the other rows/columns or on how work is split.


@njit(cache=True)
def _dots(a, bt):
    n, nb = a.shape
    m = bt.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        row = out[i]
        for k in range(nb):
            x = a[i, k]
            for j in range(m):
                row[j] += x * bt[k, j]
    return out


@njit(cache=True)
def _sq_dists(a, bt):
    n, nb = a.shape
    m = bt.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        row = out[i]
        for k in range(nb):
            x = a[i, k]
            for j in range(m):
                d = x - bt[k, j]
                row[j] += d * d
    return out


@njit(cache=True)
def _angles(an, bnt):
    # 2 atan2(|a - b|, |a + b|) on unit vectors: equal to arccos(a.b) but
    # well conditioned near 0 and pi, where arccos amplifies rounding
    n, nb = an.shape
    m = bnt.shape[1]
    minus = np.zeros((n, m))
    plus = np.zeros((n, m))
    for i in range(n):
        rm = minus[i]
        rp = plus[i]
        for k in range(nb):
            x = an[i, k]
            for j in range(m):
                y = bnt[k, j]
                rm[j] += (x - y) * (x - y)
                rp[j] += (x + y) * (x + y)
    return 2.0 * np.arctan2(np.sqrt(minus), np.sqrt(plus))


@njit(cache=True)
def _norms_raw(a):
    n, nb = a.shape
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for k in range(nb):
            acc += a[i, k] * a[i, k]
        out[i] = np.sqrt(acc)
    return out


def _norms(x: np.ndarray, name: str) -> np.ndarray:
    n = _norms_raw(x)
    bad = np.flatnonzero(n < MIN_NORM)
    if bad.size:
        raise ValueError(f"{name}: spectrum {bad[0]} has near-zero norm {n[bad[0]]:.3g}")
    return n


def _pair_rows(a, b):
    a = _as_rows(a, "x1")
    b = _as_rows(b, "x2")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"length mismatch: {a.shape[1]} vs {b.shape[1]}")
    return a, b


def cosine_matrix(a, b) -> np.ndarray:
    """Clamped cosine similarity between every row of ``a`` and of ``b``."""
    a, b = _pair_rows(a, b)
    na = _norms(a, "x1")
    nb = _norms(b, "x2")
    cos = _dots(a, np.ascontiguousarray(b.T)) / (na[:, None] * nb[None, :])
    return np.clip(cos, -1.0, 1.0, out=cos)


def angle_matrix(a, b) -> np.ndarray:
    """Spectral angles (radians) between every row of ``a`` and of ``b``.

    Same value as ``arccos(cosine_matrix(a, b))`` up to rounding, computed in a
    form that stays accurate for nearly parallel or antiparallel spectra.
    """
    a, b = _pair_rows(a, b)
    an = a / _norms(a, "x1")[:, None]
    bn = b / _norms(b, "x2")[:, None]
    return _angles(an, np.ascontiguousarray(bn.T))


def spectral_angle(x1, x2) -> float:
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.ndim != 1 or x2.ndim != 1:
        raise ValueError("spectral_angle takes two 1-D spectra")
    if x1.shape != x2.shape:
        raise ValueError(f"length mismatch: {x1.size} vs {x2.size}")
    return float(angle_matrix(x1, x2)[0, 0])


def sq_distance_matrix(a, b) -> np.ndarray:
    a, b = _pair_rows(a, b)
    return _sq_dists(a, np.ascontiguousarray(b.T))


def kernel_matrix(a, b, params: EsamParams | SeParams) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(a[i], b[j])``; the params type selects the kernel."""
    if isinstance(params, EsamParams):
        return params.gain * np.exp(-angle_matrix(a, b) / params.scale)
    if isinstance(params, SeParams):
        return params.gain * np.exp(-sq_distance_matrix(a, b) / (2.0 * params.lengthscale ** 2))
    raise TypeError(f"unknown kernel parameters {type(params).__name__}")


def _pair(x1, x2):
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.ndim != 1 or x1.shape != x2.shape:
        raise ValueError(f"length mismatch: {x1.shape} vs {x2.shape}")
    return x1, x2


def esam(x1, x2, params: EsamParams = EsamParams()) -> float:
    x1, x2 = _pair(x1, x2)
    return float(kernel_matrix(x1, x2, params)[0, 0])


def se_kernel(x1, x2, params: SeParams = SeParams()) -> float:
    x1, x2 = _pair(x1, x2)
    return float(kernel_matrix(x1, x2, params)[0, 0])


def min_eigenvalue(k: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetrized matrix."""
    sym = 0.5 * (k + k.T)
    return float(np.linalg.eigvalsh(sym)[0]) if sym.size else 0.0


def check_psd(k: np.ndarray, tol: float = 1e-8, label: str = "kernel") -> bool:
    """Report (via logging) whether ``k`` is positive semidefinite within ``tol``."""
    lam = min_eigenvalue(k)
    if lam < -tol:
        log.warning("%s matrix is not PSD: min eigenvalue %.3g", label, lam)
        return False
    return True
