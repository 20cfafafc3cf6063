"""Label-map rendering to binary PPM with a fixed class palette."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Kelly's colors of maximum contrast, white and black omitted
KELLY16 = (
    (0xF3, 0xC3, 0x00), (0x87, 0x56, 0x92), (0xF3, 0x84, 0x00), (0xA1, 0xCA, 0xF1),
    (0xBE, 0x00, 0x32), (0xC2, 0xB2, 0x80), (0x84, 0x84, 0x82), (0x00, 0x88, 0x56),
    (0xE6, 0x8F, 0xAC), (0x00, 0x67, 0xA5), (0xF9, 0x93, 0x79), (0x60, 0x4E, 0x97),
    (0xF6, 0xA6, 0x00), (0xB3, 0x44, 0x6C), (0xDC, 0xD3, 0x00), (0x88, 0x2D, 0x17),
)


@dataclass(frozen=True)
class Palette:
    colors: tuple[tuple[int, int, int], ...] = KELLY16
    background: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        allc = list(self.colors) + [self.background]
        if len(set(allc)) != len(allc):
            raise ValueError("palette colors must be distinct")
        if any(not 0 <= v <= 255 for c in allc for v in c):
            raise ValueError("palette channels must lie in 0..255")

    def lookup(self, class_count: int) -> np.ndarray:
        """``(C + 1, 3)`` uint8 table; row 0 is the background."""
        if class_count > len(self.colors):
            raise ValueError(f"palette has {len(self.colors)} colors, {class_count} classes requested")
        return np.array([self.background, *self.colors[:class_count]], dtype=np.uint8)


def ppm_bytes(labels: np.ndarray, class_count: int | None = None, palette: Palette = Palette()) -> bytes:
    lab = np.asarray(labels, dtype=np.int64)
    if lab.ndim != 2:
        raise ValueError("label map must be 2-D")
    if lab.min() < 0:
        raise ValueError("negative label")
    C = int(lab.max()) if class_count is None else class_count
    if lab.max() > C:
        raise ValueError(f"label {lab.max()} exceeds class count {C}")
    rgb = palette.lookup(C)[lab]
    h, w = lab.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def write_ppm(labels: np.ndarray, path: str | Path, class_count: int | None = None,
              palette: Palette = Palette()) -> None:
    Path(path).write_bytes(ppm_bytes(labels, class_count, palette))
