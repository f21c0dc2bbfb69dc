"""Screenshot frames as normalized RGB arrays, plus pixel-level comparison."""

from __future__ import annotations

import functools
import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError


class Frame:
    """An RGB screenshot with pixel values normalized to [0, 1].

    Thin wrapper over a (height, width, 3) float array; construction
    validates shape and value range.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InputError(f"frame must have shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError("frame dimensions must be positive")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InputError("frame values must lie in [0, 1]")
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    @classmethod
    def from_png(cls, path: str | Path) -> "Frame":
        try:
            with Image.open(path) as img:
                rgb = img.convert("RGB")
                arr = np.asarray(rgb, dtype=np.float64) / 255.0
        except OSError as exc:
            raise InputError(f"cannot read frame {path}: {exc}") from None
        return cls(arr)

    def to_pil(self) -> Image.Image:
        return Image.fromarray((self.pixels * 255.0).round().astype(np.uint8), "RGB")

    def resized(self, width: int, height: int) -> "Frame":
        if (width, height) == self.size:
            return self
        img = self.to_pil().resize((max(1, width), max(1, height)), Image.BILINEAR)
        return Frame(np.asarray(img, dtype=np.float64) / 255.0)

    def downscaled(self, factor: int) -> "Frame":
        if factor <= 1:
            return self
        return self.resized(max(1, self.width // factor), max(1, self.height // factor))

    def fit_max_edge(self, max_edge: int) -> "Frame":
        longest = max(self.width, self.height)
        if longest <= max_edge:
            return self
        scale = max_edge / longest
        return self.resized(max(1, round(self.width * scale)),
                            max(1, round(self.height * scale)))

    def mean_intensity_histogram(self, bins: int = 16) -> np.ndarray:
        """Normalized histogram of per-pixel grayscale intensity."""
        gray = self.pixels.mean(axis=2)
        hist, _ = np.histogram(gray, bins=bins, range=(0.0, 1.0))
        return hist / gray.size

    def content_digest(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.pixels.shape).encode())
        h.update(np.ascontiguousarray(self.pixels).tobytes())
        return h.hexdigest()


def frame_mse(a: Frame, b: Frame) -> float:
    """Mean squared difference over all pixels and channels, in [0, 1]."""
    if a.pixels.shape != b.pixels.shape:
        raise InputError(
            f"frame dimensions differ: {a.size} vs {b.size}")
    return float(np.mean((a.pixels - b.pixels) ** 2))


def histogram_distance(a: Frame, b: Frame, bins: int = 16) -> float:
    """L1 distance between mean-intensity histograms, in [0, 2]."""
    return float(np.abs(a.mean_intensity_histogram(bins)
                        - b.mean_intensity_histogram(bins)).sum())


@functools.lru_cache(maxsize=128)
def _load_cached(path: str, mtime_ns: int) -> Frame:
    return Frame.from_png(path)


def load_frame(path: str | Path) -> Frame:
    """Load a PNG frame, reusing recently decoded files."""
    p = Path(path)
    try:
        mtime_ns = p.stat().st_mtime_ns
    except OSError as exc:
        raise InputError(f"cannot read frame {p}: {exc}") from None
    return _load_cached(str(p), mtime_ns)
