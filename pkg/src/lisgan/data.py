"""Data sources: synthetic Gaussian mixtures and small image corpora."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pnm

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


@dataclass
class MixtureSpec:
    centers: np.ndarray
    std: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        k = len(self.centers)
        if k < 1:
            raise ValueError("mixture needs at least one mode")
        if self.std <= 0:
            raise ValueError("mode std must be positive")
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        if w.shape != (k,) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative, one per mode, and sum to 1")
        self.weights = w

    @property
    def n_modes(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def ring_mixture(n_modes: int = 8, radius: float = 2.0, std: float = 0.02) -> MixtureSpec:
    angles = 2 * np.pi * np.arange(n_modes) / n_modes
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return MixtureSpec(centers, std)


def sample_mixture(spec: MixtureSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    comp = rng.choice(spec.n_modes, size=n, p=spec.weights)
    return spec.centers[comp] + spec.std * rng.standard_normal((n, spec.dim))


@dataclass
class ImageCorpus:
    images: np.ndarray  # (n, C, H, W) float32 in [0, 1]
    paths: list[str] = field(default_factory=list)

    @property
    def geometry(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def __len__(self) -> int:
        return len(self.images)


def center_crop(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    return img[top:top + s, left:left + s]


def resize(img: np.ndarray, size: tuple[int, int], method: str = "bilinear") -> np.ndarray:
    """Resize an (H, W, C) float image."""
    h, w = img.shape[:2]
    th, tw = size
    if (h, w) == (th, tw):
        return img.copy()
    if method == "nearest":
        ys = np.minimum((np.arange(th) + 0.5) * h / th, h - 1).astype(int)
        xs = np.minimum((np.arange(tw) + 0.5) * w / tw, w - 1).astype(int)
        return img[ys][:, xs]
    if method != "bilinear":
        raise ValueError(f"unknown resize method {method!r}")
    ys = np.clip((np.arange(th) + 0.5) * h / th - 0.5, 0, h - 1)
    xs = np.clip((np.arange(tw) + 0.5) * w / tw - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def _to_channels(img: np.ndarray, channels: int) -> np.ndarray:
    if img.ndim == 2:
        img = img[:, :, None]
    if img.shape[2] == channels:
        return img
    if channels == 1:
        luma = np.array([0.299, 0.587, 0.114])
        return (img @ luma)[:, :, None]
    return np.repeat(img, channels, axis=2)


def load_image_corpus(path, geometry: tuple[int, int, int], method: str = "bilinear") -> ImageCorpus:
    """Decode every PGM/PPM under ``path``, center-crop, resize, scale to [0, 1].

    ``geometry`` is (channels, height, width). Undecodable files are
    skipped with a warning.
    """
    root = Path(path)
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES) if root.is_dir() else []
    if not files:
        raise FileNotFoundError(f"no PGM/PPM images found in {root}")
    c, h, w = geometry
    images, kept = [], []
    for f in files:
        try:
            raw = pnm.read(f)
        except (pnm.PNMError, OSError) as exc:
            log.warning("skipping %s: %s", f, exc)
            continue
        img = raw.astype(np.float64) / 255.0
        img = _to_channels(center_crop(img if img.ndim == 3 else img[:, :, None]), c)
        img = resize(img, (h, w), method)
        images.append(img.transpose(2, 0, 1))
        kept.append(str(f))
    if not images:
        raise ValueError(f"no usable images in {root}")
    return ImageCorpus(np.stack(images).astype(np.float32), kept)


class MixtureSource:
    def __init__(self, spec: MixtureSpec):
        self.spec = spec
        self.geometry = (spec.dim,)

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return sample_mixture(self.spec, m, rng).astype(np.float32)


class CorpusSource:
    def __init__(self, corpus: ImageCorpus):
        self.corpus = corpus
        self.geometry = corpus.geometry

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.corpus), size=m)
        return self.corpus.images[idx]
