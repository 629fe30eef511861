"""Image ingestion, synthetic corpus generation, and patch sampling.

Images load as float32 RGB in [0, 1], center-cropped to multiples of 8 on
both sides (8x8 block alignment for the JPEG operator, even sizes for the
network). Loading order is lexicographic by filename so corpora enumerate
identically across runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

from .tensor import ContractViolation

logger = logging.getLogger(__name__)

_EXTENSIONS = {".png", ".ppm"}
MIN_SIDE = 16


@dataclass
class ImageRecord:
    id: str
    pixels: np.ndarray     # (3, H, W) float32 in [0, 1]
    source: Path


def _to_chw_float(img: Image.Image) -> np.ndarray:
    rgb = img.convert("RGB")
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    return arr.transpose(2, 0, 1)


def _center_crop_multiple(pixels: np.ndarray, multiple: int = 8) -> np.ndarray:
    _, h, w = pixels.shape
    ch = (h // multiple) * multiple
    cw = (w // multiple) * multiple
    if ch == 0 or cw == 0:
        return pixels[:, :0, :0]
    top = (h - ch) // 2
    left = (w - cw) // 2
    return pixels[:, top:top + ch, left:left + cw]


def load_image(path: Path) -> np.ndarray:
    """Load one 8-bit PNG/PPM as (3, H, W) float32, cropped to multiples of 8."""
    with Image.open(path) as img:
        pixels = _to_chw_float(img)
    return np.ascontiguousarray(_center_crop_multiple(pixels))


def save_image(pixels: np.ndarray, path: Path) -> None:
    """Write a [0,1] (3, H, W) array as 8-bit PNG, rounding to the 1/255 grid."""
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    u8 = np.round(arr * 255.0).astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(u8, mode="RGB").save(path)


def load_corpus(directory) -> List[ImageRecord]:
    """Load every readable PNG/PPM under ``directory``, lexicographic order.

    Unreadable or too-small files are skipped with a warning; an empty
    result is an error naming the path.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ContractViolation(f"corpus directory does not exist: {directory}")
    records: List[ImageRecord] = []
    for path in sorted(directory.iterdir(), key=lambda p: p.name):
        if path.suffix.lower() not in _EXTENSIONS or not path.is_file():
            continue
        try:
            pixels = load_image(path)
        except Exception as exc:  # unreadable file: warn and move on
            logger.warning("skipping unreadable image %s: %s", path, exc)
            continue
        if pixels.shape[1] < MIN_SIDE or pixels.shape[2] < MIN_SIDE:
            logger.warning("skipping %s: smaller than %dpx after crop", path, MIN_SIDE)
            continue
        records.append(ImageRecord(id=path.stem, pixels=pixels, source=path))
    if not records:
        raise ContractViolation(f"no usable images found in {directory}")
    return records


class PatchSource:
    """Seeded uniform random crops (with optional horizontal flips)."""

    def __init__(self, records: List[ImageRecord], patch_size: int,
                 seed: int = 0, augment_flips: bool = True):
        if not records:
            raise ContractViolation("PatchSource needs a non-empty record list")
        min_side = min(min(r.pixels.shape[1], r.pixels.shape[2]) for r in records)
        if patch_size > min_side:
            raise ContractViolation(
                f"patch size {patch_size} exceeds smallest image side {min_side}")
        self.records = records
        self.patch_size = patch_size
        self.augment_flips = augment_flips
        self._rng = np.random.default_rng(seed)

    def sample(self, n: int) -> List[np.ndarray]:
        """Draw ``n`` patches; identical seeds yield identical sequences."""
        p = self.patch_size
        patches = []
        for _ in range(n):
            rec = self.records[int(self._rng.integers(len(self.records)))]
            _, h, w = rec.pixels.shape
            top = int(self._rng.integers(h - p + 1))
            left = int(self._rng.integers(w - p + 1))
            patch = rec.pixels[:, top:top + p, left:left + p]
            if self.augment_flips and self._rng.integers(2):
                patch = patch[:, :, ::-1]
            patches.append(np.ascontiguousarray(patch))
        return patches


# -- synthetic benchmark corpus ---------------------------------------------


def _filtered_noise(rng: np.random.Generator, size: int, blur: int) -> np.ndarray:
    """Smooth colored texture: box-blurred white noise, normalized per channel."""
    img = rng.random((3, size + blur, size + blur))
    kernel = np.ones(blur) / blur
    for axis in (1, 2):
        img = np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="valid"),
                                  axis, img)
    img = img[:, :size, :size]
    lo = img.min(axis=(1, 2), keepdims=True)
    hi = img.max(axis=(1, 2), keepdims=True)
    return (img - lo) / np.maximum(hi - lo, 1e-9)


def _checkerboard(size: int, period: int, phase_colors) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    mask = ((yy // period) + (xx // period)) % 2
    a, b = phase_colors
    img = np.where(mask[None], np.asarray(a)[:, None, None],
                   np.asarray(b)[:, None, None])
    return img.astype(np.float64)


def _ramp(size: int, direction: str, colors) -> np.ndarray:
    t = np.linspace(0.0, 1.0, size)
    grad = t[None, :] if direction == "h" else t[:, None]
    grad = np.broadcast_to(grad, (size, size))
    a, b = np.asarray(colors[0]), np.asarray(colors[1])
    return a[:, None, None] * (1 - grad) + b[:, None, None] * grad


def _plasma(size: int, fx: float, fy: float, mix) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = 0.5 + 0.25 * np.sin(2 * np.pi * (fx * xx + fy * yy)) \
        + 0.25 * np.sin(2 * np.pi * (fy * xx - fx * yy + 0.3))
    return np.clip(np.stack([base * m for m in mix]), 0.0, 1.0)


def _disks(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    img = np.full((3, size, size), 0.15)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(count):
        cy, cx = rng.integers(0, size, 2)
        radius = rng.integers(size // 12, size // 4)
        color = rng.random(3) * 0.8 + 0.1
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
        img[:, mask] = color[:, None]
    return img


def build_synthetic_corpus(directory, size: int = 96, seed: int = 7) -> List[Path]:
    """Write the deterministic 12-image benchmark corpus (PNG).

    Ramps, checkerboards, filtered-noise textures, sinusoidal plasmas, and
    disk scenes: license-clean stand-ins with natural-image-like local
    smoothness, so every experiment runs offline.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    images = {
        "ramp_h": _ramp(size, "h", ([0.05, 0.1, 0.3], [0.9, 0.8, 0.6])),
        "ramp_v": _ramp(size, "v", ([0.8, 0.2, 0.1], [0.1, 0.4, 0.9])),
        "checker_4": _checkerboard(size, 4, ([0.85, 0.85, 0.8], [0.2, 0.25, 0.3])),
        "checker_8": _checkerboard(size, 8, ([0.9, 0.5, 0.2], [0.1, 0.3, 0.6])),
        "texture_soft": _filtered_noise(rng, size, 9),
        "texture_mid": _filtered_noise(rng, size, 5),
        "texture_fine": _filtered_noise(rng, size, 3),
        "plasma_low": _plasma(size, 1.5, 2.0, (1.0, 0.8, 0.6)),
        "plasma_high": _plasma(size, 4.0, 3.0, (0.6, 0.9, 1.0)),
        "disks_a": _disks(rng, size, 6),
        "disks_b": _disks(rng, size, 9),
        "mix_ramp_texture": np.clip(
            0.6 * _ramp(size, "h", ([0.1, 0.1, 0.1], [0.9, 0.9, 0.9]))
            + 0.4 * _filtered_noise(rng, size, 4), 0.0, 1.0),
    }
    paths = []
    for name, pixels in images.items():
        path = directory / f"{name}.png"
        save_image(pixels, path)
        paths.append(path)
    return paths
