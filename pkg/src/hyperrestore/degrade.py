"""Deterministic, seedable degradation operators and level normalization.

Raw task units (noise sigma in 8-bit intensity, JPEG quality 1-100, SR scale
factor) are mapped linearly onto a conditioning scalar c over the trained
span; c always increases with the raw level regardless of whether that means
more or less degradation, and values outside [0, 1] are allowed for
extrapolation (flagged, not rejected).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.fft import dctn, idctn

from .tensor import ContractViolation, clip01

TASKS = ("noise", "jpeg", "sr")


@dataclass
class DegradationSpec:
    """One degradation instance: task kind, raw level, trained span."""

    task: str
    level: float
    level_range: Tuple[float, float]
    seed: Optional[int] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ContractViolation(f"unknown task {self.task!r}, expected one of {TASKS}")
        lo, hi = self.level_range
        if not lo < hi:
            raise ContractViolation(f"degenerate level range {self.level_range}")


class ConditioningScalar(NamedTuple):
    c: float
    extrapolated: bool


def normalize_level(spec: DegradationSpec) -> ConditioningScalar:
    """Map a raw level onto c = (level - min) / (max - min).

    Strictly monotone and exactly invertible via level = c*(max-min) + min.
    c outside [0, 1] is permitted (extrapolation) and flagged.
    """
    lo, hi = spec.level_range
    c = (spec.level - lo) / (hi - lo)
    return ConditioningScalar(c=c, extrapolated=not 0.0 <= c <= 1.0)


def denormalize_level(c: float, level_range: Tuple[float, float]) -> float:
    lo, hi = level_range
    if not lo < hi:
        raise ContractViolation(f"degenerate level range {level_range}")
    return c * (hi - lo) + lo


# -- additive Gaussian noise ----------------------------------------------


def add_gaussian_noise(image: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise of std sigma/255, clamp to [0,1]."""
    if sigma < 0:
        raise ContractViolation(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return np.asarray(image, dtype=np.float32).copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(size=image.shape) * (sigma / 255.0)
    return clip01(np.asarray(image, dtype=np.float64) + noise).astype(np.float32)


# -- JPEG compression model ------------------------------------------------

# Base quantization tables (row-major 8x8), luminance then chrominance.
_LUMA_QUANT = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)

_CHROMA_QUANT = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=np.float64)


def scaled_quant_tables(quality: int) -> Tuple[np.ndarray, np.ndarray]:
    """Quality-scaled luminance/chrominance tables.

    s = 5000/q for q < 50 else 200 - 2q; entries floor((q*s + 50)/100),
    clamped to [1, 255].
    """
    if not 1 <= quality <= 100:
        raise ContractViolation(f"jpeg quality must be in [1, 100], got {quality}")
    s = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality

    def scale(table):
        return np.clip(np.floor((table * s + 50.0) / 100.0), 1.0, 255.0)

    return scale(_LUMA_QUANT), scale(_CHROMA_QUANT)


def _rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """BT.601 full-range RGB -> YCbCr, both in 8-bit scale (3, H, W)."""
    r, g, b = rgb[0], rgb[1], rgb[2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return np.stack([y, cb, cr])


def _ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = ycc[0], ycc[1] - 128.0, ycc[2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b])


def _blockify(channel: np.ndarray) -> np.ndarray:
    h, w = channel.shape
    return (channel.reshape(h // 8, 8, w // 8, 8)
            .transpose(0, 2, 1, 3)
            .reshape(-1, 8, 8))


def _unblockify(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    return (blocks.reshape(h // 8, w // 8, 8, 8)
            .transpose(0, 2, 1, 3)
            .reshape(h, w))


def jpeg_degrade(image: np.ndarray, quality: int) -> np.ndarray:
    """Apply the 4:4:4 JPEG transform-quantization round trip.

    RGB -> full-range BT.601 YCbCr, per-channel 8x8 orthonormal block DCT on
    level-shifted samples, quantization by the quality-scaled standard
    tables with round-to-nearest, dequantization, inverse DCT, back to RGB,
    clamped to [0, 1]. No chroma subsampling and no entropy coding: this
    models exactly the lossy part of the codec.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[-2:]
    if h % 8 or w % 8:
        raise ContractViolation(f"jpeg_degrade needs H, W multiples of 8, got {h}x{w}")
    qluma, qchroma = scaled_quant_tables(quality)

    ycc = _rgb_to_ycbcr(img * 255.0)
    out = np.empty_like(ycc)
    for ch in range(3):
        qtable = qluma if ch == 0 else qchroma
        blocks = _blockify(ycc[ch] - 128.0)
        coeffs = dctn(blocks, type=2, norm="ortho", axes=(-2, -1))
        coeffs = np.round(coeffs / qtable) * qtable
        rec = idctn(coeffs, type=2, norm="ortho", axes=(-2, -1))
        out[ch] = _unblockify(rec, h, w) + 128.0
    rgb = _ycbcr_to_rgb(out) / 255.0
    return clip01(rgb).astype(np.float32)


# -- bicubic resampling (Catmull-Rom, a = -0.5) -----------------------------


def _cubic_weight(t: np.ndarray) -> np.ndarray:
    """Cubic convolution kernel with a = -0.5."""
    at = np.abs(t)
    at2, at3 = at * at, at * at * at
    w = np.where(at <= 1.0, 1.5 * at3 - 2.5 * at2 + 1.0,
                 np.where(at < 2.0, -0.5 * at3 + 2.5 * at2 - 4.0 * at + 2.0, 0.0))
    return w


def _resample_axis(img: np.ndarray, out_len: int, axis: int) -> np.ndarray:
    """Resample one spatial axis with the 4-tap bicubic kernel.

    Center-aligned mapping src = (dst + 0.5) * in/out - 0.5, edge samples
    clamped; weights renormalized so they sum to one exactly (constants are
    preserved bit-for-bit after float32 rounding).
    """
    in_len = img.shape[axis]
    dst = np.arange(out_len, dtype=np.float64)
    src = (dst + 0.5) * (in_len / out_len) - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    taps = np.stack([base - 1, base, base + 1, base + 2])          # (4, out)
    weights = np.stack([_cubic_weight(frac + 1.0), _cubic_weight(frac),
                        _cubic_weight(frac - 1.0), _cubic_weight(frac - 2.0)])
    weights /= weights.sum(axis=0, keepdims=True)
    taps = np.clip(taps, 0, in_len - 1)

    moved = np.moveaxis(img, axis, -1).astype(np.float64)
    out = np.zeros(moved.shape[:-1] + (out_len,), dtype=np.float64)
    for i in range(4):
        out += moved[..., taps[i]] * weights[i]
    return np.moveaxis(out, -1, axis)


def bicubic_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bicubic resample of a (..., H, W) array to (..., out_h, out_w)."""
    if out_h < 1 or out_w < 1:
        raise ContractViolation(f"target size must be positive, got {out_h}x{out_w}")
    out = _resample_axis(image, out_h, axis=-2)
    out = _resample_axis(out, out_w, axis=-1)
    return out.astype(np.float32)


def sr_degrade(image: np.ndarray, scale: float) -> Tuple[np.ndarray, np.ndarray]:
    """Bicubic downscale by 1/scale plus bicubic re-upscale to original size.

    Returns (low_res, pre_upsampled); the pre-upsampled image is what the
    resolution-preserving restoration network consumes.
    """
    if scale < 1:
        raise ContractViolation(f"sr scale must be >= 1, got {scale}")
    h, w = image.shape[-2:]
    lh = max(1, int(round(h / scale)))
    lw = max(1, int(round(w / scale)))
    low = clip01(bicubic_resize(image, lh, lw)).astype(np.float32)
    up = clip01(bicubic_resize(low, h, w)).astype(np.float32)
    return low, up


def apply_degradation(image: np.ndarray, task: str, level: float,
                      seed: int = 0) -> np.ndarray:
    """Dispatch to the task operator; returns the network-input image."""
    if task == "noise":
        return add_gaussian_noise(image, level, seed=seed)
    if task == "jpeg":
        return jpeg_degrade(image, int(round(level)))
    if task == "sr":
        return sr_degrade(image, level)[1]
    raise ContractViolation(f"unknown task {task!r}, expected one of {TASKS}")


def stable_seed(*parts) -> int:
    """Order-stable 32-bit seed derived from arbitrary labels (no builtin hash)."""
    import zlib
    text = "\x1f".join(str(p) for p in parts)
    return zlib.crc32(text.encode("utf-8"))
