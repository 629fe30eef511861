"""Full-reference image quality metrics: PSNR and single-scale SSIM.

Both operate on RGB arrays in [0, 1] (channels x height x width) and are
computed in float64. PSNR of identical images is +infinity in memory and is
written to report files as the finite sentinel 1e9 dB.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .tensor import ContractViolation

PSNR_INF_SENTINEL_DB = 1e9

# single-scale SSIM constants: 11x11 Gaussian window, sigma 1.5, dynamic range 1
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    """10*log10(1/MSE) in dB over all channels and pixels; inf if identical."""
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise ContractViolation(
            f"psnr shape mismatch: reference {ref.shape} vs test {tst.shape}")
    mse = np.mean((ref - tst) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _windowed_mean(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Separable Gaussian-weighted local mean over valid window positions."""
    k = win.size
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=0)
    rows = rows @ win                       # (H-k+1, W)
    cols = np.lib.stride_tricks.sliding_window_view(rows, k, axis=1)
    return cols @ win                       # (H-k+1, W-k+1)


def ssim(reference: np.ndarray, test: np.ndarray) -> float:
    """Mean single-scale structural similarity over valid window positions.

    11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.0,
    computed per channel and averaged.
    """
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise ContractViolation(
            f"ssim shape mismatch: reference {ref.shape} vs test {tst.shape}")
    h, w = ref.shape[-2:]
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise ContractViolation(
            f"ssim needs H, W >= {_SSIM_WINDOW}, got {h}x{w}")
    if ref.ndim == 2:
        ref, tst = ref[None], tst[None]

    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = (_SSIM_K1 * 1.0) ** 2
    c2 = (_SSIM_K2 * 1.0) ** 2
    per_channel = []
    for x, y in zip(ref, tst):
        mx = _windowed_mean(x, win)
        my = _windowed_mean(y, win)
        mxx = _windowed_mean(x * x, win)
        myy = _windowed_mean(y * y, win)
        mxy = _windowed_mean(x * y, win)
        vx = mxx - mx * mx
        vy = myy - my * my
        cov = mxy - mx * my
        score = ((2 * mx * my + c1) * (2 * cov + c2) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2)))
        per_channel.append(score.mean())
    return float(np.mean(per_channel))


@dataclass
class QualityReport:
    """Per-image PSNR/SSIM plus their arithmetic means."""

    per_image: List[Tuple[str, float, float]] = field(default_factory=list)

    def add(self, image_id: str, psnr_db: float, ssim_value: float) -> None:
        self.per_image.append((image_id, float(psnr_db), float(ssim_value)))

    @property
    def psnr_db(self) -> float:
        return float(np.mean([p for _, p, _ in self.per_image]))

    @property
    def ssim(self) -> float:
        return float(np.mean([s for _, _, s in self.per_image]))

    def to_jsonl(self) -> str:
        """Line-delimited records, one per image plus a summary line.

        Infinite PSNR is serialized as the 1e9 dB sentinel to keep report
        files finite-valued.
        """
        def finite(value: float) -> float:
            return PSNR_INF_SENTINEL_DB if math.isinf(value) else value

        lines = []
        for image_id, p, s in self.per_image:
            lines.append(json.dumps({
                "type": "image", "id": image_id,
                "psnr_db": round(finite(p), 6), "ssim": round(s, 8),
            }, sort_keys=True))
        lines.append(json.dumps({
            "type": "summary", "count": len(self.per_image),
            "psnr_db": round(finite(self.psnr_db), 6),
            "ssim": round(self.ssim, 8),
        }, sort_keys=True))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "QualityReport":
        report = QualityReport()
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("type") == "image":
                report.add(rec["id"], rec["psnr_db"], rec["ssim"])
        return report
