"""Sweep the conditioning scalar and watch PSNR peak near the true level.

Loads the checkpoint from demo 03, degrades the corpus at one trained
severity, and evaluates restoration across a dense scalar grid, including
the extrapolation zone outside the trained span. Prints an ASCII curve.
"""

from pathlib import Path

import numpy as np

from hyperrestore import checkpoint
from hyperrestore.datasets import load_corpus
from hyperrestore.degrade import add_gaussian_noise, stable_seed
from hyperrestore.metrics import psnr
from hyperrestore.network import restore_image

out = Path(__file__).parent / "output"
ckpt_path = out / "toy_denoiser.hrck"
if not ckpt_path.is_file():
    raise SystemExit("run demos/03_train_toy_denoiser.py first")

model, _ = checkpoint.load(ckpt_path)
records = load_corpus(out / "corpus")

sigma = 30.0
truth = model.normalize_level(sigma)
grid = np.arange(-0.25, 1.2501, 0.125)

curve = []
for c in grid:
    scores = []
    for rec in records:
        noisy = add_gaussian_noise(rec.pixels, sigma,
                                   seed=stable_seed("demo4", rec.id))
        scores.append(psnr(rec.pixels, restore_image(model, noisy, c=float(c))))
    curve.append(float(np.mean(scores)))

best = grid[int(np.argmax(curve))]
lo, hi = min(curve), max(curve)
print(f"noisy corpus at sigma={sigma:g}; true scalar c={truth:.3f}\n")
for c, value in zip(grid, curve):
    bar = "#" * int(round(40 * (value - lo) / max(hi - lo, 1e-9)))
    zone = " " if 0.0 <= c <= 1.0 else "*"  # * marks extrapolation
    marker = "  <- best" if c == best else ("  <- true" if abs(c - truth) < 1e-9 else "")
    print(f"{zone} c={c:+.3f}  {value:6.2f} dB  {bar}{marker}")
print(f"\nbest c = {best:+.3f}, true c = {truth:.3f} "
      f"(off by {abs(best - truth) / 0.125:.1f} grid steps)")
print("rows marked * are outside the trained span (extrapolation).")
