"""Blind tuning: estimate the severity, then restore with it.

Uses the checkpoint from demo 03 (which bundles the severity estimator).
For images degraded at levels the estimator never saw exactly, compares
restoration quality when dialing in (a) the true level, (b) the estimated
level, (c) a deliberately wrong level.
"""

from pathlib import Path

import numpy as np

from hyperrestore import checkpoint
from hyperrestore.datasets import load_corpus
from hyperrestore.degrade import add_gaussian_noise, stable_seed
from hyperrestore.estimator import EstimatorNet, estimate_level
from hyperrestore.metrics import psnr
from hyperrestore.network import restore_image

out = Path(__file__).parent / "output"
ckpt_path = out / "toy_denoiser.hrck"
if not ckpt_path.is_file():
    raise SystemExit("run demos/03_train_toy_denoiser.py first")

model, est_table = checkpoint.load(ckpt_path)
estimator = EstimatorNet.from_tensor_table(est_table)
records = load_corpus(out / "corpus")

print(f"{'sigma':>6} {'estimate':>9} {'true-dial':>10} {'blind-dial':>11} {'wrong-dial':>11}")
for sigma in (15.0, 25.0, 40.0):
    estimates, true_db, blind_db, wrong_db = [], [], [], []
    for rec in records:
        noisy = add_gaussian_noise(rec.pixels, sigma,
                                   seed=stable_seed("demo5", rec.id, sigma))
        estimate = estimate_level(estimator, noisy)
        estimates.append(estimate)
        true_db.append(psnr(rec.pixels, restore_image(model, noisy, level=sigma)))
        blind_db.append(psnr(rec.pixels, restore_image(model, noisy, level=estimate)))
        wrong_db.append(psnr(rec.pixels, restore_image(model, noisy, level=50.0)))
    print(f"{sigma:6.0f} {np.mean(estimates):9.2f} {np.mean(true_db):9.2f} dB"
          f" {np.mean(blind_db):9.2f} dB {np.mean(wrong_db):9.2f} dB")

print("\nblind dialing tracks the true level closely; a fixed wrong dial "
      "costs visibly more at the mild severities.")
