"""Train the desk-scale adaptive denoiser end to end.

One compact model learns three noise levels at once; its residual-block
kernels come from the scalar-conditioned generator, so after training it can
be dialed to any severity in (and a bit beyond) the trained span. Takes a
few minutes on one CPU core. The checkpoint feeds demos 04-06.
"""

import json
import time
from pathlib import Path

import numpy as np

from hyperrestore import checkpoint
from hyperrestore.datasets import PatchSource, build_synthetic_corpus, load_corpus
from hyperrestore.degrade import add_gaussian_noise, stable_seed
from hyperrestore.estimator import INPUT_SIZE, train_estimator
from hyperrestore.metrics import psnr
from hyperrestore.network import ArchConfig, restore_image
from hyperrestore.trainer import TrainConfig, train

out = Path(__file__).parent / "output"
out.mkdir(parents=True, exist_ok=True)
corpus_dir = out / "corpus"
build_synthetic_corpus(corpus_dir)
records = load_corpus(corpus_dir)

config = TrainConfig(levels=[10.0, 30.0, 50.0], task="noise", steps=2000,
                     batch_size=24, patch_size=32, learning_rate=1.5e-3,
                     lr_halve_every=500, seed=0, log_every=200, val_every=500)
arch = ArchConfig(channels=8, num_resblocks=4)
source = PatchSource(records, config.patch_size, seed=100, augment_flips=False)

print(f"training {arch.channels}-channel, {arch.num_resblocks}-block model "
      f"at sigmas {config.levels} for {config.steps} steps...")
started = time.time()
state = train(config, source, arch, progress=lambda r: print(json.dumps(r)))
print(f"done in {(time.time() - started) / 60:.1f} min")

print("\nfitting the blind severity estimator...")
est_source = PatchSource(records, INPUT_SIZE, seed=200)
estimator = train_estimator(config.levels, est_source, steps=800, seed=0)

ckpt_path = out / "toy_denoiser.hrck"
checkpoint.save(state.model, ckpt_path,
                estimator_tensors=estimator.tensor_table(), seed=config.seed)
print(f"checkpoint written to {ckpt_path}")

print("\nrestoration quality vs the noisy input (corpus mean):")
for level in config.levels:
    noisy_db, restored_db = [], []
    for rec in records:
        noisy = add_gaussian_noise(rec.pixels, level,
                                   seed=stable_seed("demo3", rec.id, level))
        noisy_db.append(psnr(rec.pixels, noisy))
        restored_db.append(psnr(rec.pixels, restore_image(state.model, noisy,
                                                          level=level)))
    print(f"  sigma={level:4.0f}: noisy {np.mean(noisy_db):6.2f} dB -> "
          f"restored {np.mean(restored_db):6.2f} dB")

print("\nthe same model at an untrained in-between severity (sigma=20):")
for dial in (10.0, 20.0, 30.0):
    scores = []
    for rec in records:
        noisy = add_gaussian_noise(rec.pixels, 20.0, seed=stable_seed("demo3b", rec.id))
        scores.append(psnr(rec.pixels, restore_image(state.model, noisy, level=dial)))
    print(f"  dialed to {dial:4.0f}: {np.mean(scores):6.2f} dB")
