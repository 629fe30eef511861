"""The three degradation operators, written out as images.

Generates the shipped synthetic corpus, then degrades one image with
Gaussian noise at several sigmas, JPEG at several qualities, and bicubic
down/up-scaling at several factors. Outputs land in demos/output/.
"""

from pathlib import Path

from hyperrestore.datasets import build_synthetic_corpus, load_corpus, save_image
from hyperrestore.degrade import add_gaussian_noise, jpeg_degrade, sr_degrade
from hyperrestore.metrics import psnr, ssim

out = Path(__file__).parent / "output" / "degradations"
out.mkdir(parents=True, exist_ok=True)

corpus_dir = Path(__file__).parent / "output" / "corpus"
build_synthetic_corpus(corpus_dir)
records = load_corpus(corpus_dir)
image = records[6].pixels  # a textured one
print(f"source image: {records[6].id} {image.shape[1]}x{image.shape[2]}")
save_image(image, out / "clean.png")

print("\nGaussian noise (sigma in 8-bit units):")
for sigma in (10, 30, 50):
    noisy = add_gaussian_noise(image, sigma, seed=1)
    save_image(noisy, out / f"noise_sigma{sigma}.png")
    print(f"  sigma={sigma:3d}: PSNR {psnr(image, noisy):6.2f} dB, "
          f"SSIM {ssim(image, noisy):.4f}")

print("\nJPEG transform round trip (quality):")
for quality in (10, 30, 50, 80):
    degraded = jpeg_degrade(image, quality)
    save_image(degraded, out / f"jpeg_q{quality}.png")
    print(f"  q={quality:3d}: PSNR {psnr(image, degraded):6.2f} dB, "
          f"SSIM {ssim(image, degraded):.4f}")

print("\nbicubic downscale + re-upscale (scale factor):")
for scale in (2, 3, 4):
    low, up = sr_degrade(image, scale)
    save_image(low, out / f"sr_x{scale}_low.png")
    save_image(up, out / f"sr_x{scale}_input.png")
    print(f"  x{scale}: low-res {low.shape[1]}x{low.shape[2]}, "
          f"re-upscaled PSNR {psnr(image, up):6.2f} dB")

print(f"\nimages written to {out}")
