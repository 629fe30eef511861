"""Drive the tuning service end to end, headlessly.

Starts the HTTP service in-process against the demo checkpoint, uploads a
degraded image, sweeps the severity like the browser slider does, and shows
the cache returning byte-identical bodies. For the real browser UI, run:

    hyperrestore serve --checkpoint demos/output/toy_denoiser.hrck \
        --ui-dir frontend/dist

and open http://127.0.0.1:8700/.
"""

import io
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from hyperrestore.datasets import load_corpus
from hyperrestore.degrade import add_gaussian_noise
from hyperrestore.service import create_app

out = Path(__file__).parent / "output"
ckpt_path = out / "toy_denoiser.hrck"
if not ckpt_path.is_file():
    raise SystemExit("run demos/03_train_toy_denoiser.py first")

records = load_corpus(out / "corpus")
clean = records[4].pixels
noisy = add_gaussian_noise(clean, 30.0, seed=9)


def png_bytes(pixels):
    u8 = np.round(np.clip(pixels, 0, 1) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8.transpose(1, 2, 0), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


app = create_app(checkpoint_path=ckpt_path, static_dir=Path("frontend/dist"))
with TestClient(app) as client:
    info = client.get("/api/model").json()
    print(f"model: {info['channels']} channels, {info['num_resblocks']} blocks, "
          f"{info['parameters']['total']} parameters, "
          f"levels {info['level_range']}")

    resp = client.post("/api/session",
                       files={"image": ("noisy.png", png_bytes(noisy)),
                              "reference": ("clean.png", png_bytes(clean))})
    session = resp.json()
    print(f"session {session['session_id'][:8]}..., "
          f"{session['width']}x{session['height']}, "
          f"blind estimate: {session.get('estimated_level', float('nan')):.1f}")

    print("\nslider sweep (PSNR against the uploaded reference):")
    for level in (10, 20, 30, 40, 50):
        quality = client.get("/api/quality",
                             params={"session": session["session_id"],
                                     "level": level}).json()
        print(f"  level {level:3d}: {quality['psnr_db']:6.2f} dB")

    a = client.get("/api/restore", params={"session": session["session_id"],
                                           "level": 30})
    b = client.get("/api/restore", params={"session": session["session_id"],
                                           "level": 30})
    print(f"\nrepeated identical request byte-identical: {a.content == b.content} "
          f"({len(a.content)} bytes)")
