"""HTTP service behind the interactive tuning UI.

A loaded checkpoint is read-only and shared by all requests. Each session
holds one uploaded source image (optionally a clean reference for quality
probes) plus an LRU cache of restored PNG bytes keyed by the conditioning
scalar quantized to 1e-3, so identical requests return byte-identical
bodies. Generated kernel sets are cached separately (LRU, 32 entries)
because a slider interaction hammers many nearby levels.
"""

from __future__ import annotations

import io
import math
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.responses import HTMLResponse, JSONResponse
from PIL import Image

from . import checkpoint as ckpt
from .estimator import EstimatorNet, INPUT_SIZE, estimate_level
from .hypernet import generate_network_weights
from .metrics import psnr
from .network import HyperRestoreModel, forward, parameter_breakdown
from .tensor import Tensor, clip01, no_grad

DEFAULT_MAX_UPLOAD = 4 * 1024 * 1024
DEFAULT_SESSION_TIMEOUT = 15 * 60.0
WEIGHT_CACHE_CAPACITY = 32
RESTORE_CACHE_CAPACITY = 64
C_QUANTUM = 1e-3

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>hyperrestore</title></head>
<body><h1>hyperrestore tuning service</h1>
<p>No UI bundle is installed. The API is live: POST /api/session,
GET /api/restore?session=..&amp;level=.., GET /api/model.</p></body></html>
"""


class _LRU:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: OrderedDict = OrderedDict()

    def get(self, key):
        if key not in self._data:
            return None
        self._data.move_to_end(key)
        return self._data[key]

    def put(self, key, value) -> None:
        self._data[key] = value
        self._data.move_to_end(key)
        while len(self._data) > self.capacity:
            self._data.popitem(last=False)


@dataclass
class Session:
    image: np.ndarray
    reference: Optional[np.ndarray]
    last_access: float
    restored: _LRU = field(default_factory=lambda: _LRU(RESTORE_CACHE_CAPACITY))


class TunerEngine:
    """Model plus per-session state; session/cache mutation is lock-guarded."""

    def __init__(self, model: HyperRestoreModel,
                 estimator: Optional[EstimatorNet] = None,
                 session_timeout: float = DEFAULT_SESSION_TIMEOUT):
        self.model = model
        self.estimator = estimator
        self.session_timeout = session_timeout
        self.sessions: Dict[str, Session] = {}
        self.weight_cache = _LRU(WEIGHT_CACHE_CAPACITY)
        self.lock = threading.Lock()

    def _purge_idle(self, now: float) -> None:
        dead = [sid for sid, s in self.sessions.items()
                if now - s.last_access > self.session_timeout]
        for sid in dead:
            del self.sessions[sid]

    def open_session(self, image: np.ndarray,
                     reference: Optional[np.ndarray]) -> str:
        sid = uuid.uuid4().hex
        now = time.monotonic()
        with self.lock:
            self._purge_idle(now)
            self.sessions[sid] = Session(image=image, reference=reference,
                                         last_access=now)
        return sid

    def get_session(self, sid: str) -> Optional[Session]:
        now = time.monotonic()
        with self.lock:
            self._purge_idle(now)
            session = self.sessions.get(sid)
            if session is not None:
                session.last_access = now
        return session

    def kernels_for(self, qc: float) -> List[np.ndarray]:
        with self.lock:
            cached = self.weight_cache.get(qc)
        if cached is not None:
            return cached
        with no_grad():
            kernels = [k.data for k in
                       generate_network_weights(self.model.hypernet, qc)]
        with self.lock:
            self.weight_cache.put(qc, kernels)
        return kernels

    def restore_png(self, session: Session, level: float) -> bytes:
        c = self.model.normalize_level(level)
        qc = round(c / C_QUANTUM) * C_QUANTUM
        with self.lock:
            cached = session.restored.get(qc)
        if cached is not None:
            return cached
        kernels = self.kernels_for(qc)
        with no_grad():
            out = forward(Tensor(session.image),
                          [Tensor(k) for k in kernels],
                          self.model.shared, self.model.cfg)
        png = _encode_png(clip01(out.data))
        with self.lock:
            session.restored.put(qc, png)
        return png


def _decode_png(raw: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(raw)) as img:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float32) / 255.0
    chw = arr.transpose(2, 0, 1)
    h, w = chw.shape[1:]
    ch, cw = (h // 2) * 2, (w // 2) * 2  # network wants even sides
    return np.ascontiguousarray(chw[:, :ch, :cw])


def _encode_png(pixels: np.ndarray) -> bytes:
    u8 = np.round(np.asarray(pixels, dtype=np.float64) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8.transpose(1, 2, 0), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def create_app(checkpoint_path=None, static_dir=None,
               max_upload_bytes: int = DEFAULT_MAX_UPLOAD,
               session_timeout: float = DEFAULT_SESSION_TIMEOUT) -> FastAPI:
    app = FastAPI(title="hyperrestore tuning service")
    app.state.engine = None
    app.state.max_upload = max_upload_bytes
    app.state.static_dir = Path(static_dir) if static_dir else None

    if checkpoint_path is not None:
        model, est_table = ckpt.load(checkpoint_path)
        estimator = (EstimatorNet.from_tensor_table(est_table)
                     if est_table else None)
        app.state.engine = TunerEngine(model, estimator,
                                       session_timeout=session_timeout)

    def engine_or_503():
        engine = app.state.engine
        if engine is None:
            return None, JSONResponse({"error": "no checkpoint loaded"},
                                      status_code=503)
        return engine, None

    @app.post("/api/session")
    async def open_session(request: Request, image: UploadFile,
                           reference: Optional[UploadFile] = None):
        engine, err = engine_or_503()
        if err:
            return err
        raw = await image.read(app.state.max_upload + 1)
        if len(raw) > app.state.max_upload:
            return JSONResponse({"error": "image too large"}, status_code=413)
        try:
            pixels = _decode_png(raw)
        except Exception:
            return JSONResponse({"error": "image is not a decodable PNG"},
                                status_code=415)
        if pixels.shape[1] < 2 or pixels.shape[2] < 2:
            return JSONResponse({"error": "image too small"}, status_code=415)
        ref_pixels = None
        if reference is not None:
            ref_raw = await reference.read(app.state.max_upload + 1)
            try:
                ref_pixels = _decode_png(ref_raw)
            except Exception:
                return JSONResponse({"error": "reference is not a decodable PNG"},
                                    status_code=415)

        sid = engine.open_session(pixels, ref_pixels)
        body = {"session_id": sid,
                "width": int(pixels.shape[2]),
                "height": int(pixels.shape[1])}
        if engine.estimator is not None and min(pixels.shape[1:]) >= INPUT_SIZE:
            body["estimated_level"] = float(estimate_level(engine.estimator,
                                                           pixels))
        return body

    @app.get("/api/restore")
    def restore(session: str, level: float):
        engine, err = engine_or_503()
        if err:
            return err
        if not math.isfinite(level):
            return JSONResponse({"error": "level must be finite"},
                                status_code=400)
        sess = engine.get_session(session)
        if sess is None:
            return JSONResponse({"error": f"unknown session {session}"},
                                status_code=404)
        png = engine.restore_png(sess, level)
        return Response(content=png, media_type="image/png")

    @app.get("/api/quality")
    def quality(session: str, level: float):
        """Test-mode probe: PSNR of the restoration against the uploaded reference."""
        engine, err = engine_or_503()
        if err:
            return err
        if not math.isfinite(level):
            return JSONResponse({"error": "level must be finite"},
                                status_code=400)
        sess = engine.get_session(session)
        if sess is None:
            return JSONResponse({"error": f"unknown session {session}"},
                                status_code=404)
        if sess.reference is None:
            return JSONResponse({"error": "session has no reference image"},
                                status_code=404)
        png = engine.restore_png(sess, level)
        restored = _decode_png(png)
        return {"level": level, "psnr_db": psnr(sess.reference, restored)}

    @app.get("/api/model")
    def model_info():
        engine, err = engine_or_503()
        if err:
            return err
        model = engine.model
        total, breakdown = parameter_breakdown(model.cfg)
        return {
            "task": model.task,
            "level_range": list(model.level_range),
            "channels": model.cfg.channels,
            "num_resblocks": model.cfg.num_resblocks,
            "parameters": {"total": total, **breakdown},
            "has_estimator": engine.estimator is not None,
        }

    @app.get("/", response_class=HTMLResponse)
    def index():
        static = app.state.static_dir
        if static and (static / "index.html").is_file():
            return HTMLResponse((static / "index.html").read_text())
        return HTMLResponse(_FALLBACK_PAGE)

    @app.get("/assets/{name}")
    def asset(name: str):
        static = app.state.static_dir
        if not static:
            return JSONResponse({"error": "no UI bundle"}, status_code=404)
        path = (static / name).resolve()
        if not path.is_file() or static.resolve() not in path.parents:
            return JSONResponse({"error": f"no asset {name}"}, status_code=404)
        media = {"js": "text/javascript", "css": "text/css",
                 "map": "application/json"}.get(path.suffix.lstrip("."),
                                                "application/octet-stream")
        return Response(content=path.read_bytes(), media_type=media)

    return app
