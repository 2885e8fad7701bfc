"""Live render service: one image+depth session, parameter updates in,
rendered frames out.

A single writer stores validated+projected parameters under a lock and
leaves them in a depth-1 pending slot; one renderer worker drains the slot,
so bursts coalesce and only the latest pending update is rendered.  Frames
are broadcast to all subscribers tagged with the sequence number of the
parameters they show, in increasing order.
"""

from __future__ import annotations

import asyncio
import queue
import threading

import numpy as np

from .albedo import apply_albedo, estimate_illumination_mask
from .errors import SchemaError
from .fit import FitConfig, LossConfig, fit
from .geometry import normals_from_depth, resize_area
from .lights import LightingParams, ParamBounds, neutral_params, project_valid
from .presets import parse_preset, preset_doc
from .render import ShadingConfig, compose, light_map
from .io import encode_png_bytes

DEFAULT_PREVIEW_SHORT_SIDE = 512


class StudioSession:
    """Holds the scene, the current (projected) parameters, and the render
    worker.  All state transitions happen under one lock; snapshots are
    consistent (params, seq) pairs."""

    def __init__(
        self,
        image: np.ndarray,
        depth: np.ndarray,
        k: int = 9,
        shading: ShadingConfig = ShadingConfig(),
        bounds: ParamBounds = ParamBounds(),
        preview_short_side: int = DEFAULT_PREVIEW_SHORT_SIDE,
        threads: int = 1,
        use_albedo: bool = False,
        z_gain: float = 1.0,
    ):
        if depth.shape != image.shape[:2]:
            raise ValueError(f"depth shape {depth.shape} does not match image {image.shape[:2]}")
        base = image
        if use_albedo:
            base = apply_albedo(image, estimate_illumination_mask(image))
        self.k = k
        self.bounds = bounds
        self.threads = threads
        self.full_base = base
        self.full_depth = depth
        self.full_normals = normals_from_depth(depth, z_gain)
        h, w = depth.shape
        short = min(h, w)
        scale = min(1.0, preview_short_side / short)
        ph, pw = max(1, round(h * scale)), max(1, round(w * scale))
        self.preview_base = resize_area(base, ph, pw)
        self.preview_depth = resize_area(depth, ph, pw)
        self.preview_normals = normals_from_depth(self.preview_depth, z_gain)
        self.z_gain = z_gain

        self._lock = threading.Lock()
        self._cv = threading.Condition(self._lock)
        self._params = neutral_params(k)
        self._shading = shading
        self._seq = 0
        self._pending: tuple[int, LightingParams, ShadingConfig] | None = None
        self._rendering = False
        self._stopped = False
        self._subscribers: list[queue.SimpleQueue] = []
        self._worker = threading.Thread(target=self._render_loop, daemon=True)
        self._worker.start()

    # -- state ----------------------------------------------------------

    def submit_doc(self, doc) -> tuple[int, dict]:
        """Validate a preset document, project it, store it, queue a render.

        Returns (seq, applied-document).  Raises SchemaError on violation,
        leaving the session state unchanged.
        """
        loaded = parse_preset(doc)
        if loaded.params.k != self.k:
            raise SchemaError(f"k: session expects {self.k} lights, got {loaded.params.k}")
        return self.submit_params(loaded.params, loaded.shading)

    def submit_params(self, params: LightingParams, shading: ShadingConfig | None = None) -> tuple[int, dict]:
        projected = project_valid(params, self.bounds).params
        with self._cv:
            if shading is not None:
                self._shading = shading
            self._seq += 1
            self._params = projected
            self._pending = (self._seq, projected, self._shading)
            self._cv.notify_all()
            return self._seq, preset_doc(projected, self._shading)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "seq": self._seq,
                "width": self.full_depth.shape[1],
                "height": self.full_depth.shape[0],
                "preview_width": self.preview_depth.shape[1],
                "preview_height": self.preview_depth.shape[0],
                "params": preset_doc(self._params, self._shading),
            }

    def current(self) -> tuple[LightingParams, ShadingConfig, int]:
        with self._lock:
            return self._params, self._shading, self._seq

    def run_fit(self, target: np.ndarray, fit_cfg: FitConfig, loss_cfg: LossConfig) -> tuple[int, dict, float]:
        """Fit to a target image and apply the result as a normal update."""
        if target.shape[:2] != self.full_depth.shape:
            target = resize_area(target, *self.full_depth.shape)
        _, shading, _ = self.current()
        result = fit(self.full_base, target, self.full_depth, fit_cfg, loss_cfg,
                     shading=shading, z_gain=self.z_gain)
        seq, applied = self.submit_params(result.params)
        return seq, applied, float(result.loss_trace[-1])

    # -- rendering ------------------------------------------------------

    def render_preview(self, params: LightingParams, shading: ShadingConfig) -> np.ndarray:
        lmap = light_map(params, self.preview_depth, self.preview_normals, shading, threads=self.threads)
        return compose(self.preview_base, lmap)

    def render_full(self) -> np.ndarray:
        params, shading, _ = self.current()
        lmap = light_map(params, self.full_depth, self.full_normals, shading, threads=self.threads)
        return compose(self.full_base, lmap)

    def _render_loop(self):
        while True:
            with self._cv:
                while self._pending is None and not self._stopped:
                    self._cv.wait()
                if self._stopped:
                    return
                seq, params, shading = self._pending
                self._pending = None
                self._rendering = True
                subscribers = list(self._subscribers)
            frame = self.render_preview(params, shading)
            png = encode_png_bytes(frame)
            for sub in subscribers:
                sub.put((seq, png))
            with self._cv:
                self._rendering = False
                self._cv.notify_all()

    def wait_idle(self, timeout: float = 10.0) -> bool:
        """Block until no render is pending or in flight (for tests/scripts)."""
        with self._cv:
            return self._cv.wait_for(lambda: self._pending is None and not self._rendering, timeout)

    # -- subscription ---------------------------------------------------

    def subscribe(self) -> queue.SimpleQueue:
        sub: queue.SimpleQueue = queue.SimpleQueue()
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: queue.SimpleQueue) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)
        sub.put(None)

    def stop(self):
        with self._cv:
            self._stopped = True
            self._cv.notify_all()
        self._worker.join(timeout=5.0)


def create_app(session: StudioSession, static_dir: str | None = None):
    """FastAPI app over a single session.

    Endpoints: GET /api/snapshot, POST /api/params, POST /api/fit (raw image
    body), GET /api/export, plus the /ws socket carrying set_params inbound
    and ack/error/frame messages outbound (frame headers are followed by a
    binary PNG payload).
    """
    from fastapi import FastAPI, Query, Request, WebSocket, WebSocketDisconnect
    from fastapi.responses import JSONResponse, Response

    app = FastAPI(title="relight studio")
    app.state.session = session

    @app.get("/api/snapshot")
    def snapshot():
        return session.snapshot()

    @app.post("/api/params")
    async def set_params(request: Request):
        doc = await request.json()
        try:
            seq, applied = session.submit_doc(doc)
        except SchemaError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return {"seq": seq, "params": applied}

    @app.post("/api/fit")
    async def fit_endpoint(
        request: Request,
        k: int | None = Query(default=None),
        coarse_iters: int = Query(default=60),
        refine_iters: int = Query(default=30),
    ):
        import io as _io

        from PIL import Image as PILImage

        body = await request.body()
        try:
            img = PILImage.open(_io.BytesIO(body))
            img.load()
        except Exception:
            return JSONResponse({"error": "body is not a decodable image"}, status_code=422)
        target = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        cfg = FitConfig(k=k or session.k, coarse_iters=coarse_iters, refine_iters=refine_iters,
                        threads=session.threads)
        if cfg.k != session.k:
            return JSONResponse({"error": f"session is configured for k={session.k}"}, status_code=422)
        loop = asyncio.get_running_loop()
        seq, applied, final_loss = await loop.run_in_executor(
            None, session.run_fit, target, cfg, LossConfig()
        )
        return {"seq": seq, "params": applied, "final_loss": final_loss}

    @app.get("/api/export")
    def export():
        frame = session.render_full()
        return Response(content=encode_png_bytes(frame), media_type="image/png")

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        sub = session.subscribe()
        send_lock = asyncio.Lock()
        loop = asyncio.get_running_loop()

        async def pump():
            while True:
                item = await loop.run_in_executor(None, sub.get)
                if item is None:
                    return
                seq, png = item
                async with send_lock:
                    await websocket.send_json({"type": "frame", "seq": seq})
                    await websocket.send_bytes(png)

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                msg = await websocket.receive_json()
                msg_type = msg.get("type")
                if msg_type == "set_params":
                    try:
                        seq, applied = session.submit_doc(msg.get("params"))
                        reply = {"type": "ack", "seq": seq, "params": applied}
                    except SchemaError as exc:
                        reply = {"type": "error", "message": str(exc)}
                else:
                    reply = {"type": "error", "message": f"unknown message type {msg_type!r}"}
                async with send_lock:
                    await websocket.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            session.unsubscribe(sub)
            pump_task.cancel()

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="studio-ui")

    @app.on_event("shutdown")
    def shutdown():
        session.stop()

    return app
