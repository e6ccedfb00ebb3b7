"""Stateless HTTP render service and the render-request plumbing shared with the CLI.

All endpoints compute from immutable state loaded at startup; every render is
a pure function of the request, so identical requests give byte-identical
PNG bodies, under concurrency and across restarts.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from pydantic import BaseModel

from .dataset import load_dataset
from .errors import PatchviewError, SampleNotFoundError
from .geometry import SphericalPose
from .pipeline import BACKENDS, synthesize_view
from .warp import default_patch_spec

__all__ = ["RenderContext", "RenderRequest", "RenderBody", "create_app", "serve", "png_bytes"]

OUTPUT_LAYERS = ("composite", "sketch", "patches", "all")

class RenderBody(BaseModel):
    """JSON body of POST /api/render."""

    sample_id: str
    cad_id: Optional[int] = None
    azimuth_deg: Optional[float] = None
    elevation_deg: Optional[float] = None
    radius: Optional[float] = None
    backend: str = "baseline"
    output: str = "composite"




@dataclass
class RenderRequest:
    """One render: which sample, which CAD (override = shape transfer), which pose."""

    sample_id: str
    cad_id: Optional[int] = None
    azimuth_deg: Optional[float] = None
    elevation_deg: Optional[float] = None
    radius: Optional[float] = None
    backend: str = "baseline"
    output: str = "composite"

    def validate(self) -> None:
        for name in ("azimuth_deg", "elevation_deg", "radius"):
            value = getattr(self, name)
            if value is not None and not np.isfinite(value):
                raise PatchviewError(f"{name} must be finite")
        if self.radius is not None and self.radius <= 0:
            raise PatchviewError(f"radius must be > 0, got {self.radius}")
        if self.output not in OUTPUT_LAYERS:
            raise PatchviewError(
                f"output must be one of {OUTPUT_LAYERS}, got '{self.output}'")
        if self.backend not in BACKENDS:
            raise PatchviewError(
                f"unknown backend '{self.backend}' (have {sorted(BACKENDS)})")


class RenderContext:
    """Immutable dataset state plus request resolution and rendering."""

    def __init__(self, data_root, visibility_threshold: float = 0.5):
        self.root = Path(data_root)
        self.catalog, samples = load_dataset(self.root)
        self.samples = {s.id: s for s in samples}
        self.spec = default_patch_spec(self.catalog.class_name)
        self.visibility_threshold = visibility_threshold

    def sample(self, sample_id: str):
        try:
            return self.samples[sample_id]
        except KeyError:
            raise SampleNotFoundError(f"unknown sample id '{sample_id}'") from None

    def resolve_pose(self, sample, req: RenderRequest) -> SphericalPose:
        """Target pose: request fields override the sample's annotated pose."""
        base = sample.view if isinstance(sample.view, SphericalPose) else None
        az = req.azimuth_deg if req.azimuth_deg is not None else \
            (base.azimuth_deg if base else 0.0)
        el = req.elevation_deg if req.elevation_deg is not None else \
            (base.elevation_deg if base else 10.0)
        rad = req.radius if req.radius is not None else \
            (base.radius if base else 120.0)
        return SphericalPose(az, el, rad)

    def render(self, req: RenderRequest) -> dict[str, np.ndarray]:
        """Layers for a request: composite / sketch / patches (+ prior for files)."""
        req.validate()
        sample = self.sample(req.sample_id)
        cad = self.catalog[sample.cad_id if req.cad_id is None else req.cad_id]
        pose = self.resolve_pose(sample, req)
        result = synthesize_view(sample, pose, cad, self.spec,
                                 backend=req.backend,
                                 visibility_threshold=self.visibility_threshold)
        return {
            "composite": result.image,
            "sketch": result.icn_input.sketch.pixels,
            "patches": result.icn_input.patches_composite,
            "prior": result.icn_input.prior.pixels,
            "_timings_ms": result.timings_ms,
        }


def png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(array)).save(buf, format="PNG")
    return buf.getvalue()


def create_app(data_root, visibility_threshold: float = 0.5,
               viewer_dist=None):
    """FastAPI app over an immutable RenderContext.

    Endpoints: GET /api/health, GET /api/cads, GET /api/samples,
    POST /api/render (JSON body -> PNG). Errors are structured JSON with
    400 (invalid request), 404 (unknown ids), 500 (internal).
    """
    from fastapi import FastAPI
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response

    ctx = RenderContext(data_root, visibility_threshold=visibility_threshold)
    app = FastAPI(title="patchview render service")

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request, exc):
        return JSONResponse(status_code=400,
                            content={"error": "invalid_request", "message": str(exc)})

    @app.get("/api/health")
    def health():
        return {"status": "ok", "samples": len(ctx.samples), "cads": len(ctx.catalog)}

    @app.get("/api/cads")
    def cads():
        return [{"id": m.id, "name": m.name, "face_count": m.mesh.face_count}
                for m in (ctx.catalog.models[i] for i in ctx.catalog.ids())]

    @app.get("/api/samples")
    def samples():
        out = []
        for sid in sorted(ctx.samples):
            s = ctx.samples[sid]
            view = ({"azimuth_deg": s.view.azimuth_deg,
                     "elevation_deg": s.view.elevation_deg,
                     "radius": s.view.radius}
                    if isinstance(s.view, SphericalPose)
                    else {"matrix": [float(x) for x in s.view.matrix().ravel()]})
            out.append({"id": sid, "cad_id": s.cad_id, "view": view})
        return out

    @app.post("/api/render")
    def render(body: RenderBody):
        req = RenderRequest(**body.model_dump())
        if req.output == "all":
            return JSONResponse(status_code=400, content={
                "error": "invalid_request",
                "message": "output='all' writes multiple files and is CLI-only; "
                           "request composite, sketch, or patches"})
        try:
            layers = ctx.render(req)
        except SampleNotFoundError as exc:
            return JSONResponse(status_code=404,
                                content={"error": exc.kind, "message": str(exc)})
        except PatchviewError as exc:
            status = 404 if exc.kind == "cad_resolution" else 400
            return JSONResponse(status_code=status,
                                content={"error": exc.kind, "message": str(exc)})
        return Response(content=png_bytes(layers[req.output]), media_type="image/png")

    if viewer_dist is None:
        candidate = Path(__file__).resolve().parents[2] / "viewer" / "dist"
        viewer_dist = candidate if candidate.is_dir() else None
    if viewer_dist is not None and Path(viewer_dist).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/viewer", StaticFiles(directory=str(viewer_dist), html=True),
                  name="viewer")
    return app


def serve(data_root, host: str = "127.0.0.1", port: int = 8600,
          visibility_threshold: float = 0.5) -> None:
    """Run the render service until interrupted."""
    import uvicorn

    app = create_app(data_root, visibility_threshold=visibility_threshold)
    uvicorn.run(app, host=host, port=port, log_level="info")
