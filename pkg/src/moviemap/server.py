"""Read-only HTTP service over a loaded package.

All playback state lives in the client; the server only hands out immutable
package content, so every response carries the package hash as ETag plus an
immutable cache policy. Endpoints (all GET):

    /api/manifest                         full manifest JSON
    /api/sections/{id}                    one section's metadata
    /api/sections/{id}/frames/{k}         k-th frame of the section (PNG)
    /api/turns/{node}/{from}/{to}/{k}     k-th turn frame (PNG)
    /api/exits?node=&arriving=            exits at a node (filtered if arriving given)
    /api/billboards?video=&t=             billboards near a playback time
"""
from __future__ import annotations

import bisect
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .assemble import exits_toward
from .geometry import wrap_angle
from .store import MovieMapPackage, billboards_near, load_package
from .trajectory import MapPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlaybackPointer:
    """A client playback position: a section, a time within it, a view yaw."""

    section_id: str
    t_s: float
    view_yaw_rad: float = 0.0


def position_at(pkg: MovieMapPackage, pointer: PlaybackPointer) -> tuple[MapPoint, float]:
    """Map position and travel heading at a playback time within a section.

    Position interpolates linearly between the poses bracketing t; heading
    interpolates by shortest arc.
    """
    section = pkg.sections_by_id.get(pointer.section_id)
    if section is None:
        raise KeyError(f"unknown section {pointer.section_id!r}")
    samples = section["samples"]
    t0, t1 = samples[0][0], samples[-1][0]
    if not t0 <= pointer.t_s <= t1:
        raise ValueError(f"t={pointer.t_s} outside section span [{t0}, {t1}]")
    times = [s[0] for s in samples]
    i = bisect.bisect_right(times, pointer.t_s) - 1
    if i >= len(samples) - 1:
        s = samples[-1]
        return MapPoint(s[1], s[2]), float(s[3])
    s0, s1 = samples[i], samples[i + 1]
    span = s1[0] - s0[0]
    frac = 0.0 if span == 0 else (pointer.t_s - s0[0]) / span
    x = s0[1] + frac * (s1[1] - s0[1])
    y = s0[2] + frac * (s1[2] - s0[2])
    # wrap only when the shortest-arc step leaves the range, so a query at a
    # sample timestamp returns that pose's heading bit-exact
    heading = s0[3] + frac * float(wrap_angle(s1[3] - s0[3]))
    if not -math.pi <= heading < math.pi:
        heading = float(wrap_angle(heading))
    return MapPoint(x, y), heading


def create_app(pkg: MovieMapPackage, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="moviemap server", docs_url=None, redoc_url=None)
    graph = pkg.graph()
    turn_assets = pkg.turn_assets_by_key
    sections = pkg.sections_by_id
    etag = f'"{pkg.package_hash}"'

    @app.exception_handler(RequestValidationError)
    async def _bad_query(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.middleware("http")
    async def _immutable_cache(request: Request, call_next):
        response = await call_next(request)
        response.headers["ETag"] = etag
        response.headers["Cache-Control"] = "public, max-age=31536000, immutable"
        return response

    def _png(path: Path) -> FileResponse:
        return FileResponse(path, media_type="image/png")

    @app.get("/api/manifest")
    def manifest():
        return pkg.manifest

    @app.get("/api/sections/{section_id}")
    def section(section_id: str):
        entry = sections.get(section_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown section {section_id!r}"})
        return entry

    @app.get("/api/sections/{section_id}/frames/{k}")
    def section_frame(section_id: str, k: int):
        entry = sections.get(section_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown section {section_id!r}"})
        if not 0 <= k < len(entry["frames"]):
            return JSONResponse(status_code=404, content={"detail": f"frame {k} out of range"})
        return _png(pkg.asset_path(entry["frames"][k]))

    @app.get("/api/turns/{node_id}/{from_section}/{to_section}/{k}")
    def turn_frame(node_id: str, from_section: str, to_section: str, k: int):
        asset = turn_assets.get((node_id, from_section, to_section))
        if asset is None:
            return JSONResponse(
                status_code=404,
                content={"detail": f"no turn asset ({node_id}, {from_section}, {to_section})"},
            )
        if not 0 <= k < len(asset["frames"]):
            return JSONResponse(status_code=404, content={"detail": f"turn frame {k} out of range"})
        return _png(pkg.asset_path(asset["frames"][k]))

    @app.get("/api/exits")
    def exits(
        node: str = Query(...),
        arriving: str | None = Query(default=None),
        include_uturn: bool = Query(default=False),
    ):
        if node not in graph.nodes:
            return JSONResponse(status_code=404, content={"detail": f"unknown node {node!r}"})
        if arriving is None:
            result = graph.outgoing.get(node, [])
        else:
            if arriving not in graph.sections:
                return JSONResponse(status_code=404, content={"detail": f"unknown section {arriving!r}"})
            try:
                result = exits_toward(graph, node, arriving, include_uturn=include_uturn)
            except ValueError as exc:
                return JSONResponse(status_code=400, content={"detail": str(exc)})
        return [
            {"section_id": e.section_id, "bearing_rad": e.bearing_rad, "label": e.label}
            for e in result
        ]

    @app.get("/api/billboards")
    def billboards(video: str = Query(...), t: float = Query(...), window_s: float = Query(default=5.0)):
        try:
            hits = billboards_near(pkg, video, t, window_s)
        except KeyError:
            return JSONResponse(status_code=404, content={"detail": f"unknown video {video!r}"})
        return [b.to_json() for b in hits]

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(pkg_dir: str | Path, bind_addr: str = "127.0.0.1:8080", ui_dir: str | Path | None = None) -> None:
    """Load a package and serve it until interrupted (MM_LOG sets the log level)."""
    import uvicorn

    pkg = load_package(pkg_dir)
    app = create_app(pkg, ui_dir=ui_dir)
    host, _, port = bind_addr.partition(":")
    level = os.environ.get("MM_LOG", "info").lower()
    logger.info("serving package %s (hash %s) on %s", pkg_dir, pkg.package_hash[:12], bind_addr)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8080"), log_level=level)
