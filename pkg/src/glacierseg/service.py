"""Read-only HTTP service exposing evaluation artifacts to the panel.

The service reads a completed evaluation directory (records.jsonl, meta.json,
per-patch PNGs) at startup and never mutates it; every response is a
deterministic function of that state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .analysis import EvalRecord, accuracy_curve, read_records_jsonl


class ServiceError(Exception):
    pass


@dataclass
class ServeState:
    records: list[EvalRecord]
    root: Path
    meta: dict
    static_dir: Path | None = None


def load_state(root, static_dir=None) -> ServeState:
    root = Path(root)
    records = read_records_jsonl(root / "records.jsonl")
    meta_path = root / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return ServeState(
        records=records,
        root=root,
        meta=meta,
        static_dir=Path(static_dir) if static_dir else None,
    )


def build_app(state: ServeState) -> FastAPI:
    app = FastAPI(title="glacierseg evaluation service")
    by_id = {rec.id: rec for rec in state.records}
    curve = accuracy_curve(state.records)

    def _png(rel: str):
        path = state.root / rel
        if not path.exists():
            return JSONResponse({"error": f"artifact {rel} missing"}, status_code=404)
        return FileResponse(path, media_type="image/png")

    @app.get("/api/patches")
    def patches():
        return [
            {"id": r.id, "lon": r.lon, "lat": r.lat, "split": r.split, "accuracy": r.accuracy}
            for r in state.records
        ]

    @app.get("/api/curve")
    def curve_endpoint():
        return [{"rank": rank, "id": pid, "accuracy": acc} for rank, pid, acc in curve]

    @app.get("/api/meta")
    def meta():
        return state.meta

    @app.get("/api/patches/{patch_id}/image.png")
    def image_png(patch_id: str):
        if patch_id not in by_id:
            return JSONResponse({"error": "unknown patch"}, status_code=404)
        return _png(f"patches/{patch_id}/image.png")

    @app.get("/api/patches/{patch_id}/mask.png")
    def mask_png(patch_id: str):
        if patch_id not in by_id:
            return JSONResponse({"error": "unknown patch"}, status_code=404)
        return _png(f"patches/{patch_id}/mask.png")

    @app.get("/api/patches/{patch_id}/pred.png")
    def pred_png(patch_id: str):
        if patch_id not in by_id:
            return JSONResponse({"error": "unknown patch"}, status_code=404)
        return _png(f"patches/{patch_id}/pred.png")

    @app.get("/api/patches/{patch_id}/prob/{class_name}.png")
    def prob_png(patch_id: str, class_name: str):
        if patch_id not in by_id or class_name not in ("clean_ice", "debris", "background"):
            return JSONResponse({"error": "unknown patch or class"}, status_code=404)
        return _png(f"patches/{patch_id}/prob_{class_name}.png")

    @app.get("/api/patches/{patch_id}/activations/{layer}.png")
    def activation_png(patch_id: str, layer: str):
        if patch_id not in by_id:
            return JSONResponse({"error": "unknown patch"}, status_code=404)
        return _png(f"patches/{patch_id}/activations/{layer}.png")

    if state.static_dir is not None:
        app.mount("/", StaticFiles(directory=state.static_dir, html=True), name="panel")
    return app


def serve(state: ServeState, port: int) -> None:
    import uvicorn

    uvicorn.run(build_app(state), host="127.0.0.1", port=port)
