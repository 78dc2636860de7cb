"""HTTP surface: screenshot submission, verdict retrieval, the review queue,
Fig-style overlay rendering, and admin recalibration/activation."""

from __future__ import annotations

import json
import logging
import re
import threading
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..dataset import DatasetError, TrainingRow, decode_frame, read_training_table
from ..evidence import ALL_KINDS, CalibrationConfig, parse_sidecar_entry
from ..fusion import DECISION_MISBEHAVING
from ..imaging import FrameSequence, consecutive_target_maps, select_best_target_map
from ..pipeline import ModelBundle, classify_user
from ..render import overlay_png_bytes
from ..skin import FaceBox, SkinMask, detect_skin, non_face_skin
from .recalibration import MIN_FEEDBACK_ROWS, recalibrate
from .store import (AlreadyDecidedError, InsufficientFeedbackError,
                    ModerationStore, UnknownItemError)

log = logging.getLogger(__name__)

MAX_IMAGE_BYTES = 2 * 1024 * 1024
FRAMES_PER_USER = 3


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def parse_multipart(content_type: str, body: bytes) -> list[tuple[str, bytes]]:
    """Minimal multipart/form-data parser returning (field_name, payload).

    Splits on the declared boundary; part headers are latin-1 text, payloads
    stay raw bytes.
    """
    match = re.search(r'boundary="?([^";]+)"?', content_type or "")
    if not match:
        raise ApiError(400, "bad_request", "missing multipart boundary")
    delimiter = b"--" + match.group(1).encode("latin-1")
    segments = (b"\r\n" + body).split(b"\r\n" + delimiter)
    parts = []
    for segment in segments[1:]:
        if segment.startswith(b"--"):
            break  # closing delimiter
        segment = segment.removeprefix(b"\r\n")
        header_blob, sep, payload = segment.partition(b"\r\n\r\n")
        if not sep:
            raise ApiError(400, "bad_request", "malformed multipart part")
        payload = payload.removesuffix(b"\r\n")
        name = ""
        for line in header_blob.decode("latin-1").split("\r\n"):
            if line.lower().startswith("content-disposition"):
                found = re.search(r'name="([^"]*)"', line)
                if found:
                    name = found.group(1)
        parts.append((name, payload))
    return parts


class UploadProvider:
    """Detections supplied with the upload itself, one sidecar-format document
    per frame; an omitted document reads as every detector absent."""

    kinds = ALL_KINDS

    def __init__(self, frames, docs):
        self._docs = {id(frame): doc for frame, doc in zip(frames, docs)}

    def detect(self, frame):
        doc = self._docs.get(id(frame), {})
        return [parse_sidecar_entry(kind, doc.get(kind.value), Path("upload"))
                for kind in self.kinds]


class Engine:
    """Shared service state; the active bundle swaps atomically."""

    def __init__(self, store: ModerationStore, bundle: Optional[ModelBundle],
                 training_rows: Optional[list[TrainingRow]] = None,
                 calibration: Optional[CalibrationConfig] = None):
        self.store = store
        self._bundle = bundle
        self._bundle_lock = threading.Lock()
        self.training_rows = training_rows or []
        self.calibration = calibration or CalibrationConfig()

    @property
    def bundle(self) -> Optional[ModelBundle]:
        with self._bundle_lock:
            return self._bundle

    def swap_bundle(self, bundle: ModelBundle) -> None:
        with self._bundle_lock:
            self._bundle = bundle

    def require_bundle(self) -> ModelBundle:
        bundle = self.bundle
        if bundle is None:
            raise ApiError(503, "model_not_loaded", "no model bundle is active")
        return bundle


def create_app(store: ModerationStore, bundle: Optional[ModelBundle] = None,
               console_dir: Optional[Path] = None,
               moderator_token: Optional[str] = None,
               training_table: Optional[Path] = None,
               calibration: Optional[CalibrationConfig] = None) -> FastAPI:
    if bundle is None:
        bundle = store.active_bundle()
    training_rows = read_training_table(training_table) if training_table else []
    engine = Engine(store, bundle, training_rows, calibration)

    app = FastAPI(title="vchatmod gateway", openapi_url=None)
    app.state.engine = engine

    def error_response(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"error": code, "message": message})

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return error_response(exc.status, exc.code, exc.message)

    # keep the one error shape even for framework-raised errors
    from fastapi.exceptions import RequestValidationError
    from starlette.exceptions import HTTPException as StarletteHTTPException

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_error(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "http_error"
        return error_response(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return error_response(400, "bad_request", str(exc.errors()))

    def check_token(request: Request) -> None:
        if moderator_token is None:
            return
        if request.headers.get("x-moderator-token") != moderator_token:
            raise ApiError(401, "unauthorized", "missing or invalid moderator token")

    @app.post("/v1/users/{user_id}/screenshots")
    async def submit_screenshots(user_id: str, request: Request):
        bundle = engine.require_bundle()
        body = await request.body()
        parts = parse_multipart(request.headers.get("content-type", ""), body)
        image_blobs = [payload for name, payload in parts if name != "detections"]
        detection_parts = [payload for name, payload in parts if name == "detections"]

        if len(image_blobs) != FRAMES_PER_USER:
            raise ApiError(400, "bad_frame_count",
                           f"expected {FRAMES_PER_USER} images, got {len(image_blobs)}")
        for blob in image_blobs:
            if len(blob) > MAX_IMAGE_BYTES:
                raise ApiError(413, "image_too_large",
                               f"images must be at most {MAX_IMAGE_BYTES} bytes")
        try:
            frames = tuple(decode_frame(blob) for blob in image_blobs)
            seq = FrameSequence(user_id=user_id, frames=frames)
        except (DatasetError, ValueError, OSError) as exc:
            raise ApiError(400, "undecodable_frames", str(exc))

        docs: list[dict[str, Any]] = [{} for _ in frames]
        if detection_parts:
            try:
                parsed = json.loads(detection_parts[0].decode("utf-8"))
                if not isinstance(parsed, list) or len(parsed) != FRAMES_PER_USER:
                    raise ValueError("detections must be a list of one document per frame")
                docs = parsed
            except (ValueError, UnicodeDecodeError) as exc:
                raise ApiError(400, "bad_detections", str(exc))

        provider = UploadProvider(frames, docs)
        verdict = classify_user(seq, bundle, provider)
        verdict_id = store.add_verdict(verdict, image_blobs)
        doc = verdict.to_json()
        doc["verdict_id"] = verdict_id
        doc["enqueued_for_review"] = verdict.decision == DECISION_MISBEHAVING
        return JSONResponse(doc)

    @app.get("/v1/users/{user_id}/verdict")
    async def get_verdict(user_id: str):
        verdict = store.latest_verdict(user_id)
        if verdict is None:
            raise ApiError(404, "not_found", f"no verdict for user {user_id!r}")
        return JSONResponse(verdict.to_json())

    @app.get("/v1/review/queue")
    async def review_queue(status: Optional[str] = None):
        items = store.queue(status)
        return JSONResponse({"items": [item.summary() for item in items]})

    @app.get("/v1/review/{item_id}")
    async def review_item(item_id: str):
        try:
            item = store.get_item(item_id)
        except UnknownItemError:
            raise ApiError(404, "not_found", f"no review item {item_id!r}")
        return JSONResponse(item.detail())

    @app.post("/v1/review/{item_id}/decision")
    async def review_decision(item_id: str, request: Request):
        check_token(request)
        try:
            payload = json.loads(await request.body())
        except json.JSONDecodeError:
            raise ApiError(400, "bad_request", "decision body must be JSON")
        decision = payload.get("decision")
        moderator_id = payload.get("moderator_id", "")
        if decision not in ("confirm", "override") or not moderator_id:
            raise ApiError(400, "bad_request",
                           'body must carry {"decision": "confirm"|"override", "moderator_id": ...}')
        try:
            item = store.decide(item_id, decision, moderator_id)
        except UnknownItemError:
            raise ApiError(404, "not_found", f"no review item {item_id!r}")
        except AlreadyDecidedError:
            raise ApiError(409, "already_decided", f"item {item_id!r} was already decided")
        return JSONResponse(item.detail())

    @app.get("/v1/review/{item_id}/frames/{index}")
    async def review_frame(item_id: str, index: int):
        try:
            paths = store.frame_paths(item_id)
            store.get_item(item_id)
        except UnknownItemError:
            raise ApiError(404, "not_found", f"no review item {item_id!r}")
        if not 0 <= index < len(paths):
            raise ApiError(404, "not_found", f"item has no frame {index}")
        return Response(content=paths[index].read_bytes(), media_type="image/png")

    @app.get("/v1/admin/feedback")
    async def feedback_log(request: Request):
        check_token(request)
        rows = [{
            "item_id": row.item_id,
            "user_id": row.user_id,
            "label": row.label,
            "sp": None if row.sp is None else list(row.sp),
            "moderator_id": row.moderator_id,
            "decided_at": row.decided_at,
        } for row in store.feedback_rows()]
        return JSONResponse({"rows": rows})

    @app.get("/v1/review/{item_id}/overlays")
    async def overlays_index(item_id: str):
        try:
            item = store.get_item(item_id)
        except UnknownItemError:
            raise ApiError(404, "not_found", f"no review item {item_id!r}")
        urls = [f"/v1/review/{item_id}/overlays/{k}" for k in range(len(item.frames))]
        return JSONResponse({"frames": urls})

    @app.get("/v1/review/{item_id}/overlays/{index}")
    async def overlay_image(item_id: str, index: int):
        bundle = engine.require_bundle()
        try:
            item = store.get_item(item_id)
        except UnknownItemError:
            raise ApiError(404, "not_found", f"no review item {item_id!r}")
        if not 0 <= index < len(item.frames):
            raise ApiError(404, "not_found", f"item has no frame {index}")
        png = render_item_overlay(store, item, bundle, index)
        return Response(content=png, media_type="image/png")

    @app.post("/v1/admin/recalibrate")
    async def admin_recalibrate(request: Request):
        check_token(request)
        base = engine.require_bundle()
        try:
            new_bundle = recalibrate(store.feedback_rows(), base,
                                     engine.training_rows, engine.calibration,
                                     min_rows=min_feedback_rows(request))
        except InsufficientFeedbackError as exc:
            raise ApiError(409, "insufficient_feedback", str(exc))
        version = store.save_bundle_version(new_bundle)
        return JSONResponse({"bundle_version": version, "activated": False})

    def min_feedback_rows(request: Request) -> int:
        raw = request.query_params.get("min_rows")
        return int(raw) if raw else MIN_FEEDBACK_ROWS

    @app.post("/v1/admin/activate/{bundle_version}")
    async def admin_activate(bundle_version: int, request: Request):
        check_token(request)
        try:
            new_bundle = store.load_bundle_version(bundle_version)
        except UnknownItemError:
            raise ApiError(404, "not_found", f"no bundle version {bundle_version}")
        store.activate_version(bundle_version)
        engine.swap_bundle(new_bundle)
        return JSONResponse({"bundle_version": bundle_version, "activated": True})

    if console_dir is not None:
        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app


def render_item_overlay(store: ModerationStore, item, bundle: ModelBundle,
                        index: int) -> bytes:
    """Recompute the review overlay for one stored frame: best target region,
    non-face skin under the union of the palettes, and the face box."""
    from ..dataset import load_frame

    frames = tuple(load_frame(p) for p in store.frame_paths(item.item_id))
    seq = FrameSequence(user_id=item.user_id, frames=frames)
    maps = consecutive_target_maps(seq, bundle.motion)
    best = select_best_target_map(maps, bundle.motion)

    frame = frames[index]
    face = None
    if index < len(item.verdict.evidence_log):
        entry = item.verdict.evidence_log[index].get("face", {})
        if entry.get("present") and entry.get("box"):
            face = FaceBox(*entry["box"])

    union = None
    for palette in bundle.palettes:
        bits = detect_skin(frame, palette).bits
        union = bits if union is None else (union | bits)
    skin = non_face_skin(SkinMask(bits=union), face) if union is not None else None

    return overlay_png_bytes(frame, best, skin, face)
