"""HTTP backend for the subjective experiment.

Raters pull assignments in a private seeded order, submit ratings that
are durably appended to a JSON-lines log (fsync before acknowledgment),
and analysts export aggregates computed by the subjective pipeline over
a point-in-time snapshot of that log.  Restarting the process rebuilds
all session state from the log.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse
from pydantic import BaseModel

from .core import DatasetManifest, ValidationError, load_manifest
from .subjective import (
    DEFAULT_SLIDER_RANGE,
    RatingRecord,
    aggregate_ratings,
    rating_from_json,
    rating_to_json,
    write_aggregates_csv,
)

VIDEO_CONTAINERS = ("clip.mp4", "clip.avi")
_CONTAINER_TYPES = {".mp4": "video/mp4", ".avi": "video/x-msvideo"}


class RatingStore:
    """Append-only JSON-lines rating log with an in-memory index.

    Every append is flushed and fsynced before returning, so a rating
    acknowledged to a client survives an immediate process kill.  The
    index (per-rater rated sets) is rebuilt from the log on startup.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: list[RatingRecord] = []
        self._rated: dict[str, set[str]] = {}
        if self.path.exists():
            with open(self.path) as f:
                for line in f:
                    if line.strip():
                        self._index(rating_from_json(json.loads(line)))

    def _index(self, record: RatingRecord) -> None:
        self._records.append(record)
        self._rated.setdefault(record.rater_id, set()).add(record.sample_id)

    def append(self, record: RatingRecord) -> None:
        with self._lock:
            with open(self.path, "a") as f:
                f.write(json.dumps(rating_to_json(record)) + "\n")
                f.flush()
                os.fsync(f.fileno())
            self._index(record)

    def snapshot(self) -> list[RatingRecord]:
        with self._lock:
            return list(self._records)

    def rated_by(self, rater_id: str) -> set[str]:
        with self._lock:
            return set(self._rated.get(rater_id, ()))


class RatingSubmission(BaseModel):
    rater_id: str
    sample_id: str
    quality_raw: float
    consistency_raw: float
    emotion_vote: bool


def _session_order(seed: int, rater_id: str, sample_ids: list[str]) -> list[str]:
    """Per-rater presentation order: a seeded permutation of all samples.

    Depends only on (seed, rater, set of ids), not on manifest ordering.
    """
    digest = hashlib.blake2s(f"session\x1f{rater_id}".encode()).digest()
    rng = np.random.default_rng([seed, *np.frombuffer(digest, dtype=np.uint32).tolist()])
    ordered = sorted(sample_ids)
    return [ordered[i] for i in rng.permutation(len(ordered))]


def create_app(
    manifest: DatasetManifest | str | Path,
    root: str | Path,
    log_path: str | Path,
    raters: list[str],
    seed: int = 0,
    slider_range: tuple[float, float] = DEFAULT_SLIDER_RANGE,
) -> FastAPI:
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    root = Path(root)
    by_id = manifest.by_id()
    sample_ids = [s.sample_id for s in manifest.samples]
    store = RatingStore(log_path)
    known_raters = set(raters)
    orders = {r: _session_order(seed, r, sample_ids) for r in raters}

    app = FastAPI(title="gesture rating service")
    app.state.store = store
    # the rating page is typically served from a different origin than
    # this API (static file server vs. service port)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def require_rater(rater_id: str) -> None:
        if rater_id not in known_raters:
            raise HTTPException(status_code=404, detail=f"unknown rater {rater_id!r}")

    @app.get("/api/session/{rater_id}/next")
    def next_sample(rater_id: str):
        require_rater(rater_id)
        rated = store.rated_by(rater_id)
        total = len(sample_ids)
        for sid in orders[rater_id]:
            if sid not in rated:
                return {
                    "done": False,
                    "rater_id": rater_id,
                    "sample_id": sid,
                    "media": {
                        "video": f"/api/media/{sid}/video",
                        "audio": f"/api/media/{sid}/audio",
                    },
                    "position": len(rated) + 1,
                    "total": total,
                }
        return {"done": True, "rater_id": rater_id, "position": total, "total": total}

    @app.post("/api/ratings")
    def submit_rating(submission: RatingSubmission):
        require_rater(submission.rater_id)
        if submission.sample_id not in by_id:
            raise HTTPException(
                status_code=404, detail=f"unknown sample {submission.sample_id!r}"
            )
        record = RatingRecord(
            rater_id=submission.rater_id,
            sample_id=submission.sample_id,
            quality_raw=submission.quality_raw,
            consistency_raw=submission.consistency_raw,
            emotion_vote=submission.emotion_vote,
            timestamp=time.time(),
        )
        try:
            record.validate(slider_range)
        except ValidationError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        store.append(record)  # durable before the acknowledgment below
        return {"ok": True, "timestamp": record.timestamp}

    @app.get("/api/aggregates.csv")
    def export_aggregates():
        records = store.snapshot()
        if not records:
            raise HTTPException(status_code=409, detail="empty ratings log")
        result = aggregate_ratings(records)
        buffer = io.StringIO()
        write_aggregates_csv(result.aggregates, buffer)
        return PlainTextResponse(buffer.getvalue(), media_type="text/csv")

    @app.get("/api/media/{sample_id}/{kind}")
    def serve_media(sample_id: str, kind: str):
        sample = by_id.get(sample_id)
        if sample is None:
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id!r}")
        if kind == "audio":
            path = root / sample.audio.path
            if not path.exists():
                raise HTTPException(status_code=404, detail="audio file missing")
            return FileResponse(path, media_type="audio/wav")
        if kind == "video":
            video_ref = root / sample.video_path
            if video_ref.is_file():
                media_type = _CONTAINER_TYPES.get(video_ref.suffix, "application/octet-stream")
                return FileResponse(video_ref, media_type=media_type)
            for name in VIDEO_CONTAINERS:
                container = video_ref.parent / name
                if container.exists():
                    return FileResponse(container, media_type=_CONTAINER_TYPES[container.suffix])
            raise HTTPException(status_code=404, detail="no containerized video for sample")
        raise HTTPException(status_code=404, detail=f"unknown media kind {kind!r}")

    @app.get("/api/progress/{rater_id}")
    def progress(rater_id: str):
        require_rater(rater_id)
        return {
            "rater_id": rater_id,
            "rated": len(store.rated_by(rater_id)),
            "total": len(sample_ids),
        }

    return app
