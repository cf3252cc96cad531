"""HTTP API for the transcription/review workflow.

Transcribes uploaded audio (via an external inference endpoint) or raw
CTCL logit files, optionally restricted to a time segment, and keeps an
append-only store of flagged audio-transcription pairs for later review
by language experts.  The flag store is a line-JSON file with fsync on
every append: auditable, trivially exportable, no database.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import acoustic_io
from .acoustic_io import logits_from_bytes, fetch_logits, LogitFormatError
from .ctc_decoder import (
    DecodeConfig,
    DecodeError,
    LogitMatrix,
    beam_search,
    forced_align,
)
from .nbest import nbest_to_dict
from .ngram_lm import NGramModel, read_arpa
from .orthography import Alphabet, load_alphabet


@dataclass
class ServiceConfig:
    alphabet_path: str
    lm_path: str | None = None
    alpha: float = 0.5
    beta: float = 1.0
    beam_width: int = 8
    nbest: int = 4
    inference_endpoint: str | None = None
    data_dir: str = "docscribe-data"
    bearer_token: str | None = None

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fp:
            doc = json.load(fp)
        return cls(**doc)


class FlagStore:
    """Append-only durable store of flag records.

    Appends are serialized by a lock and fsynced before returning, so a
    confirmed flag survives a crash and concurrent posts cannot lose
    writes.  Records are returned in creation order.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fp:
                fp.write(line + "\n")
                fp.flush()
                os.fsync(fp.fileno())

    def all(self) -> list[dict]:
        if not self.path.exists():
            return []
        with self._lock:
            with open(self.path, encoding="utf-8") as fp:
                return [json.loads(line) for line in fp if line.strip()]

    def get(self, flag_id: str) -> dict | None:
        for rec in self.all():
            if rec["flag_id"] == flag_id:
                return rec
        return None


class FlagSegment(BaseModel):
    start_s: float
    end_s: float


class FlagRequest(BaseModel):
    audio_ref: str
    transcription: str
    segment: FlagSegment | None = None
    note: str | None = None


def create_app(cfg: ServiceConfig) -> FastAPI:
    alphabet = load_alphabet(cfg.alphabet_path)
    lm: NGramModel | None = read_arpa(cfg.lm_path) if cfg.lm_path else None
    data_dir = Path(cfg.data_dir)
    audio_dir = data_dir / "audio"
    flags = FlagStore(data_dir / "flags.jsonl")

    app = FastAPI(title="docscribe", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def check_token(request: Request) -> None:
        if cfg.bearer_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {cfg.bearer_token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    @app.get("/v1/health")
    async def health():
        return {
            "status": "ok",
            "model_endpoint_configured": cfg.inference_endpoint is not None,
            "lm_loaded": lm is not None,
        }

    @app.post("/v1/transcribe")
    async def transcribe(
        request: Request,
        audio: UploadFile | None = File(None),
        logits: UploadFile | None = File(None),
        start_s: float | None = Form(None),
        end_s: float | None = Form(None),
        use_lm: bool = Form(False),
        alpha: float | None = Form(None),
        beta: float | None = Form(None),
    ):
        check_token(request)
        if (audio is None) == (logits is None):
            raise HTTPException(400, "provide exactly one of 'audio' or 'logits'")

        if logits is not None:
            blob = await logits.read()
            try:
                matrix = logits_from_bytes(blob, alphabet)
            except (LogitFormatError, DecodeError) as e:
                raise HTTPException(400, f"bad logits upload: {e}")
        else:
            if cfg.inference_endpoint is None:
                raise HTTPException(409, "no inference endpoint configured for audio input")
            blob = await audio.read()
            _store_audio(audio_dir, blob)
            try:
                matrix = fetch_logits(cfg.inference_endpoint, blob, alphabet)
            except acoustic_io.Unreachable as e:
                raise HTTPException(502, str(e))
            except (acoustic_io.BadResponse, DecodeError) as e:
                raise HTTPException(502, f"inference endpoint failure: {e}")

        frame0 = 0
        if (start_s is None) != (end_s is None):
            raise HTTPException(400, "segment needs both start_s and end_s")
        if start_s is not None:
            if start_s < 0 or start_s >= end_s:
                raise HTTPException(422, "need 0 <= start_s < end_s")
            hop = matrix.frame_hop_ms
            frame0 = math.floor(start_s * 1000.0 / hop)
            frame1 = math.ceil(end_s * 1000.0 / hop)
            if frame0 >= matrix.n_frames or frame1 > matrix.n_frames:
                raise HTTPException(422, "segment outside audio duration")
            matrix = matrix.slice_frames(frame0, frame1)

        use_fusion = use_lm and lm is not None
        if use_lm and lm is None:
            raise HTTPException(409, "no language model configured")
        cfg_alpha = alpha if alpha is not None else cfg.alpha
        cfg_beta = beta if beta is not None else cfg.beta
        decode_cfg = DecodeConfig(
            beam_width=cfg.beam_width,
            alpha=cfg_alpha if use_fusion else 0.0,
            beta=cfg_beta if use_fusion else 0.0,
            lm=lm if use_fusion else None,
            nbest=min(cfg.nbest, cfg.beam_width),
        )
        nb = beam_search(matrix, decode_cfg)
        top = nb.top
        offset_ms = frame0 * matrix.frame_hop_ms
        spans = [
            {
                "grapheme": alphabet.label(g),
                "start_ms": start + offset_ms,
                "end_ms": end + offset_ms,
            }
            for g, (start, end) in zip(
                top.transcript.graphemes, forced_align(matrix, top.transcript)
            )
        ]
        return {"text": top.transcript.text, "nbest": nbest_to_dict(nb), "spans": spans}

    @app.post("/v1/flags")
    async def create_flag(request: Request, body: FlagRequest):
        check_token(request)
        if body.segment is not None:
            if body.segment.start_s < 0 or body.segment.start_s >= body.segment.end_s:
                raise HTTPException(400, "need 0 <= start_s < end_s")
        record = {
            "flag_id": uuid.uuid4().hex,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "audio_ref": body.audio_ref,
            "transcription": body.transcription,
            "segment": body.segment.model_dump() if body.segment else None,
            "note": body.note,
        }
        flags.append(record)
        return record

    @app.get("/v1/flags")
    async def list_flags():
        return flags.all()

    @app.get("/v1/flags/{flag_id}")
    async def get_flag(flag_id: str):
        rec = flags.get(flag_id)
        if rec is None:
            raise HTTPException(404, f"no flag {flag_id!r}")
        return rec

    return app


def _store_audio(audio_dir: Path, blob: bytes) -> Path:
    """Content-hash filename: identical uploads dedupe to one file."""
    audio_dir.mkdir(parents=True, exist_ok=True)
    name = hashlib.sha256(blob).hexdigest()
    path = audio_dir / name
    if not path.exists():
        path.write_bytes(blob)
    return path
