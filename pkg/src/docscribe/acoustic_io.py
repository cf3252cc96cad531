"""Logit-matrix file format (CTCL), a deterministic toy acoustic model,
and the client for an external neural inference endpoint.

CTCL layout, all integers little-endian:

    bytes 0-3    magic "CTCL"
    bytes 4-7    format version, uint32 (currently 1)
    bytes 8-11   T, frame count, uint32
    bytes 12-15  V, label count, uint32
    bytes 16-19  frame hop in ms, float32
    bytes 20-23  byte length of the vocab block, uint32
    then         vocab block: newline-joined UTF-8 label list (V entries,
                 "<blank>" and "<space>" first)
    then         payload: T*V float32 log-probabilities, frame-major
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .ctc_decoder import LogitMatrix, VocabMismatch
from .orthography import Alphabet, Transcript, BLANK_ID, OrthographyError

MAGIC = b"CTCL"
VERSION = 1
_HEADER = struct.Struct("<4sIIIfI")


class LogitFormatError(Exception):
    pass


class BadMagic(LogitFormatError):
    pass


class VersionUnsupported(LogitFormatError):
    pass


class TruncatedPayload(LogitFormatError):
    """Payload length does not match T*V*4 bytes."""


class BadHeader(LogitFormatError):
    pass


class FetchError(Exception):
    pass


class Unreachable(FetchError):
    pass


class BadResponse(FetchError):
    pass


def logits_to_bytes(matrix: LogitMatrix) -> bytes:
    vocab = "\n".join(matrix.alphabet.labels()).encode("utf-8")
    frames = np.ascontiguousarray(matrix.frames, dtype="<f4")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        frames.shape[0],
        frames.shape[1],
        matrix.frame_hop_ms,
        len(vocab),
    )
    return header + vocab + frames.tobytes()


def logits_from_bytes(data: bytes, alphabet: Alphabet | None = None) -> LogitMatrix:
    """Parse a CTCL blob; validates against ``alphabet`` when given."""
    if len(data) < _HEADER.size:
        raise TruncatedPayload(f"file shorter than the {_HEADER.size}-byte header")
    magic, version, n_frames, n_labels, hop, vocab_bytes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"magic is {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionUnsupported(f"version {version} not supported (expected {VERSION})")
    if not (hop > 0 and math.isfinite(hop)):
        raise BadHeader(f"frame hop {hop!r} is not a positive finite number")
    vocab_start = _HEADER.size
    payload_start = vocab_start + vocab_bytes
    if len(data) < payload_start:
        raise TruncatedPayload("vocab block extends past end of file")
    try:
        labels = data[vocab_start:payload_start].decode("utf-8").split("\n")
    except UnicodeDecodeError as e:
        raise VocabMismatch(f"vocab block is not valid UTF-8: {e}") from e
    if len(labels) != n_labels:
        raise VocabMismatch(f"header declares V={n_labels} but vocab lists {len(labels)}")
    try:
        file_alphabet = Alphabet.from_labels(labels)
    except OrthographyError as e:
        raise VocabMismatch(str(e)) from e
    if alphabet is not None and file_alphabet.labels() != alphabet.labels():
        raise VocabMismatch("file vocab differs from the configured alphabet")
    expected = n_frames * n_labels * 4
    if len(data) - payload_start != expected:
        raise TruncatedPayload(
            f"payload is {len(data) - payload_start} bytes, expected {expected}"
        )
    frames = np.frombuffer(
        data, dtype="<f4", count=n_frames * n_labels, offset=payload_start
    ).reshape(n_frames, n_labels)
    return LogitMatrix(
        frames=frames.copy(), frame_hop_ms=float(hop), alphabet=file_alphabet
    )


def write_logits(matrix: LogitMatrix, path) -> None:
    with open(path, "wb") as fp:
        fp.write(logits_to_bytes(matrix))


def read_logits(path, alphabet: Alphabet | None = None) -> LogitMatrix:
    with open(path, "rb") as fp:
        return logits_from_bytes(fp.read(), alphabet)


@dataclass(frozen=True)
class ToySample:
    """Output of the toy acoustic model: logits plus the ground truth used
    to generate them, for alignment and end-to-end tests."""

    logits: LogitMatrix
    frame_labels: tuple[int, ...]
    grapheme_spans: tuple[tuple[int, int], ...]  # (start_frame, end_frame) per grapheme


def toy_acoustic_model(
    transcript: Transcript,
    alphabet: Alphabet,
    frames_per_grapheme: int = 2,
    noise_sigma: float = 0.0,
    seed: int = 0,
    peak_mass: float = 0.999,
    frame_hop_ms: float = 20.0,
) -> ToySample:
    """Deterministic synthetic logits for a known transcript.

    Plans one frame run per grapheme (``frames_per_grapheme`` frames each,
    a single blank frame between repeated graphemes), gives the planned
    label ``peak_mass`` of each frame's probability, spreads the rest
    uniformly, adds seeded Gaussian noise to the log-probabilities, and
    renormalizes.  With ``noise_sigma == 0`` greedy decoding recovers the
    transcript exactly.
    """
    if frames_per_grapheme < 1:
        raise ValueError("frames_per_grapheme must be >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    if not 0 < peak_mass < 1:
        raise ValueError("peak_mass must be in (0, 1)")

    plan: list[int] = []
    spans: list[tuple[int, int]] = []
    prev = -1
    for g in transcript.graphemes:
        if g == prev:
            plan.append(BLANK_ID)
        start = len(plan)
        plan.extend([g] * frames_per_grapheme)
        spans.append((start, len(plan)))
        prev = g
    if not plan:
        plan = [BLANK_ID] * frames_per_grapheme

    V = alphabet.size
    T = len(plan)
    rest = math.log((1.0 - peak_mass) / (V - 1))
    frames = np.full((T, V), rest, dtype=np.float64)
    frames[np.arange(T), plan] = math.log(peak_mass)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        frames += rng.normal(0.0, noise_sigma, size=frames.shape)
    frames -= _logsumexp_rows(frames)[:, None]
    matrix = LogitMatrix(
        frames=frames.astype(np.float32),
        frame_hop_ms=frame_hop_ms,
        alphabet=alphabet,
    )
    return ToySample(
        logits=matrix, frame_labels=tuple(plan), grapheme_spans=tuple(spans)
    )


def _logsumexp_rows(frames: np.ndarray) -> np.ndarray:
    m = frames.max(axis=1)
    return m + np.log(np.exp(frames - m[:, None]).sum(axis=1))


def fetch_logits(endpoint: str, audio, alphabet: Alphabet | None = None, timeout: float = 60.0) -> LogitMatrix:
    """POST audio bytes to an inference endpoint and parse the CTCL reply.

    ``audio`` is a path or raw bytes.  The endpoint contract is
    ``POST octet-stream audio -> 200 with CTCL body``.
    """
    import httpx

    if isinstance(audio, (bytes, bytearray)):
        payload = bytes(audio)
    else:
        with open(audio, "rb") as fp:
            payload = fp.read()
    try:
        resp = httpx.post(
            endpoint,
            content=payload,
            headers={"content-type": "application/octet-stream"},
            timeout=timeout,
        )
    except httpx.TransportError as e:
        raise Unreachable(f"inference endpoint {endpoint}: {e}") from e
    if resp.status_code != 200:
        raise BadResponse(f"inference endpoint returned HTTP {resp.status_code}")
    try:
        return logits_from_bytes(resp.content, alphabet)
    except LogitFormatError as e:
        raise BadResponse(f"inference endpoint returned malformed CTCL: {e}") from e
