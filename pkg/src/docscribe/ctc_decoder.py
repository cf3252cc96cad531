"""CTC decoding over frame log-posteriors.

Provides greedy collapse decoding, prefix beam search with optional
shallow fusion of a word n-gram LM, the exact CTC forward sum, and
Viterbi forced alignment for segment timing.

The beam search follows the classic prefix formulation: each beam entry
is a collapsed label prefix carrying separate log-probabilities for
paths ending in blank and non-blank, merged with log-sum-exp.  With an
exhaustive beam the final per-prefix totals equal the exact CTC
posterior of each label string, which is what the brute-force oracle in
the test suite checks.

Shallow fusion is applied at word boundaries: whenever a prefix emits
the word separator (and once at utterance end for a trailing partial
word), the completed word w is scored by the LM and
``alpha*ln(10)*log10 P(w | history) + beta`` is added to the prefix
score.  Out-of-vocabulary words go through the LM's ``<unk>`` path
rather than being pruned, so the decoder can still emit unseen words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ngram_lm import NGramModel, LmQueryState
from .nbest import Hypothesis, NBestList
from .orthography import (
    Alphabet,
    Transcript,
    BLANK_ID,
    SEPARATOR_ID,
    transcript_from_ids,
)

NEG_INF = float("-inf")
_LN10 = math.log(10.0)

# row log-sum-exp tolerance: below DRIFT_OK rows pass untouched, up to
# DRIFT_FIX they are renormalized, beyond that the matrix is rejected
DRIFT_OK = 1e-4
DRIFT_FIX = 1e-2


class DecodeError(Exception):
    pass


class VocabMismatch(DecodeError):
    pass


class NonFiniteLogit(DecodeError):
    pass


class DenormalizedLogits(DecodeError):
    pass


class Infeasible(DecodeError):
    """Transcript needs more frames than the matrix provides."""


@dataclass
class LogitMatrix:
    """T x V frame log-posteriors (natural log), stored as float32.

    V covers the full alphabet including blank (id 0) and the word
    separator (id 1).  Rows must log-sum-exp to 0 within ``DRIFT_OK``;
    drifts up to ``DRIFT_FIX`` are renormalized, anything worse raises.
    """

    frames: np.ndarray
    frame_hop_ms: float
    alphabet: Alphabet

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2:
            raise DecodeError(f"logits must be 2-D, got shape {frames.shape}")
        if frames.shape[1] != self.alphabet.size:
            raise VocabMismatch(
                f"logits have V={frames.shape[1]} but alphabet has {self.alphabet.size} labels"
            )
        if not (self.frame_hop_ms > 0 and math.isfinite(self.frame_hop_ms)):
            raise DecodeError(f"frame_hop_ms must be finite and positive")
        if frames.size and not np.isfinite(frames).all():
            raise NonFiniteLogit("logit matrix contains non-finite entries")
        if frames.size:
            lse = _row_logsumexp(frames.astype(np.float64))
            drift = float(np.abs(lse).max())
            if drift > DRIFT_FIX:
                raise DenormalizedLogits(
                    f"row log-sum-exp drifts by {drift:.3g} (limit {DRIFT_FIX})"
                )
            if drift > DRIFT_OK:
                frames = (frames.astype(np.float64) - lse[:, None]).astype(np.float32)
        self.frames = frames

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames * self.frame_hop_ms / 1000.0

    def slice_frames(self, start: int, end: int) -> "LogitMatrix":
        return LogitMatrix(
            frames=self.frames[start:end].copy(),
            frame_hop_ms=self.frame_hop_ms,
            alphabet=self.alphabet,
        )


def _row_logsumexp(frames: np.ndarray) -> np.ndarray:
    m = frames.max(axis=1)
    return m + np.log(np.exp(frames - m[:, None]).sum(axis=1))


@dataclass(frozen=True)
class DecodeConfig:
    """Beam search and fusion hyperparameters.

    The LM weight ``alpha`` and word-insertion bonus ``beta`` default to
    tuning starting points, not reproduction targets.  Fusion is active
    when an LM is supplied and ``alpha > 0``; with ``alpha == 0`` any LM
    is ignored and ``combined`` reduces to the acoustic score.
    """

    beam_width: int = 8
    alpha: float = 0.5
    beta: float = 1.0
    lm: NGramModel | None = field(default=None, repr=False)
    nbest: int = 1

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 1 <= self.nbest <= self.beam_width:
            raise ValueError("need 1 <= nbest <= beam_width")
        if self.alpha > 0 and self.lm is None:
            raise ValueError("alpha > 0 requires an LM")

    @property
    def fusion_active(self) -> bool:
        return self.lm is not None and self.alpha > 0


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def greedy_decode(logits: LogitMatrix) -> Hypothesis:
    """Best-path decoding: per-frame argmax, collapse repeats, drop blanks.

    The acoustic score is the summed log-probability of the argmax path.
    """
    frames = logits.frames
    if frames.shape[0] == 0:
        transcript = transcript_from_ids((), logits.alphabet)
        return Hypothesis(transcript=transcript, acoustic_logp=0.0, combined=0.0)
    path = frames.argmax(axis=1)
    logp = float(frames.max(axis=1).sum())
    ids = []
    prev = -1
    for label in path:
        if label != prev and label != BLANK_ID:
            ids.append(int(label))
        prev = label
    transcript = transcript_from_ids(ids, logits.alphabet)
    return Hypothesis(
        transcript=transcript,
        acoustic_logp=logp,
        word_count=len(transcript.words),
        combined=logp,
    )


class _FusionState:
    """Per-prefix LM bookkeeping: context after the completed words, their
    accumulated log10 score, and how many words were completed."""

    __slots__ = ("lm_state", "lm_log10", "words")

    def __init__(self, lm_state, lm_log10: float, words: int):
        self.lm_state = lm_state
        self.lm_log10 = lm_log10
        self.words = words


def beam_search(
    logits: LogitMatrix, cfg: DecodeConfig, utterance_id: str = ""
) -> NBestList:
    """Prefix beam search with optional shallow LM fusion.

    Returns the top ``cfg.nbest`` label prefixes ranked by combined score,
    ties broken lexicographically by transcript text.  Deterministic for
    identical inputs and config.
    """
    alphabet = logits.alphabet
    V = alphabet.size
    frames = logits.frames.astype(np.float64)
    fusion = cfg.fusion_active
    aw = cfg.alpha * _LN10

    # prefix -> [p_blank, p_nonblank, fusion_state]
    root_fusion = _FusionState(cfg.lm.start_state(), 0.0, 0) if fusion else None
    beams: dict[tuple[int, ...], list] = {(): [0.0, NEG_INF, root_fusion]}

    for t in range(frames.shape[0]):
        row = frames[t]
        nxt: dict[tuple[int, ...], list] = {}

        def slot(prefix, parent_fusion, emitted=None):
            entry = nxt.get(prefix)
            if entry is None:
                fus = parent_fusion
                if fusion and emitted == SEPARATOR_ID:
                    fus = _complete_word(cfg.lm, parent_fusion, prefix[:-1], alphabet)
                entry = [NEG_INF, NEG_INF, fus]
                nxt[prefix] = entry
            return entry

        for prefix, (pb, pnb, fus) in beams.items():
            p_tot = _logaddexp(pb, pnb)
            last = prefix[-1] if prefix else -1

            stay = slot(prefix, fus)
            stay[0] = _logaddexp(stay[0], p_tot + row[BLANK_ID])

            for s in range(1, V):
                ls = row[s]
                if s == last:
                    # repeat without an intervening blank collapses
                    stay[1] = _logaddexp(stay[1], pnb + ls)
                    ext = slot(prefix + (s,), fus, emitted=s)
                    ext[1] = _logaddexp(ext[1], pb + ls)
                else:
                    ext = slot(prefix + (s,), fus, emitted=s)
                    ext[1] = _logaddexp(ext[1], p_tot + ls)

        ranked = sorted(
            nxt.items(),
            key=lambda kv: (-_rank_score(kv[1], cfg), kv[0]),
        )
        beams = dict(ranked[: cfg.beam_width])

    hyps = []
    for prefix, (pb, pnb, fus) in beams.items():
        acoustic = _logaddexp(pb, pnb)
        lm_log10 = None
        words = 0
        combined = acoustic
        if fusion:
            final = _complete_word(cfg.lm, fus, prefix, alphabet)
            lm_log10 = final.lm_log10
            words = final.words
            combined = acoustic + aw * lm_log10 + cfg.beta * words
        transcript = transcript_from_ids(prefix, alphabet)
        if not fusion:
            words = len(transcript.words)
        hyps.append(
            Hypothesis(
                transcript=transcript,
                acoustic_logp=acoustic,
                lm_log10p=lm_log10,
                word_count=words,
                combined=combined,
            )
        )
    hyps.sort(key=lambda h: (-h.combined, h.transcript.text))
    return NBestList(
        utterance_id=utterance_id,
        entries=tuple(hyps[: cfg.nbest]),
        source="ctc_beam",
    )


def _rank_score(entry, cfg: DecodeConfig) -> float:
    score = _logaddexp(entry[0], entry[1])
    fus = entry[2]
    if fus is not None:
        score += cfg.alpha * _LN10 * fus.lm_log10 + cfg.beta * fus.words
    return score


def _complete_word(
    lm: NGramModel, fus: _FusionState, prefix: tuple[int, ...], alphabet: Alphabet
) -> _FusionState:
    """Score the trailing word of ``prefix`` (chars after the last
    separator); no-op when that segment is empty."""
    end = len(prefix)
    start = end
    while start > 0 and prefix[start - 1] != SEPARATOR_ID:
        start -= 1
    if start == end:
        return fus
    word = alphabet.render(prefix[start:end])
    log10p, state = lm.score_word(fus.lm_state, word)
    return _FusionState(state, fus.lm_log10 + log10p, fus.words + 1)


def _expand_labels(labels) -> list[int]:
    expanded = [BLANK_ID]
    for lab in labels:
        expanded.append(lab)
        expanded.append(BLANK_ID)
    return expanded


def _min_frames(labels) -> int:
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def ctc_forward(logits: LogitMatrix, transcript: Transcript) -> float:
    """Exact log-probability that the matrix emits ``transcript``.

    Sums over every frame alignment that collapses to the transcript via
    the standard blank-interleaved forward recursion.  Returns ``-inf``
    when the transcript cannot fit in the available frames (the explicit
    infeasibility marker; no exception is raised).
    """
    return ctc_forward_labels(logits, transcript.graphemes)


def ctc_forward_labels(logits: LogitMatrix, labels) -> float:
    """`ctc_forward` over a raw label-id sequence (separators included)."""
    frames = logits.frames.astype(np.float64)
    T = frames.shape[0]
    labels = list(labels)
    if _min_frames(labels) > T:
        return NEG_INF
    if not labels:
        return float(frames[:, BLANK_ID].sum()) if T else 0.0

    exp = _expand_labels(labels)
    S = len(exp)
    alpha = [NEG_INF] * S
    alpha[0] = frames[0][BLANK_ID]
    alpha[1] = frames[0][exp[1]]
    for t in range(1, T):
        row = frames[t]
        prev = alpha
        alpha = [NEG_INF] * S
        for s in range(S):
            a = prev[s]
            if s >= 1:
                a = _logaddexp(a, prev[s - 1])
            if s >= 2 and exp[s] != BLANK_ID and exp[s] != exp[s - 2]:
                a = _logaddexp(a, prev[s - 2])
            if a != NEG_INF:
                alpha[s] = a + row[exp[s]]
    total = alpha[S - 1]
    if S >= 2:
        total = _logaddexp(total, alpha[S - 2])
    return float(total)


def forced_align(
    logits: LogitMatrix, transcript: Transcript
) -> list[tuple[float, float]]:
    """Viterbi alignment: per-grapheme (start_ms, end_ms) spans.

    A grapheme's span covers the frames its expanded-label state occupies
    on the best path, i.e. ``[first_frame * hop, (last_frame + 1) * hop)``;
    spans are therefore non-overlapping and monotone.
    """
    frames = logits.frames.astype(np.float64)
    T = frames.shape[0]
    labels = list(transcript.graphemes)
    if not labels:
        return []
    if _min_frames(labels) > T:
        raise Infeasible(
            f"transcript needs {_min_frames(labels)} frames but only {T} available"
        )

    exp = _expand_labels(labels)
    S = len(exp)
    alpha = np.full((T, S), NEG_INF)
    back = np.zeros((T, S), dtype=np.int64)
    alpha[0, 0] = frames[0][BLANK_ID]
    alpha[0, 1] = frames[0][exp[1]]
    for t in range(1, T):
        row = frames[t]
        for s in range(S):
            best, arg = alpha[t - 1, s], s
            if s >= 1 and alpha[t - 1, s - 1] > best:
                best, arg = alpha[t - 1, s - 1], s - 1
            if (
                s >= 2
                and exp[s] != BLANK_ID
                and exp[s] != exp[s - 2]
                and alpha[t - 1, s - 2] > best
            ):
                best, arg = alpha[t - 1, s - 2], s - 2
            if best != NEG_INF:
                alpha[t, s] = best + row[exp[s]]
            back[t, s] = arg

    s = S - 1 if alpha[T - 1, S - 1] >= alpha[T - 1, S - 2] else S - 2
    states = [0] * T
    states[T - 1] = s
    for t in range(T - 1, 0, -1):
        s = back[t, s]
        states[t - 1] = s

    hop = logits.frame_hop_ms
    spans = []
    for i in range(len(labels)):
        state = 2 * i + 1
        occupied = [t for t, st in enumerate(states) if st == state]
        first, last = occupied[0], occupied[-1]
        spans.append((first * hop, (last + 1) * hop))
    return spans
