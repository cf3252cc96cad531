"""Corpus manifests: loading, splitting, vocabulary and OOV accounting.

A manifest is a line-JSON file, one utterance per line, with keys
``id, audio, text, duration_s, provenance, difficulty?, speaker?``.
Unknown keys survive a round trip untouched.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from collections import Counter

from .orthography import Alphabet, Transcript, normalize

REAL = "real"
SYNTHETIC = "synthetic"

_KNOWN_KEYS = ("id", "audio", "text", "duration_s", "provenance", "difficulty", "speaker")


class ManifestError(Exception):
    pass


class ParseError(ManifestError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DuplicateId(ManifestError):
    def __init__(self, utt_id: str):
        self.utt_id = utt_id
        super().__init__(f"duplicate utterance id {utt_id!r}")


class MissingScore(ManifestError):
    def __init__(self, utt_id: str):
        self.utt_id = utt_id
        super().__init__(f"no difficulty score for utterance {utt_id!r}")


class EmptyTestVocabulary(ManifestError):
    pass


@dataclass(frozen=True)
class Utterance:
    """One corpus record.  ``text`` is the transcript as stored on disk;
    ``transcript`` is its normalized form when an alphabet was supplied."""

    id: str
    text: str
    duration_s: float
    audio_path: str | None = None
    provenance: str = REAL
    difficulty: float | None = None
    speaker: str | None = None
    transcript: Transcript | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.duration_s > 0 and self.duration_s != float("inf")):
            raise ManifestError(f"utterance {self.id!r}: duration must be finite and positive")

    @property
    def words(self) -> tuple[str, ...]:
        if self.transcript is not None:
            return self.transcript.words
        return tuple(self.text.split())


@dataclass(frozen=True)
class Manifest:
    name: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        seen = set()
        for u in self.utterances:
            if u.id in seen:
                raise DuplicateId(u.id)
            seen.add(u.id)

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    @property
    def total_duration_s(self) -> float:
        return sum(u.duration_s for u in self.utterances)

    def ids(self) -> set[str]:
        return {u.id for u in self.utterances}


def load_manifest(path, alphabet: Alphabet | None = None, name: str | None = None) -> Manifest:
    """Parse a line-JSON manifest.  With an alphabet, transcripts are
    normalized on load; ``text`` then holds the normalized form."""
    utts = []
    seen = set()
    with open(path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(lineno, f"bad JSON: {e.msg}") from e
            if not isinstance(rec, dict):
                raise ParseError(lineno, "record is not a JSON object")
            for key in ("id", "text", "duration_s"):
                if key not in rec:
                    raise ParseError(lineno, f"missing key {key!r}")
            if rec["id"] in seen:
                raise DuplicateId(rec["id"])
            seen.add(rec["id"])
            extra = {k: v for k, v in rec.items() if k not in _KNOWN_KEYS}
            transcript = None
            text = rec["text"]
            if alphabet is not None:
                transcript = normalize(text, alphabet)
                text = transcript.text
            try:
                utt = Utterance(
                    id=rec["id"],
                    text=text,
                    duration_s=float(rec["duration_s"]),
                    audio_path=rec.get("audio"),
                    provenance=rec.get("provenance", REAL),
                    difficulty=rec.get("difficulty"),
                    speaker=rec.get("speaker"),
                    transcript=transcript,
                    extra=extra,
                )
            except ManifestError as e:
                raise ParseError(lineno, str(e)) from e
            utts.append(utt)
    return Manifest(name=name or str(path), utterances=tuple(utts))


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for u in manifest.utterances:
            rec = {"id": u.id, "audio": u.audio_path, "text": u.text,
                   "duration_s": u.duration_s, "provenance": u.provenance}
            if u.difficulty is not None:
                rec["difficulty"] = u.difficulty
            if u.speaker is not None:
                rec["speaker"] = u.speaker
            rec.update(u.extra)
            fp.write(json.dumps(rec, ensure_ascii=False) + "\n")


def vocabulary(manifest: Manifest) -> Counter:
    """Word-token counts over all transcripts."""
    counts: Counter = Counter()
    for u in manifest:
        counts.update(u.words)
    return counts


def oov_rate(train: Manifest, test: Manifest, mode: str = "type") -> float:
    """Fraction of test vocabulary absent from the training vocabulary.

    ``type`` mode counts distinct words, ``token`` mode counts running
    tokens.  Raises EmptyTestVocabulary when the test side has no words.
    """
    if mode not in ("type", "token"):
        raise ValueError(f"bad oov mode: {mode!r}")
    train_vocab = set(vocabulary(train))
    test_counts = vocabulary(test)
    if not test_counts:
        raise EmptyTestVocabulary("test manifest contains no words")
    if mode == "type":
        types = set(test_counts)
        return len(types - train_vocab) / len(types)
    total = sum(test_counts.values())
    unseen = sum(c for w, c in test_counts.items() if w not in train_vocab)
    return unseen / total


def split_by_difficulty(
    manifest: Manifest, test_fraction: float, scores: dict[str, float]
) -> tuple[Manifest, Manifest]:
    """Difficulty-balanced deterministic split.

    Utterances are sorted by score descending (ties broken by id) and every
    k-th one, k = round(1/test_fraction), goes to the test side starting
    from the top.  Systematic sampling keeps the test set spread evenly
    across the difficulty range and makes the split auditable.
    """
    if not (0 < test_fraction < 1):
        raise ValueError("test_fraction must be in (0, 1)")
    for u in manifest:
        if u.id not in scores:
            raise MissingScore(u.id)
    ranked = sorted(manifest, key=lambda u: (-scores[u.id], u.id))
    k = max(1, round(1.0 / test_fraction))
    test_ids = {u.id for i, u in enumerate(ranked) if i % k == 0}
    train = tuple(u for u in manifest if u.id not in test_ids)
    test = tuple(u for u in manifest if u.id in test_ids)
    return (
        Manifest(name=f"{manifest.name}.train", utterances=train),
        Manifest(name=f"{manifest.name}.test", utterances=test),
    )


def pick_by_duration(utterances, budget_s: float, seed: int) -> list:
    """Seeded shuffle, then greedy accumulation until the next item would
    exceed the budget.  Stopping (rather than skipping ahead) makes the
    selection a prefix of the shuffled order, so a larger budget always
    yields a superset."""
    pool = list(utterances)
    random.Random(seed).shuffle(pool)
    chosen = []
    total = 0.0
    for u in pool:
        if total + u.duration_s > budget_s:
            break
        chosen.append(u)
        total += u.duration_s
    return chosen


def subset_by_duration(manifest: Manifest, budget_s: float, seed: int) -> Manifest:
    """Deterministic duration-budgeted subset, in original manifest order."""
    if not budget_s > 0:
        raise ValueError("budget_s must be positive")
    keep = {u.id for u in pick_by_duration(manifest.utterances, budget_s, seed)}
    return Manifest(
        name=f"{manifest.name}.subset",
        utterances=tuple(u for u in manifest if u.id in keep),
    )


def corpus_stats(manifest: Manifest) -> dict:
    """Utterance/token/type counts and simple means."""
    n_utts = len(manifest)
    tokens = [w for u in manifest for w in u.words]
    total_s = manifest.total_duration_s
    return {
        "n_utts": n_utts,
        "n_word_tokens": len(tokens),
        "n_word_types": len(set(tokens)),
        "total_hours": total_s / 3600.0,
        "mean_utt_s": total_s / n_utts if n_utts else 0.0,
        "mean_word_chars": (sum(len(w) for w in tokens) / len(tokens)) if tokens else 0.0,
    }


def with_provenance(utterance: Utterance, provenance: str) -> Utterance:
    return replace(utterance, provenance=provenance)
