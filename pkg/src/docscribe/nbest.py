"""Ranked hypothesis lists: the hand-off format between decoders,
external inference scripts, the rescorer, and the service."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .orthography import Alphabet, Transcript, normalize


@dataclass(frozen=True)
class Hypothesis:
    """One decoding hypothesis with its scores.

    ``acoustic_logp`` is the model score in natural log; ``lm_log10p`` the
    LM score in log10 (ARPA convention), present only when an LM was
    consulted.  When fusion or rescoring is active,
    ``combined = acoustic_logp + alpha*ln(10)*lm_log10p + beta*word_count``;
    otherwise ``combined == acoustic_logp``.
    """

    transcript: Transcript
    acoustic_logp: float
    lm_log10p: float | None = None
    word_count: int = 0
    combined: float = 0.0


@dataclass(frozen=True)
class NBestList:
    utterance_id: str
    entries: tuple[Hypothesis, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def top(self) -> Hypothesis:
        return self.entries[0]


def nbest_to_dict(nbest: NBestList) -> dict:
    entries = []
    for h in nbest.entries:
        e = {"text": h.transcript.text, "am_logp": h.acoustic_logp}
        if h.lm_log10p is not None:
            e["lm_log10p"] = h.lm_log10p
        e["word_count"] = h.word_count
        e["combined"] = h.combined
        entries.append(e)
    return {"utterance_id": nbest.utterance_id, "source": nbest.source, "entries": entries}


def nbest_from_dict(doc: dict, alphabet: Alphabet) -> NBestList:
    entries = []
    for e in doc.get("entries", []):
        transcript = normalize(e["text"], alphabet)
        am = float(e["am_logp"])
        entries.append(
            Hypothesis(
                transcript=transcript,
                acoustic_logp=am,
                lm_log10p=e.get("lm_log10p"),
                word_count=int(e.get("word_count", len(transcript.words))),
                combined=float(e.get("combined", am)),
            )
        )
    return NBestList(
        utterance_id=doc.get("utterance_id", ""),
        entries=tuple(entries),
        source=doc.get("source", ""),
    )


def save_nbest(nbest: NBestList, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(nbest_to_dict(nbest), fp, ensure_ascii=False, indent=2)
        fp.write("\n")


def load_nbest(path, alphabet: Alphabet) -> NBestList:
    with open(path, encoding="utf-8") as fp:
        return nbest_from_dict(json.load(fp), alphabet)
