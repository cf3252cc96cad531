"""Levenshtein alignment, WER/CER, and seen/unseen error attribution.

Substitutions and deletions belong to their reference word's category
(seen = present in the training vocabulary).  Insertions have no
reference word, so they are attributed to the nearest preceding reference
word, or to the first reference word when sentence-initial.  This rule is
an artifact decision and is recorded in every report so scores stay
auditable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .orthography import Alphabet, Transcript, normalize, strip_cedilla

INSERTION_RULE = "insertions follow the nearest preceding reference word"

MATCH = "match"
SUBSTITUTE = "substitute"
INSERT = "insert"
DELETE = "delete"


class EmptyReference(Exception):
    pass


@dataclass(frozen=True)
class AlignmentOp:
    kind: str
    ref_token: object = None
    hyp_token: object = None
    ref_index: int | None = None
    hyp_index: int | None = None


def align(ref, hyp) -> list[AlignmentOp]:
    """Minimal-cost alignment with unit substitution/deletion/insertion
    costs.  Backtrace ties prefer match > substitute > delete > insert,
    so the alignment is deterministic.
    """
    ref = list(ref)
    hyp = list(hyp)
    R, H = len(ref), len(hyp)
    dist = [[0] * (H + 1) for _ in range(R + 1)]
    for i in range(1, R + 1):
        dist[i][0] = i
    for j in range(1, H + 1):
        dist[0][j] = j
    for i in range(1, R + 1):
        ri = ref[i - 1]
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, H + 1):
            sub = prev[j - 1] + (ri != hyp[j - 1])
            dele = prev[j] + 1
            ins = row[j - 1] + 1
            row[j] = min(sub, dele, ins)

    ops: list[AlignmentOp] = []
    i, j = R, H
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i - 1][j - 1] == here:
            ops.append(AlignmentOp(MATCH, ref[i - 1], hyp[j - 1], i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i - 1][j - 1] + 1 == here and ref[i - 1] != hyp[j - 1]:
            ops.append(AlignmentOp(SUBSTITUTE, ref[i - 1], hyp[j - 1], i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i - 1][j] + 1 == here:
            ops.append(AlignmentOp(DELETE, ref_token=ref[i - 1], ref_index=i - 1))
            i -= 1
        else:
            ops.append(AlignmentOp(INSERT, hyp_token=hyp[j - 1], hyp_index=j - 1))
            j -= 1
    ops.reverse()
    return ops


def edit_counts(ref, hyp) -> tuple[int, int, int]:
    """(substitutions, deletions, insertions) of the minimal alignment."""
    s = d = i = 0
    for op in align(ref, hyp):
        if op.kind == SUBSTITUTE:
            s += 1
        elif op.kind == DELETE:
            d += 1
        elif op.kind == INSERT:
            i += 1
    return s, d, i


def wer(ref, hyp) -> float:
    """100 * (S + D + I) / |ref| over word tokens."""
    ref = list(ref)
    if not ref:
        raise EmptyReference("reference is empty")
    s, d, i = edit_counts(ref, list(hyp))
    return 100.0 * (s + d + i) / len(ref)


def cer(ref_chars, hyp_chars) -> float:
    """Same formula over character tokens."""
    return wer(ref_chars, hyp_chars)


@dataclass
class CategoryCounts:
    ref_tokens: int = 0
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def error_rate(self) -> float:
        return 100.0 * self.errors / self.ref_tokens if self.ref_tokens else 0.0

    def add(self, other: "CategoryCounts") -> "CategoryCounts":
        return CategoryCounts(
            self.ref_tokens + other.ref_tokens,
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
        )

    def to_dict(self) -> dict:
        return {
            "ref_tokens": self.ref_tokens,
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
        }


@dataclass
class EvalReport:
    seen: CategoryCounts
    unseen: CategoryCounts
    chars: CategoryCounts
    filtered: "EvalReport | None" = None
    insertion_rule: str = INSERTION_RULE

    @property
    def overall(self) -> CategoryCounts:
        return self.seen.add(self.unseen)

    @property
    def wer_all(self) -> float:
        return self.overall.error_rate

    @property
    def wer_seen(self) -> float:
        return self.seen.error_rate

    @property
    def wer_unseen(self) -> float:
        return self.unseen.error_rate

    @property
    def cer(self) -> float:
        return self.chars.error_rate

    def to_dict(self) -> dict:
        doc = {
            "insertion_rule": self.insertion_rule,
            "cer": self.cer,
            "wer": {"seen": self.wer_seen, "unseen": self.wer_unseen, "all": self.wer_all},
            "counts": {
                "seen": self.seen.to_dict(),
                "unseen": self.unseen.to_dict(),
                "chars": self.chars.to_dict(),
            },
        }
        if self.filtered is not None:
            doc["filtered"] = self.filtered.to_dict()
        return doc


def categorized_wer(pairs, train_vocab) -> EvalReport:
    """Score (reference, hypothesis) Transcript pairs with seen/unseen
    attribution against ``train_vocab``."""
    train_vocab = set(train_vocab)
    seen = CategoryCounts()
    unseen = CategoryCounts()
    chars = CategoryCounts()
    for ref_t, hyp_t in pairs:
        ref_words = list(ref_t.words)
        hyp_words = list(hyp_t.words)
        if not ref_words:
            raise EmptyReference(f"empty reference transcript {ref_t.raw!r}")

        def bucket(word: str) -> CategoryCounts:
            return seen if word in train_vocab else unseen

        for w in ref_words:
            bucket(w).ref_tokens += 1
        current = ref_words[0]  # sentence-initial insertions follow the first ref word
        for op in align(ref_words, hyp_words):
            if op.kind == MATCH:
                current = op.ref_token
            elif op.kind == SUBSTITUTE:
                current = op.ref_token
                bucket(op.ref_token).substitutions += 1
            elif op.kind == DELETE:
                current = op.ref_token
                bucket(op.ref_token).deletions += 1
            else:
                bucket(current).insertions += 1

        ref_chars = list(ref_t.graphemes)
        s, d, i = edit_counts(ref_chars, list(hyp_t.graphemes))
        chars.ref_tokens += len(ref_chars)
        chars.substitutions += s
        chars.deletions += d
        chars.insertions += i
    return EvalReport(seen=seen, unseen=unseen, chars=chars)


def filtered_report(pairs, train_vocab, alphabet: Alphabet) -> EvalReport:
    """Full report plus a nested cedilla-filtered variant.

    The filtered pass strips the combining cedilla from references,
    hypotheses and the training vocabulary, re-normalizes, and re-scores,
    so differences that are cedilla-only stop counting as errors.
    """
    report = categorized_wer(pairs, train_vocab)
    stripped_pairs = [
        (
            normalize(strip_cedilla(r.text), alphabet),
            normalize(strip_cedilla(h.text), alphabet),
        )
        for r, h in pairs
    ]
    stripped_vocab = {strip_cedilla(w) for w in train_vocab}
    report.filtered = categorized_wer(stripped_pairs, stripped_vocab)
    return report


def render_report(report: EvalReport, fmt: str = "text") -> str:
    """Render as an aligned text table or a stable JSON document."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"# {report.insertion_rule}"]
    header = f"{'':<10}{'CER%':>8}{'WER% seen':>12}{'unseen':>9}{'all':>8}"
    lines.append(header)

    def row(tag: str, r: EvalReport) -> str:
        return (
            f"{tag:<10}{r.cer:>8.2f}{r.wer_seen:>12.2f}"
            f"{r.wer_unseen:>9.2f}{r.wer_all:>8.2f}"
        )

    lines.append(row("overall", report))
    if report.filtered is not None:
        lines.append(row("filtered", report.filtered))
    return "\n".join(lines) + "\n"
