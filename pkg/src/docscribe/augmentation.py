"""Bookkeeping for TTS-based training-data augmentation.

Merges synthesized-audio manifests into real training data under hour
budgets.  Budgeted subsets are drawn by a seeded shuffle followed by
greedy accumulation, so the subsets of an ascending budget schedule are
nested and the accounting of an augmentation sweep stays consistent.
Synthesis quality metrics (STOI, PESQ, SI-SNR, MOS) are ingested from an
external estimator; computing them is out of scope here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import (
    Manifest,
    ParseError,
    SYNTHETIC,
    Utterance,
    oov_rate,
    pick_by_duration,
)

ALL = None  # budget sentinel: include every synthetic record

_METRIC_RANGES = {
    "stoi": (0.0, 1.0),
    "pesq": (-0.5, 4.5),
    "si_snr": (None, None),
    "mos": (1.0, 5.0),
}


class AugmentationError(Exception):
    pass


class NoMetrics(AugmentationError):
    pass


@dataclass(frozen=True)
class SynthRecord:
    """One synthesized utterance with optional quality metrics."""

    id: str
    text: str
    audio_path: str | None
    duration_s: float
    metrics: dict | None = None

    def __post_init__(self):
        if not self.duration_s > 0:
            raise AugmentationError(f"record {self.id!r}: duration must be positive")
        if self.metrics is not None:
            for name, value in self.metrics.items():
                lo, hi = _METRIC_RANGES.get(name, (None, None))
                if lo is not None and not (lo <= value <= hi):
                    raise AugmentationError(
                        f"record {self.id!r}: {name}={value} outside [{lo}, {hi}]"
                    )


def load_synth_manifest(path) -> list[SynthRecord]:
    """Line-JSON records with the corpus manifest schema plus ``metrics``."""
    records = []
    with open(path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(lineno, f"bad JSON: {e.msg}") from e
            try:
                records.append(
                    SynthRecord(
                        id=rec["id"],
                        text=rec["text"],
                        audio_path=rec.get("audio"),
                        duration_s=float(rec["duration_s"]),
                        metrics=rec.get("metrics"),
                    )
                )
            except KeyError as e:
                raise ParseError(lineno, f"missing key {e}") from e
    return records


def filter_long_texts(texts, max_chars: int) -> list[str]:
    """Drop entries strictly longer than ``max_chars`` codepoints."""
    if max_chars <= 0:
        raise ValueError("max_chars must be positive")
    return [t for t in texts if len(t) <= max_chars]


def _as_utterance(rec: SynthRecord) -> Utterance:
    return Utterance(
        id=rec.id,
        text=rec.text,
        duration_s=rec.duration_s,
        audio_path=rec.audio_path,
        provenance=SYNTHETIC,
    )


def merge_augment(
    real: Manifest, synth, budget_s: float | None, seed: int = 0
) -> Manifest:
    """Real data plus a budgeted synthetic subset.

    The real manifest is always included in full.  ``budget_s`` caps the
    total synthetic duration; ``ALL`` (None) takes everything.  Selection
    is deterministic per seed and monotone in the budget.
    """
    synth = list(synth)
    if budget_s is ALL:
        chosen = synth
    elif budget_s < 0:
        raise ValueError("budget_s must be >= 0 or ALL")
    else:
        chosen = pick_by_duration(synth, budget_s, seed)
    chosen_ids = {r.id for r in chosen}
    utts = tuple(real.utterances) + tuple(
        _as_utterance(r) for r in synth if r.id in chosen_ids
    )
    return Manifest(name=f"{real.name}+synth", utterances=utts)


def quality_summary(records) -> dict:
    """Mean of each metric over the records that carry it."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for rec in records:
        if not rec.metrics:
            continue
        for name, value in rec.metrics.items():
            sums[name] = sums.get(name, 0.0) + value
            counts[name] = counts.get(name, 0) + 1
    if not counts:
        raise NoMetrics("no record carries quality metrics")
    return {name: sums[name] / counts[name] for name in sums}


def augmentation_schedule(
    real: Manifest, synth, budgets_h, test: Manifest, seed: int = 0
) -> list[tuple[float, Manifest, float]]:
    """(budget_h, merged manifest, OOV rate vs ``test``) per budget step.

    Budgets are hours, ascending; the same seed at every step makes each
    synthetic subset a prefix of the next, so the schedule is nested and
    the OOV rate never increases.
    """
    budgets = list(budgets_h)
    if budgets != sorted(budgets):
        raise ValueError("budgets must be ascending")
    out = []
    for b in budgets:
        merged = merge_augment(real, synth, None if b is ALL else b * 3600.0, seed)
        out.append((b, merged, oov_rate(merged, test, mode="type")))
    return out
