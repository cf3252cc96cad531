"""Re-rank n-best hypothesis lists with an n-gram LM.

Used for decoders that cannot fuse the LM during search (encoder-decoder
models hand over a fixed list of candidates).  Model scores are trusted
as given: they are only comparable within one list, so no renormalization
is applied.
"""

from __future__ import annotations

import math

from .nbest import Hypothesis, NBestList
from .ngram_lm import NGramModel

_LN10 = math.log(10.0)


class EmptyNBest(Exception):
    pass


def rescore(
    nbest: NBestList, lm: NGramModel, alpha: float, gamma_len: float = 0.0
) -> NBestList:
    """Stable re-ranking by ``am_logp + alpha*ln(10)*lm + gamma_len*|words|``.

    The LM term is the full sequence score including ``</s>``.  Sorting is
    stable and descending, so exact ties keep their input order and
    ``alpha == gamma_len == 0`` returns the list unchanged apart from the
    populated scores.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not nbest.entries:
        raise EmptyNBest(f"n-best list for {nbest.utterance_id!r} is empty")
    rescored = []
    for h in nbest.entries:
        words = h.transcript.words
        lm_log10 = lm.score_sequence(words)
        combined = h.acoustic_logp + alpha * _LN10 * lm_log10 + gamma_len * len(words)
        rescored.append(
            Hypothesis(
                transcript=h.transcript,
                acoustic_logp=h.acoustic_logp,
                lm_log10p=lm_log10,
                word_count=len(words),
                combined=combined,
            )
        )
    rescored.sort(key=lambda h: -h.combined)
    return NBestList(
        utterance_id=nbest.utterance_id,
        entries=tuple(rescored),
        source=nbest.source,
    )
