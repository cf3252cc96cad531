"""Backoff word n-gram language models with modified Kneser-Ney smoothing.

Models are estimated in interpolated form and stored as a standard backoff
table (log10 probabilities plus log10 backoff weights), which is exactly
the ARPA representation, so serialization is a direct dump of the table
and files written by other toolkits load into the same structure.

Smoothing follows the modified Kneser-Ney recipe: three discounts per
order estimated from count-of-counts, continuation counts below the top
order (raw counts for n-grams starting with ``<s>``, which nothing can
precede), and interpolation with the next-lower order.  The unigram level
is closed off by assigning all leftover probability mass to ``<unk>``, so
every stored context sums to one over the vocabulary and no query can
return minus infinity.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

# ARPA convention for "probability zero": <s> is never predicted.
LOG10_ZERO = -99.0

_LN10 = math.log(10.0)


class LmError(Exception):
    pass


class EmptyCorpus(LmError):
    pass


class MalformedArpa(LmError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class CountMismatch(LmError):
    def __init__(self, order: int, declared: int, actual: int):
        self.order = order
        super().__init__(
            f"{order}-gram section declares {declared} entries but has {actual}"
        )


@dataclass(frozen=True)
class LmQueryState:
    """Rolling context of the last (order-1) accepted words."""

    context: tuple[str, ...]


class NGramModel:
    """Backoff n-gram table queried with Katz-style recursion.

    ``table`` maps each stored n-gram tuple to ``(log10 prob, log10 bow)``
    where the backoff weight is ``None`` for n-grams that never serve as a
    context (top order, or ending in ``</s>``).
    """

    def __init__(self, order: int, table: dict[tuple[str, ...], tuple[float, float | None]]):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.table = table
        self.vocab = frozenset(g[0] for g in table if len(g) == 1)
        if UNK not in self.vocab:
            raise LmError(f"model has no {UNK} unigram; open-vocabulary queries impossible")

    def start_state(self) -> LmQueryState:
        return LmQueryState(context=(BOS,) if self.order > 1 else ())

    def score_word(self, state: LmQueryState, word: str) -> tuple[float, LmQueryState]:
        """log10 P(word | state) and the advanced state.

        Unknown words map to ``<unk>``.  The longest stored n-gram ending in
        the word is used; backoff weights of the skipped contexts accumulate.
        Total: never returns -inf.
        """
        w = word if (word,) in self.table else UNK
        ctx = state.context[-(self.order - 1):] if self.order > 1 else ()
        logp = 0.0
        while True:
            entry = self.table.get(ctx + (w,))
            if entry is not None:
                logp += entry[0]
                break
            if not ctx:
                # cannot happen: (w,) is always stored after the UNK mapping
                raise LmError(f"no unigram for {w!r}")
            ctx_entry = self.table.get(ctx)
            if ctx_entry is not None and ctx_entry[1] is not None:
                logp += ctx_entry[1]
            ctx = ctx[1:]
        next_ctx = (state.context + (w,))[-(self.order - 1):] if self.order > 1 else ()
        return logp, LmQueryState(context=next_ctx)

    def score_sequence(self, words) -> float:
        """log10 P of the words plus the final ``</s>``, from a ``<s>`` start."""
        state = self.start_state()
        total = 0.0
        for w in list(words) + [EOS]:
            lp, state = self.score_word(state, w)
            total += lp
        return total


def train(sentences, order: int = 4) -> NGramModel:
    """Estimate a modified-KN model from tokenized sentences.

    Parameters
    ----------
    sentences : iterable of word sequences
    order : int
        Target n-gram order; reduced with a warning if it exceeds the
        longest padded sentence.
    """
    sents = [list(s) for s in sentences]
    if not any(sents):
        raise EmptyCorpus("no non-empty sentence in the corpus")
    if order < 1:
        raise ValueError("order must be >= 1")
    longest = max(len(s) for s in sents) + 2
    if order > longest:
        log.warning("order %d exceeds longest padded sentence (%d); reducing", order, longest)
        order = longest

    # raw window counts for every order
    raw: list[Counter] = [Counter() for _ in range(order + 1)]
    for words in sents:
        padded = [BOS] + words + [EOS]
        for n in range(1, order + 1):
            for i in range(len(padded) - n + 1):
                raw[n][tuple(padded[i : i + n])] += 1

    # adjusted counts: raw at the top order, continuation counts below,
    # except n-grams starting with <s> (nothing precedes them)
    adjusted: list[dict] = [dict() for _ in range(order + 1)]
    adjusted[order] = dict(raw[order])
    adjusted[order].pop((BOS,), None)  # <s> is never predicted
    for n in range(order - 1, 0, -1):
        cont: Counter = Counter()
        for gram in raw[n + 1]:
            cont[gram[1:]] += 1
        adj = {}
        for gram in raw[n]:
            if n == 1 and gram == (BOS,):
                continue
            adj[gram] = raw[n][gram] if gram[0] == BOS else cont[gram]
        adjusted[n] = adj

    disc = [None] + [_discounts(adjusted[n]) for n in range(1, order + 1)]

    # interpolated probabilities, bottom-up so lower orders are available
    prob: dict[tuple[str, ...], float] = {}
    gamma: dict[tuple[str, ...], float] = {}

    uni = adjusted[1]
    uni_total = sum(uni.values())
    d1 = disc[1]
    seen_mass = 0.0
    for gram, c in uni.items():
        p = max(c - _discount_for(c, d1), 0.0) / uni_total
        prob[gram] = p
        seen_mass += p
    prob[(UNK,)] = 1.0 - seen_mass
    prob[(BOS,)] = 10.0 ** LOG10_ZERO

    for n in range(2, order + 1):
        followers: dict[tuple[str, ...], list] = {}
        for gram, c in adjusted[n].items():
            followers.setdefault(gram[:-1], []).append((gram, c))
        dn = disc[n]
        for ctx, grams in followers.items():
            total = sum(c for _, c in grams)
            discounted = sum(_discount_for(c, dn) for _, c in grams)
            g = discounted / total
            gamma[ctx] = g
            for gram, c in grams:
                lower = prob[gram[1:]]
                prob[gram] = max(c - _discount_for(c, dn), 0.0) / total + g * lower

    # contexts with followers take their leftover mass as backoff weight;
    # anything else backs off with weight 1
    # gamma can be exactly 0 when a discount lands on 0 and every follower
    # shares that count class; floor it like any other zero-probability
    # ARPA entry so queries stay finite
    floor = 10.0 ** LOG10_ZERO
    table: dict[tuple[str, ...], tuple[float, float | None]] = {}
    for gram, p in prob.items():
        if len(gram) == order or gram[-1] == EOS:
            bow = None
        elif gram in gamma:
            bow = math.log10(gamma[gram]) if gamma[gram] > floor else LOG10_ZERO
        else:
            bow = 0.0
        logp = math.log10(p) if p > floor else LOG10_ZERO
        table[gram] = (logp, bow)
    return NGramModel(order=order, table=table)


def _discounts(adjusted: dict) -> tuple[float, float, float]:
    """Chen-Goodman D1/D2/D3+ for one order, 0.5 where degenerate."""
    cc = Counter(adjusted.values())
    n = [cc.get(k, 0) for k in range(1, 5)]
    if n[0] == 0 or n[1] == 0:
        return (0.5, 0.5, 0.5)
    y = n[0] / (n[0] + 2.0 * n[1])
    out = []
    for k in (1, 2, 3):
        nk, nk1 = n[k - 1], n[k]
        if nk == 0 or nk1 == 0:
            out.append(0.5)
        else:
            d = k - (k + 1) * y * nk1 / nk
            out.append(d if d >= 0 else 0.5)
    return tuple(out)


def _discount_for(count: int, ds: tuple[float, float, float]) -> float:
    if count == 0:
        return 0.0
    return ds[min(count, 3) - 1]


def perplexity(model: NGramModel, sentences) -> float:
    """Per-token perplexity over the sentences, ``</s>`` included."""
    total = 0.0
    tokens = 0
    for s in sentences:
        words = list(s)
        total += model.score_sequence(words)
        tokens += len(words) + 1
    if tokens == 0:
        raise EmptyCorpus("nothing to evaluate")
    return 10.0 ** (-total / tokens)


def write_arpa(model: NGramModel, path) -> None:
    """Serialize to ARPA text (UTF-8, LF)."""
    by_order: dict[int, list] = {n: [] for n in range(1, model.order + 1)}
    for gram, entry in model.table.items():
        by_order[len(gram)].append((gram, entry))
    for grams in by_order.values():
        grams.sort(key=lambda it: it[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write("\\data\\\n")
        for n in range(1, model.order + 1):
            fp.write(f"ngram {n}={len(by_order[n])}\n")
        for n in range(1, model.order + 1):
            fp.write(f"\n\\{n}-grams:\n")
            for gram, (logp, bow) in by_order[n]:
                line = f"{logp:.8f}\t{' '.join(gram)}"
                if bow is not None:
                    line += f"\t{bow:.8f}"
                fp.write(line + "\n")
        fp.write("\n\\end\\\n")


def read_arpa(path) -> NGramModel:
    """Parse an ARPA file as emitted by this module or common toolkits."""
    table: dict[tuple[str, ...], tuple[float, float | None]] = {}
    declared: dict[int, int] = {}
    actual: dict[int, int] = {}
    section = None  # None -> preamble, 0 -> \data\, n -> \n-grams:
    with open(path, encoding="utf-8") as fp:
        for lineno, rawline in enumerate(fp, start=1):
            line = rawline.strip()
            if not line:
                continue
            if line == "\\data\\":
                section = 0
                continue
            if line == "\\end\\":
                section = -1
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                try:
                    n = int(line[1:-7])
                except ValueError:
                    raise MalformedArpa(lineno, f"bad section header {line!r}")
                if n not in declared:
                    raise MalformedArpa(lineno, f"section {line!r} not declared in \\data\\")
                section = n
                continue
            if section is None:
                continue  # tolerate toolkit preamble/comments before \data\
            if section == 0:
                if not line.startswith("ngram "):
                    raise MalformedArpa(lineno, f"expected 'ngram N=count', got {line!r}")
                try:
                    n_str, count_str = line[6:].split("=")
                    declared[int(n_str)] = int(count_str)
                except ValueError:
                    raise MalformedArpa(lineno, f"bad count line {line!r}")
                continue
            if section == -1:
                raise MalformedArpa(lineno, "content after \\end\\")
            fields = line.split()
            n = section
            if len(fields) == n + 1:
                bow = None
            elif len(fields) == n + 2:
                try:
                    bow = float(fields[-1])
                except ValueError:
                    raise MalformedArpa(lineno, f"bad backoff weight {fields[-1]!r}")
            else:
                raise MalformedArpa(lineno, f"expected {n + 1} or {n + 2} fields, got {len(fields)}")
            try:
                logp = float(fields[0])
            except ValueError:
                raise MalformedArpa(lineno, f"bad probability {fields[0]!r}")
            gram = tuple(fields[1 : n + 1])
            table[gram] = (logp, bow)
            actual[n] = actual.get(n, 0) + 1
    if not declared:
        raise MalformedArpa(0, "no \\data\\ section found")
    for n, count in declared.items():
        if actual.get(n, 0) != count:
            raise CountMismatch(n, count, actual.get(n, 0))
    order = max(declared)
    if (UNK,) not in table:
        # closed-vocabulary files from other toolkits: give <unk> a floor
        table[(UNK,)] = (LOG10_ZERO, 0.0)
    return NGramModel(order=order, table=table)
