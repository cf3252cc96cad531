"""Grapheme inventory, Unicode normalization and character segmentation.

The writing systems this toolkit targets mix precomposed characters with
combining diacritics, and may use multi-codepoint graphemes.  All text is
canonically decomposed (NFD) before matching so that the two spellings of
e.g. C-cedilla are indistinguishable, and recomposed (NFC) for display.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

BLANK_ID = 0
SEPARATOR_ID = 1
BLANK_MARKER = "<blank>"
SPACE_MARKER = "<space>"

COMBINING_CEDILLA = "̧"


class OrthographyError(Exception):
    """Base class for orthography failures."""


class UnknownGrapheme(OrthographyError):
    """A codepoint sequence matched no grapheme in the alphabet.

    Attributes
    ----------
    position : int
        Index into the decomposed codepoint sequence of the input.
    codepoints : str
        The offending codepoint(s).
    """

    def __init__(self, position: int, codepoints: str):
        self.position = position
        self.codepoints = codepoints
        names = " ".join(f"U+{ord(c):04X}" for c in codepoints)
        super().__init__(f"no grapheme matches {names!r} at decomposed position {position}")


@dataclass(frozen=True)
class Alphabet:
    """Ordered grapheme inventory with reserved CTC-blank and word-separator ids.

    Label ids are contiguous from 0: id 0 is the CTC blank, id 1 the word
    separator, and the graphemes follow in file order.  Graphemes are stored
    in NFD so matching happens on decomposed codepoints.
    """

    graphemes: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)
    _sorted: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nfd = tuple(unicodedata.normalize("NFD", g) for g in self.graphemes)
        if len(set(nfd)) != len(nfd):
            raise OrthographyError("duplicate graphemes in alphabet")
        if any(not g for g in nfd):
            raise OrthographyError("empty grapheme in alphabet")
        object.__setattr__(self, "graphemes", nfd)
        object.__setattr__(
            self, "_index", {g: i + 2 for i, g in enumerate(nfd)}
        )
        # longest-first so multi-codepoint graphemes win over their prefixes
        object.__setattr__(
            self, "_sorted", tuple(sorted(nfd, key=len, reverse=True))
        )

    @property
    def blank_symbol(self) -> str:
        return BLANK_MARKER

    @property
    def word_separator(self) -> str:
        return " "

    @property
    def size(self) -> int:
        """Total label count including blank and separator."""
        return len(self.graphemes) + 2

    def id_of(self, grapheme: str) -> int:
        return self._index[unicodedata.normalize("NFD", grapheme)]

    def label(self, label_id: int) -> str:
        """Display string for a label id (blank/separator use markers)."""
        if label_id == BLANK_ID:
            return BLANK_MARKER
        if label_id == SEPARATOR_ID:
            return SPACE_MARKER
        return unicodedata.normalize("NFC", self.graphemes[label_id - 2])

    def labels(self) -> list[str]:
        """All V label strings in id order, markers included."""
        return [self.label(i) for i in range(self.size)]

    def render(self, ids) -> str:
        """Join grapheme ids back into NFC display text (blank ids dropped)."""
        parts = []
        for i in ids:
            if i == BLANK_ID:
                continue
            parts.append(" " if i == SEPARATOR_ID else self.graphemes[i - 2])
        return unicodedata.normalize("NFC", "".join(parts))

    @classmethod
    def from_labels(cls, labels) -> "Alphabet":
        """Build from a full V-sized label list (as stored in logit files)."""
        labels = list(labels)
        if len(labels) < 2 or labels[0] != BLANK_MARKER or labels[1] != SPACE_MARKER:
            raise OrthographyError(
                f"label list must start with {BLANK_MARKER!r}, {SPACE_MARKER!r}"
            )
        return cls(graphemes=tuple(labels[2:]))


def load_alphabet(path) -> Alphabet:
    """Read an alphabet config file.

    UTF-8 text, one grapheme per line; the first two non-comment lines must
    be the ``<blank>`` and ``<space>`` markers.  ``#`` starts a comment.
    """
    lines = []
    with open(path, encoding="utf-8") as fp:
        for raw in fp:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            lines.append(line)
    if len(lines) < 2 or lines[0] != BLANK_MARKER or lines[1] != SPACE_MARKER:
        raise OrthographyError(
            f"alphabet file must begin with {BLANK_MARKER!r} and {SPACE_MARKER!r} lines"
        )
    return Alphabet(graphemes=tuple(lines[2:]))


@dataclass(frozen=True)
class Transcript:
    """A normalized text: raw form, grapheme ids, and word strings.

    ``graphemes`` includes separator ids between words; rendering them
    through the alphabet reproduces the normalized form of ``raw``.
    """

    raw: str
    graphemes: tuple[int, ...]
    words: tuple[str, ...]

    @property
    def text(self) -> str:
        """Normalized single-spaced NFC text."""
        return " ".join(self.words)

    def __str__(self) -> str:
        return self.text


def normalize(text: str, alphabet: Alphabet, on_unknown: str = "error") -> Transcript:
    """Segment text into alphabet grapheme ids.

    The input is canonically decomposed and matched longest-first against
    the alphabet.  Whitespace runs collapse to a single word separator;
    leading and trailing separators are removed.

    Parameters
    ----------
    text : str
        Input text in any Unicode normalization form.
    alphabet : Alphabet
    on_unknown : {"error", "drop"}
        What to do with codepoints no grapheme matches.  ``error`` raises
        :class:`UnknownGrapheme`; ``drop`` logs and skips the codepoint.
        Documentation data should not silently lose symbols, so the default
        is ``error``.

    Returns
    -------
    Transcript
    """
    if on_unknown not in ("error", "drop"):
        raise ValueError(f"bad on_unknown policy: {on_unknown!r}")
    decomposed = unicodedata.normalize("NFD", text)
    ids: list[int] = []
    pos = 0
    n = len(decomposed)
    while pos < n:
        ch = decomposed[pos]
        if ch.isspace():
            if ids and ids[-1] != SEPARATOR_ID:
                ids.append(SEPARATOR_ID)
            pos += 1
            continue
        for g in alphabet._sorted:
            if decomposed.startswith(g, pos):
                ids.append(alphabet._index[g])
                pos += len(g)
                break
        else:
            if on_unknown == "error":
                raise UnknownGrapheme(pos, ch)
            log.warning("dropping unknown codepoint U+%04X at position %d", ord(ch), pos)
            pos += 1
    while ids and ids[-1] == SEPARATOR_ID:
        ids.pop()

    words: list[str] = []
    current: list[int] = []
    for i in ids:
        if i == SEPARATOR_ID:
            if current:
                words.append(alphabet.render(current))
            current = []
        else:
            current.append(i)
    if current:
        words.append(alphabet.render(current))
    return Transcript(raw=text, graphemes=tuple(ids), words=tuple(words))


def transcript_from_ids(ids, alphabet: Alphabet) -> Transcript:
    """Normalize a decoded grapheme-id sequence into a Transcript."""
    return normalize(alphabet.render(ids), alphabet)


def strip_cedilla(text: str) -> str:
    """Remove every COMBINING CEDILLA (U+0327), preserving all else.

    Decomposes canonically, drops the cedillas, recomposes.  Total and
    idempotent.  COMMA BELOW (U+0326) is left alone: the filter targets the
    cedilla proper.
    """
    decomposed = unicodedata.normalize("NFD", text)
    return unicodedata.normalize(
        "NFC", decomposed.replace(COMBINING_CEDILLA, "")
    )


def segment_words(transcript: Transcript) -> list[str]:
    """Words of a normalized transcript (no separators, no empties)."""
    return list(transcript.words)
