"""Locate scientific spans inside mixed text.

Explicit ``<SMILES>``/``<FASTA>`` tags always win. Heuristic rules then scan
the remaining gaps for whitespace-delimited SMILES, nucleotide and protein
strings, and whatever is left over is plain TEXT.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

from .modality import (
    AMINO_ACID_LETTERS,
    NUCLEOTIDE_LETTERS,
    SMILES_CHARS,
    Modality,
    classify_fasta,
)
from .smiles import validate_smiles

logger = logging.getLogger(__name__)

_TAG = re.compile(r"<(/?)(SMILES|FASTA)>")
_WORD = re.compile(r"\S+")
_LEADING_PUNCT = "\"'`«“‘"
_TRAILING_PUNCT = ",;:!?.\"'`»”’"
# Capitalised or lowercase English words ("Cocoons") are valid aromatic SMILES.
_WORDLIKE = re.compile(r"[A-Z]?[a-z]+")
_PROTEIN_CHARS = AMINO_ACID_LETTERS | {"X"}
_PRIORITY = {Modality.SMILES: 0, Modality.NUCLEOTIDE: 1, Modality.PROTEIN: 2}


class Origin(str, Enum):
    TAG = "TAG"
    HEURISTIC = "HEURISTIC"
    DEFAULT = "DEFAULT"


class MalformedTagError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self._raw = message

    def __reduce__(self):
        return type(self), (self._raw, self.offset)


@dataclass(frozen=True)
class DetectorConfig:
    min_smiles_len: int = 6
    min_fasta_len: int = 12
    min_protein_len: int = 16
    enable_heuristics: bool = True

    @classmethod
    def from_file(cls, path: str | Path) -> DetectorConfig:
        """Read ``key=value`` lines; blank lines and ``#`` comments are skipped."""
        known = {f.name: f.type for f in fields(cls)}
        values: dict[str, object] = {}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep or key not in known:
                raise ValueError(f"{path}:{lineno}: unrecognised config line {raw!r}")
            if key == "enable_heuristics":
                lowered = value.lower()
                if lowered not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"{path}:{lineno}: expected a boolean for {key}")
                values[key] = lowered in ("true", "1", "yes")
            else:
                values[key] = int(value)
        return cls(**values)

    def to_text(self) -> str:
        return "".join(
            f"{f.name}={str(getattr(self, f.name)).lower()}\n" for f in fields(self)
        )


@dataclass(frozen=True)
class Span:
    """A modality-labelled range ``[start, end)`` of the source text.

    For TAG spans ``start``/``end`` bound the payload only; the literal tag
    delimiters sit just outside and are kept in ``open_tag``/``close_tag``.
    """

    start: int
    end: int
    modality: Modality
    origin: Origin
    open_tag: str = ""
    close_tag: str = ""

    @property
    def outer_start(self) -> int:
        return self.start - len(self.open_tag)

    @property
    def outer_end(self) -> int:
        return self.end + len(self.close_tag)

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "end": self.end,
            "modality": self.modality.value,
            "origin": self.origin.value,
        }


@dataclass(frozen=True)
class SegmentedText:
    text: str
    spans: tuple[Span, ...]

    def pieces(self) -> list[str]:
        """Source substrings per span, delimiters included."""
        return [self.text[s.outer_start : s.outer_end] for s in self.spans]

    def check(self) -> None:
        """Raise AssertionError if the spans do not tile the text."""
        cursor = 0
        for span in self.spans:
            assert span.outer_start == cursor, f"gap or overlap at {cursor}"
            assert span.start <= span.end
            assert span.outer_start < span.outer_end
            cursor = span.outer_end
        assert cursor == len(self.text), "spans do not reach end of text"


def detect_tags(text: str) -> list[Span]:
    """Spans for every ``<SMILES>`` and ``<FASTA>`` region.

    FASTA payloads whose alphabet is neither nucleotide nor protein are
    dropped (the region stays plain text) with a warning.
    """
    spans = []
    opened: re.Match | None = None
    for m in _TAG.finditer(text):
        closing, kind = m.group(1) == "/", m.group(2)
        if not closing:
            if opened is not None:
                raise MalformedTagError(f"<{kind}> opened inside <{opened.group(2)}>", m.start())
            opened = m
            continue
        if opened is None:
            raise MalformedTagError(f"</{kind}> without matching open tag", m.start())
        if opened.group(2) != kind:
            raise MalformedTagError(f"</{kind}> closes <{opened.group(2)}>", m.start())
        start, end = opened.end(), m.start()
        if kind == "SMILES":
            modality = Modality.SMILES
        else:
            modality = classify_fasta(text[start:end])
        if modality is None:
            logger.warning("FASTA payload at %d fits no sequence alphabet; kept as text", start)
        else:
            spans.append(Span(start, end, modality, Origin.TAG, opened.group(0), m.group(0)))
        opened = None
    if opened is not None:
        raise MalformedTagError(f"<{opened.group(2)}> is never closed", opened.start())
    return spans


def _trim(word: str, start: int) -> tuple[int, int]:
    lo, hi = 0, len(word)
    while lo < hi and word[lo] in _LEADING_PUNCT:
        lo += 1
    while hi > lo and word[hi - 1] in _TRAILING_PUNCT:
        hi -= 1
    core = word[lo:hi]
    # Strip parentheses that belong to the prose rather than the molecule.
    while core.startswith("(") and core.count("(") > core.count(")"):
        lo, core = lo + 1, core[1:]
    while core.endswith(")") and core.count(")") > core.count("("):
        hi, core = hi - 1, core[:-1]
    while core.startswith("(") and _closing_paren(core) == len(core) - 1:
        lo, hi, core = lo + 1, hi - 1, core[1:-1]
    return start + lo, start + hi


def _closing_paren(s: str) -> int:
    """Index of the parenthesis closing ``s[0]``, or -1."""
    depth = 0
    for i, ch in enumerate(s):
        depth += (ch == "(") - (ch == ")")
        if depth == 0:
            return i
    return -1


def _candidates(core: str, start: int, rules: DetectorConfig) -> list[tuple[int, int, Modality]]:
    found = []
    chars = set(core)
    n = len(core)
    if (
        n >= rules.min_smiles_len
        and chars <= SMILES_CHARS
        and not _WORDLIKE.fullmatch(core)
        and validate_smiles(core)
    ):
        found.append((start, start + n, Modality.SMILES))
    if n >= rules.min_fasta_len and chars <= NUCLEOTIDE_LETTERS:
        found.append((start, start + n, Modality.NUCLEOTIDE))
    if n >= rules.min_protein_len and chars <= _PROTEIN_CHARS and chars - NUCLEOTIDE_LETTERS:
        found.append((start, start + n, Modality.PROTEIN))
    return found


def detect_heuristic(text: str, rules: DetectorConfig = DetectorConfig()) -> list[Span]:
    spans = []
    for m in _WORD.finditer(text):
        lo, hi = _trim(m.group(0), m.start())
        if hi <= lo:
            continue
        # Candidates from different words never overlap; within a word the
        # longest wins, then the earliest, then SMILES > NUCLEOTIDE > PROTEIN.
        found = _candidates(text[lo:hi], lo, rules)
        if found:
            start, end, modality = min(found, key=lambda c: (c[0] - c[1], c[0], _PRIORITY[c[2]]))
            spans.append(Span(start, end, modality, Origin.HEURISTIC))
    return spans


def segment(text: str, rules: DetectorConfig = DetectorConfig()) -> SegmentedText:
    tagged = detect_tags(text)
    detected: list[Span] = list(tagged)
    if rules.enable_heuristics:
        for gap_start, gap_end in _gaps(tagged, len(text)):
            for span in detect_heuristic(text[gap_start:gap_end], rules):
                detected.append(
                    Span(span.start + gap_start, span.end + gap_start, span.modality, span.origin)
                )
    detected.sort(key=lambda s: s.outer_start)

    spans = []
    for gap_start, gap_end in _gaps(detected, len(text)):
        spans.append(Span(gap_start, gap_end, Modality.TEXT, Origin.DEFAULT))
    spans.extend(detected)
    spans.sort(key=lambda s: s.outer_start)
    return SegmentedText(text, tuple(spans))


def _gaps(spans: list[Span], length: int) -> list[tuple[int, int]]:
    gaps = []
    cursor = 0
    for span in spans:
        if span.outer_start > cursor:
            gaps.append((cursor, span.outer_start))
        cursor = span.outer_end
    if cursor < length:
        gaps.append((cursor, length))
    return gaps
