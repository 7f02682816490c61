"""Characters-per-token compression ratio.

CR(tokenizer, dataset) = sum(len(s)) / sum(len(tokenize(s))), with lengths in
Unicode code points. Totals are aggregated before dividing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Protocol

from .codec import TokenSequence, encode_span
from .detector import DetectorConfig, Origin, Span, segment
from .modality import MODALITY_ORDER, Modality
from .vocab import VocabularySet


class CountingTokenizer(Protocol):
    name: str

    def count(self, text: str) -> dict[Modality, tuple[int, int]]:
        """Per-modality ``(chars, tokens)`` for one document."""


@dataclass
class DynamicTokenizer:
    """Segment-then-encode tokenizer backed by a VocabularySet.

    With ``wrap`` set, detection is skipped and every document is scored as
    the bare payload of one tagged span of that modality: its specials are
    counted as tokens, but no delimiter characters exist in the text.
    """

    vs: VocabularySet
    rules: DetectorConfig = field(default_factory=DetectorConfig)
    name: str = "dynamic"
    count_specials: bool = True
    wrap: Modality | None = None

    def __post_init__(self):
        self._special_ids = frozenset(self.vs.specials.values())

    def _spans(self, text: str) -> tuple[Span, ...]:
        if self.wrap is None:
            return segment(text, self.rules).spans
        return (Span(0, len(text), self.wrap, Origin.TAG),)

    def count(self, text: str) -> dict[Modality, tuple[int, int]]:
        totals: dict[Modality, list[int]] = {}
        for span in self._spans(text):
            ts = encode_span(text, span, self.vs, TokenSequence())
            n_tokens = len(ts.ids)
            if not self.count_specials:
                n_tokens -= sum(1 for i in ts.ids if i in self._special_ids)
            chars = span.outer_end - span.outer_start
            acc = totals.setdefault(span.modality, [0, 0])
            acc[0] += chars
            acc[1] += n_tokens
        return {m: (c, t) for m, (c, t) in totals.items()}


class CharIdentityTokenizer:
    """One token per code point, the CR = 1 reference."""

    name = "char-identity"

    def count(self, text: str) -> dict[Modality, tuple[int, int]]:
        return {Modality.TEXT: (len(text), len(text))}


@dataclass(frozen=True)
class CRReport:
    tokenizer_name: str
    total_chars: int
    total_tokens: int
    per_modality: dict[Modality, tuple[int, int]]
    dataset_fingerprint: str

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.total_chars, self.total_tokens)

    @property
    def cr(self) -> float:
        return self.total_chars / self.total_tokens

    def modality_cr(self, modality: Modality) -> float:
        chars, tokens = self.per_modality[modality]
        return chars / tokens

    def to_dict(self) -> dict:
        return {
            "tokenizer_name": self.tokenizer_name,
            "total_chars": self.total_chars,
            "total_tokens": self.total_tokens,
            "cr": self.cr,
            "per_modality": {
                m.value: {"chars": c, "tokens": t, "cr": c / t if t else None}
                for m, (c, t) in self.per_modality.items()
            },
            "dataset_fingerprint": self.dataset_fingerprint,
        }


def dataset_fingerprint(dataset: Iterable[str]) -> str:
    """Order-independent content hash of a multiset of documents."""
    digests = sorted(hashlib.sha256(s.encode("utf-8")).hexdigest() for s in dataset)
    return hashlib.sha256("\n".join(digests).encode("ascii")).hexdigest()


def measure(tokenizer: CountingTokenizer, dataset: list[str]) -> CRReport:
    if not dataset:
        raise ValueError("dataset is empty")
    per_modality: dict[Modality, list[int]] = {}
    total_chars = total_tokens = 0
    for index, doc in enumerate(dataset):
        if not doc:
            raise ValueError(f"document {index} is empty")
        counts = tokenizer.count(doc)
        doc_tokens = sum(t for _, t in counts.values())
        if doc_tokens == 0:
            raise ValueError(f"document {index} produced no tokens")
        for modality, (c, t) in counts.items():
            acc = per_modality.setdefault(modality, [0, 0])
            acc[0] += c
            acc[1] += t
        total_chars += sum(c for c, _ in counts.values())
        total_tokens += doc_tokens
    ordered = {m: tuple(per_modality[m]) for m in MODALITY_ORDER if m in per_modality}
    return CRReport(tokenizer.name, total_chars, total_tokens, ordered, dataset_fingerprint(dataset))


def compression_ratio(
    vs: VocabularySet,
    rules: DetectorConfig,
    dataset: list[str],
    name: str = "dynamic",
    count_specials: bool = True,
    wrap: Modality | None = None,
) -> CRReport:
    return measure(DynamicTokenizer(vs, rules, name, count_specials, wrap), dataset)


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[tuple[str, float], ...]
    # (a, b) -> cr_a / cr_b - 1, for every a ranked above b.
    improvements: dict[tuple[str, str], float]
    dataset_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "dataset_fingerprint": self.dataset_fingerprint,
            "rows": [{"tokenizer": n, "cr": cr} for n, cr in self.rows],
            "improvements": [
                {"tokenizer": a, "baseline": b, "relative_improvement": v}
                for (a, b), v in self.improvements.items()
            ],
        }

    def to_text(self) -> str:
        width = max(len("tokenizer"), *(len(n) for n, _ in self.rows))
        lines = [f"{'tokenizer':<{width}}  {'CR':>8}"]
        lines += [f"{n:<{width}}  {cr:>8.4f}" for n, cr in self.rows]
        lines.append("")
        lines += [f"{a} vs {b}: {v:+.1%}" for (a, b), v in self.improvements.items()]
        return "\n".join(lines) + "\n"


def compare(reports: list[CRReport]) -> ComparisonTable:
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    fingerprints = {r.dataset_fingerprint for r in reports}
    if len(fingerprints) != 1:
        raise ValueError("reports were measured on different datasets")
    ranked = sorted(reports, key=lambda r: -r.ratio)
    rows = tuple((r.tokenizer_name, r.cr) for r in ranked)
    improvements = {
        (a.tokenizer_name, b.tokenizer_name): float(a.ratio / b.ratio - 1)
        for a, b in combinations(ranked, 2)
    }
    return ComparisonTable(rows, improvements, fingerprints.pop())


def report_json(report: CRReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n"
