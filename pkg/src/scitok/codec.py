"""Encode segmented text into global token ids and decode them back."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .detector import DetectorConfig, Origin, SegmentedText, Span, segment
from .modality import Modality
from .vocab import SPECIAL_TEXT, SPECIALS, TAG_SPECIALS, Vocabulary, VocabularySet, to_symbols


class InvalidTokenError(ValueError):
    def __init__(self, position: int, token_id: int):
        super().__init__(f"token id {token_id} at position {position} is outside every partition")
        self.position = position
        self.token_id = token_id

    def __reduce__(self):
        return type(self), (self.position, self.token_id)


@dataclass
class TokenSequence:
    ids: list[int] = field(default_factory=list)
    # Character range per token; specials get an empty range.
    alignments: list[tuple[int, int]] = field(default_factory=list)
    # Characters replaced by a modality's unknown token during this call.
    unknown: int = 0

    def __len__(self) -> int:
        return len(self.ids)


def apply_merges(symbols: list, ranks: dict[tuple[str, str], int]) -> list:
    """Apply BPE merges in rank order, each one left to right over the list.

    ``None`` entries stand for unknown symbols and never merge.
    """
    n = len(symbols)
    if n < 2 or not ranks:
        return list(symbols)
    sym = list(symbols)
    nxt = list(range(1, n + 1))
    nxt[-1] = -1
    prv = list(range(-1, n - 1))
    heap = []
    for i in range(n - 1):
        r = ranks.get((sym[i], sym[i + 1]))
        if r is not None:
            heap.append((r, i))
    heapq.heapify(heap)
    while heap:
        rank, i = heapq.heappop(heap)
        j = nxt[i] if sym[i] is not None else -1
        if j == -1 or ranks.get((sym[i], sym[j])) != rank:
            continue
        sym[i] = sym[i] + sym[j]
        sym[j] = None
        k = nxt[j]
        nxt[i] = k
        nxt[j] = -1
        if k != -1:
            prv[k] = i
        # A pair formed by this merge only counts if its merge comes later;
        # sequential application has already passed any earlier rank.
        h = prv[i]
        if h != -1:
            r = ranks.get((sym[h], sym[i]))
            if r is not None and r > rank:
                heapq.heappush(heap, (r, h))
        if k != -1:
            r = ranks.get((sym[i], sym[k]))
            if r is not None and r > rank:
                heapq.heappush(heap, (r, i))
    out = []
    i = 0
    while i != -1:
        out.append(sym[i])
        i = nxt[i]
    return out


def _encode_text(chunk: str, base: int, vocab: Vocabulary, offset: int, ts: TokenSequence) -> None:
    raw = to_symbols(chunk, Modality.TEXT)
    # Byte index -> index of the character whose last byte sits there.
    char_end = {}
    pos = 0
    for ci, ch in enumerate(chunk):
        pos += len(ch.encode("utf-8"))
        char_end[pos - 1] = ci
    cursor = 0  # chars already covered
    byte_pos = 0
    for tok in apply_merges(list(raw), vocab.ranks):
        byte_pos += len(tok)
        last = char_end.get(byte_pos - 1)
        end = cursor if last is None else last + 1
        ts.ids.append(offset + vocab.tokens[tok])
        ts.alignments.append((base + cursor, base + end))
        cursor = end


def _encode_scientific(chunk: str, base: int, vocab: Vocabulary, offset: int, ts: TokenSequence) -> None:
    symbols = [ch if ch in vocab.tokens else None for ch in chunk]
    pos = base
    for tok in apply_merges(symbols, vocab.ranks):
        if tok is None:
            if vocab.unk_id is None:
                raise ValueError(f"{vocab.modality.value} vocabulary has no unknown token")
            ts.ids.append(offset + vocab.unk_id)
            ts.alignments.append((pos, pos + 1))
            ts.unknown += 1
            pos += 1
        else:
            ts.ids.append(offset + vocab.tokens[tok])
            ts.alignments.append((pos, pos + len(tok)))
            pos += len(tok)


def encode_span(text: str, span: Span, vs: VocabularySet, ts: TokenSequence | None = None) -> TokenSequence:
    """Append the tokens of one span to ``ts`` (a new sequence if omitted)."""
    if ts is None:
        ts = TokenSequence()
    tagged = span.origin is Origin.TAG and span.modality in TAG_SPECIALS
    if tagged:
        open_name, close_name = TAG_SPECIALS[span.modality]
        ts.ids.append(vs.specials[open_name])
        ts.alignments.append((span.outer_start, span.outer_start))
    vocab = vs.vocabularies[span.modality]
    offset = vs.offset(span.modality)
    chunk = text[span.start : span.end]
    if span.modality is Modality.TEXT:
        _encode_text(chunk, span.start, vocab, offset, ts)
    else:
        _encode_scientific(chunk, span.start, vocab, offset, ts)
    if tagged:
        ts.ids.append(vs.specials[close_name])
        ts.alignments.append((span.end, span.end))
    return ts


def encode(seg: SegmentedText, vs: VocabularySet) -> TokenSequence:
    ts = TokenSequence()
    for span in seg.spans:
        encode_span(seg.text, span, vs, ts)
    return ts


def decode(ts: TokenSequence | list[int], vs: VocabularySet) -> str:
    ids = ts.ids if isinstance(ts, TokenSequence) else ts
    out: list[str] = []
    pending: list[str] = []  # TEXT byte tokens awaiting UTF-8 decoding

    def flush():
        if pending:
            out.append("".join(pending).encode("latin-1").decode("utf-8", errors="replace"))
            pending.clear()

    for position, token_id in enumerate(ids):
        try:
            name, local = vs.locate(token_id)
        except KeyError:
            raise InvalidTokenError(position, token_id) from None
        if name == Modality.TEXT.value:
            pending.append(vs.vocabularies[Modality.TEXT].token(local))
            continue
        flush()
        if name == SPECIALS:
            out.append(SPECIAL_TEXT[vs.special_name(token_id)])
        else:
            tok = vs.vocabularies[Modality(name)].token(local)
            out.append("�" if tok is None else tok)
    flush()
    return "".join(out)


def token_count(text: str, vs: VocabularySet, rules: DetectorConfig = DetectorConfig()) -> int:
    return len(encode(segment(text, rules), vs).ids)
