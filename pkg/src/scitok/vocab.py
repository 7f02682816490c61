"""Per-modality BPE vocabularies and the global ID partition map."""

from __future__ import annotations

import heapq
import json
from bisect import bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .modality import CANONICAL_ALPHABETS, MODALITY_ORDER, Modality

FORMAT_VERSION = 1

# TEXT symbols are single bytes, carried around as latin-1 characters so that
# every token is a str regardless of modality.
BYTE_ALPHABET = tuple(chr(i) for i in range(256))

SPECIAL_NAMES = (
    "<pad>",
    "<unk>",
    "<SMILES>",
    "</SMILES>",
    "<FASTA:NUCLEOTIDE>",
    "</FASTA:NUCLEOTIDE>",
    "<FASTA:PROTEIN>",
    "</FASTA:PROTEIN>",
)

TAG_SPECIALS = {
    Modality.SMILES: ("<SMILES>", "</SMILES>"),
    Modality.NUCLEOTIDE: ("<FASTA:NUCLEOTIDE>", "</FASTA:NUCLEOTIDE>"),
    Modality.PROTEIN: ("<FASTA:PROTEIN>", "</FASTA:PROTEIN>"),
}

# Literal text each special re-materialises as on decode.
SPECIAL_TEXT = {
    "<pad>": "",
    "<unk>": "�",
    "<SMILES>": "<SMILES>",
    "</SMILES>": "</SMILES>",
    "<FASTA:NUCLEOTIDE>": "<FASTA>",
    "</FASTA:NUCLEOTIDE>": "</FASTA>",
    "<FASTA:PROTEIN>": "<FASTA>",
    "</FASTA:PROTEIN>": "</FASTA>",
}

SPECIALS = "specials"


def to_symbols(text: str, modality: Modality) -> str:
    """Initial-alphabet symbol string: UTF-8 bytes for TEXT, characters otherwise."""
    if modality is Modality.TEXT:
        return text.encode("utf-8").decode("latin-1")
    return text


@dataclass(frozen=True)
class Vocabulary:
    """Token table for one modality.

    Local ids run over the alphabet, then each distinct merge output in
    training order, then (scientific modalities only) one unknown token.
    """

    modality: Modality
    alphabet: tuple[str, ...]
    merges: tuple[tuple[str, str], ...] = ()
    has_unk: bool = False
    tokens: dict[str, int] = field(init=False, repr=False, compare=False)
    ranks: dict[tuple[str, str], int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens: dict[str, int] = {}
        for sym in self.alphabet:
            if sym in tokens:
                raise ValueError(f"duplicate alphabet symbol {sym!r}")
            tokens[sym] = len(tokens)
        ranks = {}
        for rank, (a, b) in enumerate(self.merges):
            if a not in tokens or b not in tokens:
                raise ValueError(f"merge {rank} uses unknown token ({a!r}, {b!r})")
            tokens.setdefault(a + b, len(tokens))
            ranks.setdefault((a, b), rank)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "ranks", ranks)

    @property
    def size(self) -> int:
        return len(self.tokens) + self.has_unk

    @property
    def unk_id(self) -> int | None:
        return len(self.tokens) if self.has_unk else None

    def token(self, local_id: int) -> str | None:
        """Token string for ``local_id``; None for the unknown token."""
        if not hasattr(self, "_inverse"):
            object.__setattr__(self, "_inverse", list(self.tokens))
        if local_id == self.unk_id:
            return None
        return self._inverse[local_id]

    def to_dict(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "merges": [list(m) for m in self.merges],
            "unk": self.has_unk,
        }


def default_vocabulary(modality: Modality) -> Vocabulary:
    """Merge-free vocabulary: bytes for TEXT, the canonical alphabet otherwise."""
    if modality is Modality.TEXT:
        return Vocabulary(modality, BYTE_ALPHABET)
    return Vocabulary(modality, CANONICAL_ALPHABETS[modality], has_unk=True)


def train_bpe(
    corpus: Sequence[str],
    modality: Modality,
    target_size: int,
    seed: int = 0,
    base_alphabet: Iterable[str] = (),
) -> Vocabulary:
    """Greedy pair-merge BPE.

    Repeatedly merges the most frequent adjacent pair (ties go to the
    lexicographically smallest pair) until the vocabulary holds
    ``target_size`` tokens or no pair occurs at least twice. Every corpus
    string is one unbroken symbol sequence. ``target_size`` counts alphabet
    and merged tokens; the unknown token of scientific modalities is extra.

    ``seed`` is accepted for interface symmetry; training is deterministic.
    """
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    modality = Modality(modality)
    words = Counter(to_symbols(s, modality) for s in corpus)
    if modality is Modality.TEXT:
        alphabet = BYTE_ALPHABET
    else:
        alphabet = tuple(sorted(set().union(*words, base_alphabet)))
    if target_size < len(alphabet):
        raise ValueError(f"target_size {target_size} is below alphabet size {len(alphabet)}")

    # One doubly linked list over every symbol of every distinct word.
    sym: list[str | None] = []
    nxt: list[int] = []
    prv: list[int] = []
    weight: list[int] = []
    for word, count in words.items():
        base = len(sym)
        n = len(word)
        sym.extend(word)
        prv.extend(range(base - 1, base + n - 1))
        nxt.extend(range(base + 1, base + n + 1))
        if n:
            prv[base] = -1
            nxt[-1] = -1
        weight.extend([count] * n)

    counts: dict[tuple[str, str], int] = defaultdict(int)
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for i, j in enumerate(nxt):
        if j != -1:
            pair = (sym[i], sym[j])
            counts[pair] += weight[i]
            where[pair].add(i)
    heap = [(-c, p) for p, c in counts.items()]
    heapq.heapify(heap)

    tokens = dict.fromkeys(alphabet)
    merges: list[tuple[str, str]] = []
    merged: set[tuple[str, str]] = set()
    while len(tokens) < target_size and heap:
        neg, pair = heapq.heappop(heap)
        if counts.get(pair, 0) != -neg or pair in merged:
            # Stale entry, or a pair revived by a duplicate merge output;
            # each pair gets exactly one rank.
            continue
        if -neg < 2:
            break
        merges.append(pair)
        merged.add(pair)
        a, b = pair
        new = a + b
        tokens.setdefault(new)
        touched = set()

        def shift(p, pos, delta):
            counts[p] += delta
            if delta < 0:
                where[p].discard(pos)
            else:
                where[p].add(pos)
            touched.add(p)

        for i in sorted(where.pop(pair)):
            j = nxt[i]
            if sym[i] != a or j == -1 or sym[j] != b:
                continue
            w = weight[i]
            h, k = prv[i], nxt[j]
            if h != -1:
                shift((sym[h], a), h, -w)
            if k != -1:
                shift((b, sym[k]), j, -w)
            sym[i], sym[j] = new, None
            nxt[i] = k
            if k != -1:
                prv[k] = i
            if h != -1:
                shift((sym[h], new), h, w)
            if k != -1:
                shift((new, sym[k]), i, w)
        del counts[pair]
        where.pop(pair, None)
        touched.discard(pair)
        for p in touched:
            c = counts[p]
            if c > 0:
                heapq.heappush(heap, (-c, p))
            else:
                del counts[p]
                where.pop(p, None)

    return Vocabulary(
        modality, alphabet, tuple(merges), has_unk=modality is not Modality.TEXT
    )


@dataclass(frozen=True)
class VocabularySet:
    """All modality vocabularies plus specials, laid out in disjoint id ranges.

    Partition order is fixed: specials, TEXT, SMILES, NUCLEOTIDE, PROTEIN.
    """

    vocabularies: dict[Modality, Vocabulary]
    partitions: dict[str, tuple[int, int]]
    specials: dict[str, int]

    def __post_init__(self):
        names = [n for n, _ in sorted(self.partitions.items(), key=lambda kv: kv[1][0])]
        object.__setattr__(self, "_starts", [self.partitions[n][0] for n in names])
        object.__setattr__(self, "_names", names)
        object.__setattr__(self, "_special_names", {i: n for n, i in self.specials.items()})

    @property
    def total_size(self) -> int:
        return sum(size for _, size in self.partitions.values())

    def offset(self, modality: Modality) -> int:
        return self.partitions[Modality(modality).value][0]

    def locate(self, global_id: int) -> tuple[str, int]:
        """Return ``(partition name, local id)``; raise KeyError if unassigned."""
        if global_id < 0:
            raise KeyError(global_id)
        idx = bisect_right(self._starts, global_id) - 1
        while idx >= 0:
            name = self._names[idx]
            start, size = self.partitions[name]
            if global_id < start + size:
                return name, global_id - start
            if size:
                break
            idx -= 1
        raise KeyError(global_id)

    def special_name(self, global_id: int) -> str:
        return self._special_names[global_id]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "partitions": {n: list(r) for n, r in self.partitions.items()},
            "specials": dict(self.specials),
            "modalities": {m.value: v.to_dict() for m, v in self.vocabularies.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: dict) -> VocabularySet:
        if data.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported vocab format_version {data.get('format_version')!r}")
        vocabs = []
        for name, body in data["modalities"].items():
            vocabs.append(
                Vocabulary(
                    Modality(name),
                    tuple(body["alphabet"]),
                    tuple(tuple(m) for m in body["merges"]),
                    has_unk=bool(body.get("unk", False)),
                )
            )
        vs = assemble(vocabs)
        stored = {n: tuple(r) for n, r in data["partitions"].items()}
        if stored != vs.partitions or data["specials"] != vs.specials:
            raise ValueError("vocab file partitions disagree with its vocabularies")
        return vs

    @classmethod
    def load(cls, path: str | Path) -> VocabularySet:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def assemble(vocabularies: Iterable[Vocabulary]) -> VocabularySet:
    by_modality: dict[Modality, Vocabulary] = {}
    for vocab in vocabularies:
        if vocab.modality in by_modality:
            raise ValueError(f"duplicate vocabulary for {vocab.modality.value}")
        by_modality[vocab.modality] = vocab
    missing = [m.value for m in MODALITY_ORDER if m not in by_modality]
    if missing:
        raise ValueError(f"missing vocabularies for {', '.join(missing)}")

    specials = {name: i for i, name in enumerate(SPECIAL_NAMES)}
    partitions = {SPECIALS: (0, len(specials))}
    offset = len(specials)
    ordered = {}
    for modality in MODALITY_ORDER:
        vocab = by_modality[modality]
        partitions[modality.value] = (offset, vocab.size)
        ordered[modality] = vocab
        offset += vocab.size
    return VocabularySet(ordered, partitions, specials)


def default_vocabulary_set(**overrides: Vocabulary) -> VocabularySet:
    """Merge-free set; pass e.g. ``SMILES=vocab`` to swap in trained ones."""
    vocabs = {m: default_vocabulary(m) for m in MODALITY_ORDER}
    for name, vocab in overrides.items():
        vocabs[Modality(name)] = vocab
    return assemble(vocabs.values())
