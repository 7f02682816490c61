import json
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import PROSE, VALID_SMILES, mixed_document
from scitok.codec import encode
from scitok.detector import segment
from scitok.modality import MODALITY_ORDER, Modality
from scitok.vocab import (
    BYTE_ALPHABET,
    SPECIAL_NAMES,
    Vocabulary,
    VocabularySet,
    assemble,
    default_vocabulary,
    train_bpe,
)


def brute_force_bpe(corpus, target_size):
    """Recount every pair from scratch after each merge."""
    words = [list(w) for w in corpus]
    alphabet = sorted({ch for w in corpus for ch in w})
    tokens = set(alphabet)
    merges = []
    while len(tokens) < target_size:
        counts = Counter()
        for w in words:
            for pair in zip(w, w[1:]):
                counts[pair] += 1
        candidates = [(c, p) for p, c in counts.items() if p not in merges and c >= 2]
        if not candidates:
            break
        best = max(c for c, _ in candidates)
        pair = min(p for c, p in candidates if c == best)
        merges.append(pair)
        tokens.add(pair[0] + pair[1])
        for idx, w in enumerate(words):
            out, i = [], 0
            while i < len(w):
                if i + 1 < len(w) and (w[i], w[i + 1]) == pair:
                    out.append(w[i] + w[i + 1])
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            words[idx] = out
    return merges


def sized_vocab(modality, n):
    return Vocabulary(modality, tuple(f"{modality.value[0]}{i}" for i in range(n)))


class TestTrainBpe:
    def test_single_merge(self):
        vocab = train_bpe(["CCCC", "CCCC"], Modality.SMILES, target_size=2)
        assert vocab.merges == (("C", "C"),)

    def test_no_budget(self):
        vocab = train_bpe(["AB"], Modality.SMILES, target_size=2)
        assert vocab.merges == ()
        assert vocab.alphabet == ("A", "B")

    def test_lexicographic_tie_break(self):
        vocab = train_bpe(["CCO", "CCO", "CCN"], Modality.SMILES, target_size=5)
        assert vocab.merges == (("C", "C"), ("CC", "O"))

    def test_frequency_floor(self):
        vocab = train_bpe(["ABCD"], Modality.SMILES, target_size=10)
        assert vocab.merges == ()

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            train_bpe([], Modality.SMILES, 10)

    def test_target_below_alphabet(self):
        with pytest.raises(ValueError):
            train_bpe(["ABC"], Modality.SMILES, 2)
        with pytest.raises(ValueError):
            train_bpe(["abc"], Modality.TEXT, 255)

    def test_text_is_byte_level(self):
        vocab = train_bpe(["héllo héllo"], Modality.TEXT, 260)
        assert vocab.alphabet == BYTE_ALPHABET
        assert not vocab.has_unk
        # "é" is two bytes; ('h', 'Ã') ties with ('Ã', '©') and sorts first.
        assert vocab.merges[:2] == (("h", "Ã"), ("hÃ", "©"))
        assert "hé".encode().decode("latin-1") in vocab.tokens

    def test_scientific_vocab_has_unknown_token(self):
        vocab = train_bpe(["CCO"], Modality.SMILES, 3)
        assert vocab.merges == ()
        assert vocab.has_unk and vocab.unk_id == 2 and vocab.size == 3
        assert vocab.token(vocab.unk_id) is None

    def test_base_alphabet(self):
        vocab = train_bpe(["CC"], Modality.NUCLEOTIDE, 7, base_alphabet="ACGTUN-")
        assert set(vocab.alphabet) == set("ACGTUN-")

    def test_target_size_reached(self):
        vocab = train_bpe(VALID_SMILES * 3, Modality.SMILES, 60)
        assert len(vocab.tokens) == 60

    def test_merge_outputs_are_tokens(self):
        vocab = train_bpe(VALID_SMILES * 2, Modality.SMILES, 80)
        for a, b in vocab.merges:
            assert a + b in vocab.tokens
        assert sorted(vocab.tokens.values()) == list(range(len(vocab.tokens)))

    def test_deterministic(self):
        corpus = VALID_SMILES * 2 + ["".join(random.Random(1).choice("CNO()=1") for _ in range(40))]
        first = train_bpe(corpus, Modality.SMILES, 90)
        for _ in range(2):
            assert train_bpe(corpus, Modality.SMILES, 90).merges == first.merges

    def test_prefix_property(self, moses_train):
        corpus = moses_train[:500]
        small = train_bpe(corpus, Modality.SMILES, 60)
        large = train_bpe(corpus, Modality.SMILES, 120)
        assert large.merges[: len(small.merges)] == small.merges
        assert len(large.merges) > len(small.merges)

    @settings(max_examples=150, deadline=None)
    @given(
        st.lists(st.text(alphabet="ABCa", min_size=0, max_size=24), min_size=1, max_size=8),
        st.integers(0, 30),
    )
    def test_matches_brute_force(self, corpus, extra):
        alphabet = {ch for w in corpus for ch in w}
        target = len(alphabet) + extra
        vocab = train_bpe(corpus, Modality.SMILES, target)
        assert list(vocab.merges) == brute_force_bpe(corpus, target)


class TestAssemble:
    def test_cumulative_offsets(self):
        vs = assemble(
            [
                sized_vocab(Modality.TEXT, 100),
                sized_vocab(Modality.SMILES, 50),
                sized_vocab(Modality.NUCLEOTIDE, 10),
                sized_vocab(Modality.PROTEIN, 30),
            ]
        )
        assert len(vs.specials) == 8
        assert sorted(vs.specials.values()) == list(range(8))
        assert [vs.offset(m) for m in MODALITY_ORDER] == [8, 108, 158, 168]
        assert vs.total_size == 198

    def test_single_token(self):
        vs = assemble(
            [sized_vocab(Modality.TEXT, 1)] + [sized_vocab(m, 0) for m in MODALITY_ORDER[1:]]
        )
        n = len(SPECIAL_NAMES)
        assert vs.partitions["TEXT"] == (n, 1)
        assert vs.locate(n) == ("TEXT", 0)
        with pytest.raises(KeyError):
            vs.locate(n + 1)

    def test_duplicate_modality(self):
        vocabs = [default_vocabulary(m) for m in MODALITY_ORDER] + [default_vocabulary(Modality.SMILES)]
        with pytest.raises(ValueError, match="duplicate"):
            assemble(vocabs)

    def test_missing_modality(self):
        with pytest.raises(ValueError, match="missing"):
            assemble([default_vocabulary(Modality.TEXT)])

    @given(st.lists(st.integers(0, 40), min_size=4, max_size=4))
    def test_partitions_disjoint(self, sizes):
        vs = assemble([sized_vocab(m, n) for m, n in zip(MODALITY_ORDER, sizes)])
        owners = Counter()
        for start, size in vs.partitions.values():
            for gid in range(start, start + size):
                owners[gid] += 1
        assert set(owners.values()) <= {1}
        assert sorted(owners) == list(range(vs.total_size))
        for gid in range(vs.total_size):
            name, local = vs.locate(gid)
            assert vs.partitions[name][0] + local == gid


class TestSerialization:
    def test_round_trip(self, vocab_set, tmp_path):
        path = tmp_path / "vocab.json"
        vocab_set.save(path)
        loaded = VocabularySet.load(path)
        assert loaded.partitions == vocab_set.partitions
        rng = random.Random(3)
        docs = [mixed_document(rng) for _ in range(50)] + PROSE
        for doc in docs:
            seg = segment(doc)
            assert encode(seg, loaded).ids == encode(seg, vocab_set).ids

    def test_canonical_layout(self, vocab_set, tmp_path):
        text = vocab_set.to_json()
        data = json.loads(text)
        assert data["format_version"] == 1
        assert set(data) == {"format_version", "partitions", "specials", "modalities"}
        assert list(data["modalities"]) == sorted(data["modalities"])
        smiles = data["modalities"]["SMILES"]
        assert smiles["merges"][0] == list(vocab_set.vocabularies[Modality.SMILES].merges[0])
        assert VocabularySet.from_dict(data).to_json() == text

    def test_rejects_tampered_partitions(self, vocab_set):
        data = vocab_set.to_dict()
        data["partitions"]["TEXT"] = [8, 1]
        with pytest.raises(ValueError):
            VocabularySet.from_dict(data)
