import random
import sys

import pytest

from corpus import NUCLEOTIDES, PROSE, PROTEINS, VALID_SMILES, general_prose_corpus, load_moses
from scitok.modality import CANONICAL_ALPHABETS, Modality
from scitok.vocab import assemble, train_bpe


@pytest.fixture(scope="session")
def moses_train():
    return load_moses("train")


@pytest.fixture(scope="session")
def moses_test():
    return load_moses("test")


@pytest.fixture(scope="session")
def prose_corpus():
    return general_prose_corpus()


@pytest.fixture(scope="session")
def vocab_set(moses_train, prose_corpus):
    """Small trained set: every modality has real merges and a full alphabet."""
    rng = random.Random(7)
    nucleotides = NUCLEOTIDES + ["".join(rng.choice("ACGT") for _ in range(60)) for _ in range(200)]
    vocabs = [
        train_bpe(prose_corpus[:400] + PROSE, Modality.TEXT, 256 + 300),
        train_bpe(
            moses_train[:3000] + VALID_SMILES, Modality.SMILES, 200,
            base_alphabet=CANONICAL_ALPHABETS[Modality.SMILES],
        ),
        train_bpe(
            nucleotides, Modality.NUCLEOTIDE, 40,
            base_alphabet=CANONICAL_ALPHABETS[Modality.NUCLEOTIDE],
        ),
        train_bpe(
            PROTEINS * 3, Modality.PROTEIN, 60,
            base_alphabet=CANONICAL_ALPHABETS[Modality.PROTEIN],
        ),
    ]
    return assemble(vocabs)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
