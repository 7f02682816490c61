"""Modality-aware dynamic tokenization and variable-length batch packing."""

__version__ = "0.1.0"

from .codec import TokenSequence, decode, encode, token_count
from .detector import DetectorConfig, MalformedTagError, Origin, SegmentedText, Span, segment
from .metrics import CRReport, compare, compression_ratio
from .modality import Modality
from .packer import CostModel, Document, PackingPlan, build_plan, pack, simulate_ranks, window_sort
from .smiles import validate_smiles
from .vocab import Vocabulary, VocabularySet, assemble, default_vocabulary_set, train_bpe

__all__ = [
    "CRReport",
    "CostModel",
    "DetectorConfig",
    "Document",
    "MalformedTagError",
    "Modality",
    "Origin",
    "PackingPlan",
    "SegmentedText",
    "Span",
    "TokenSequence",
    "Vocabulary",
    "VocabularySet",
    "assemble",
    "build_plan",
    "compare",
    "compression_ratio",
    "decode",
    "default_vocabulary_set",
    "encode",
    "pack",
    "segment",
    "simulate_ranks",
    "token_count",
    "train_bpe",
    "validate_smiles",
    "window_sort",
]
