"""Modalities understood by the tokenizer and their character alphabets."""

from enum import Enum


class Modality(str, Enum):
    TEXT = "TEXT"
    SMILES = "SMILES"
    NUCLEOTIDE = "NUCLEOTIDE"
    PROTEIN = "PROTEIN"


# Fixed order used for ID partitions and vocab files.
MODALITY_ORDER = (Modality.TEXT, Modality.SMILES, Modality.NUCLEOTIDE, Modality.PROTEIN)
SCIENTIFIC = (Modality.SMILES, Modality.NUCLEOTIDE, Modality.PROTEIN)

ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce "
    "Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn "
    "Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl "
    "Mc Lv Ts Og"
).split()

NUCLEOTIDE_LETTERS = frozenset("ACGTUN")
AMINO_ACID_LETTERS = frozenset("ACDEFGHIKLMNPQRSTVWY")

SMILES_CHARS = frozenset("".join(ELEMENTS) + "bcnops*" + "0123456789" + "()[]=#$:/\\-+@%.")
NUCLEOTIDE_CHARS = NUCLEOTIDE_LETTERS | {"-"}
PROTEIN_CHARS = AMINO_ACID_LETTERS | {"X", "-"}

CANONICAL_ALPHABETS = {
    Modality.SMILES: tuple(sorted(SMILES_CHARS)),
    Modality.NUCLEOTIDE: tuple(sorted(NUCLEOTIDE_CHARS)),
    Modality.PROTEIN: tuple(sorted(PROTEIN_CHARS)),
}


def classify_fasta(payload: str) -> Modality | None:
    """Sub-classify a FASTA payload; ``None`` when it fits neither alphabet."""
    chars = set(payload)
    if chars <= NUCLEOTIDE_CHARS:
        return Modality.NUCLEOTIDE
    if chars <= PROTEIN_CHARS and chars - NUCLEOTIDE_CHARS:
        return Modality.PROTEIN
    return None
