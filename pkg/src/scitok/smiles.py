"""Surface-grammar SMILES validation.

This checks syntax only: atoms, bracket atoms, bonds, branches, ring
closures and dot-disconnections. Valence and aromaticity are not checked.
"""

import re

from .modality import ELEMENTS

ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I", "b", "c", "n", "o", "s", "p", "*")
BONDS = frozenset("-=#$:/\\")

_ELEMENTS = frozenset(ELEMENTS)
_AROMATIC_BRACKET = frozenset(("b", "c", "n", "o", "p", "s", "se", "as", "te"))

_BRACKET = re.compile(
    r"""
    (?P<isotope>\d+)?
    (?P<symbol>[A-Z][a-z]?|se|as|te|[bcnops]|\*)
    (?P<chiral>@(?:TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2}|@)?)?
    (?P<hcount>H\d?)?
    (?P<charge>\+\+|--|[+-]\d{0,2})?
    (?P<klass>:\d+)?
    """,
    re.VERBOSE,
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.open_rings: dict[str, int] = {}

    def peek(self, n: int = 1) -> str:
        return self.text[self.pos : self.pos + n]

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def atom(self) -> bool:
        if self.peek() == "[":
            end = self.text.find("]", self.pos + 1)
            if end < 0:
                return False
            body = self.text[self.pos + 1 : end]
            m = _BRACKET.fullmatch(body)
            if m is None:
                return False
            symbol = m.group("symbol")
            if symbol not in _ELEMENTS and symbol not in _AROMATIC_BRACKET and symbol != "*":
                return False
            self.pos = end + 1
            return True
        for sym in ORGANIC:
            if self.text.startswith(sym, self.pos):
                self.pos += len(sym)
                return True
        return False

    def ring_label(self) -> str | None:
        ch = self.peek()
        if ch.isdigit():
            self.pos += 1
            return ch
        if ch == "%":
            label = self.peek(3)
            if len(label) == 3 and label[1:].isdigit():
                self.pos += 3
                return label
        return None

    def chain(self) -> bool:
        if not self.atom():
            return False
        while not self.at_end():
            ch = self.peek()
            if ch == ")":
                return True
            if ch == "(":
                self.pos += 1
                if self.peek() in BONDS or self.peek() == ".":
                    self.pos += 1
                if not self.chain() or self.peek() != ")":
                    return False
                self.pos += 1
                continue
            if ch == ".":
                self.pos += 1
                if not self.atom():
                    return False
                continue
            start = self.pos
            if ch in BONDS:
                self.pos += 1
            label = self.ring_label()
            if label is not None:
                # Ring labels pair up open/close and may be reused afterwards.
                if label in self.open_rings:
                    del self.open_rings[label]
                else:
                    self.open_rings[label] = start
                continue
            if not self.atom():
                return False
        return True


def validate_smiles(candidate: str) -> bool:
    """Return True if ``candidate`` parses as a SMILES string.

    >>> validate_smiles("C1CCCCC1")
    True
    >>> validate_smiles("C1CC")
    False
    """
    if not candidate:
        return False
    parser = _Parser(candidate)
    if not parser.chain():
        return False
    return parser.at_end() and not parser.open_rings
