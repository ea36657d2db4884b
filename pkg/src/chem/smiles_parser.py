# src/chem/smiles_parser.py
"""
SMILES → MolGraph.

Covers the organic subset, aromatic lowercase atoms, bracket atoms
(isotope, chirality, H count, charge, class), branches, ring closures
(including %nn), the bond symbols - = # : / \\ and disconnected parts.
Stereo marks are read and dropped; aromaticity is taken as written.
"""

import logging
import re
from typing import Dict, List, Optional, Tuple

from core.errors import (
    UnknownTokenError,
    UnmatchedParenthesisError,
    UnmatchedRingClosureError,
    ValenceOverflowError,
)

from .molecule import AROMATIC_ORGANIC, DEFAULT_VALENCES, Atom, MolGraph

logger = logging.getLogger(__name__)

ELEMENTS = frozenset("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn
Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce
Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn
Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr
""".split())
AROMATIC_BRACKET = frozenset(("b", "c", "n", "o", "p", "s", "se", "as", "te"))

_BRACKET = re.compile(
    r"^(?P<isotope>\d+)?"
    r"(?P<symbol>\*|[A-Z][a-z]?|se|as|te|[bcnops])"
    r"(?P<chiral>@(?:@|TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?)?"
    r"(?P<hcount>H\d?)?"
    r"(?P<charge>\+\+?|--?|[+-]\d{1,2})?"
    r"(?::(?P<cls>\d+))?$"
)
_BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic", "/": "single", "\\": "single"}


def _parse_charge(text: Optional[str]) -> int:
    if not text:
        return 0
    sign = 1 if text[0] == "+" else -1
    if len(text) == 1:
        return sign
    if text[1] in "+-":
        return 2 * sign
    return sign * int(text[1:])


class _SmilesReader:
    def __init__(self, smiles: str):
        self.s = smiles
        self.graph = MolGraph(smiles=smiles)
        self.prev: Optional[int] = None
        self.pending: Optional[Tuple[str, int]] = None
        self.branches: List[Tuple[int, int]] = []
        self.rings: Dict[int, Tuple[int, Optional[str], int]] = {}

    # --- helpers ---
    def _default_order(self, a: int, b: int) -> str:
        atoms = self.graph.atoms
        return "aromatic" if atoms[a].aromatic and atoms[b].aromatic else "single"

    def _take_pending(self) -> Optional[str]:
        symbol = self.pending[0] if self.pending else None
        self.pending = None
        return symbol

    def _add_atom(self, atom: Atom) -> None:
        idx = self.graph.add_atom(atom)
        if self.prev is not None:
            symbol = self._take_pending()
            order = _BOND_SYMBOLS[symbol] if symbol else self._default_order(self.prev, idx)
            self.graph.add_bond(self.prev, idx, order)
        elif self.pending is not None:
            raise UnknownTokenError(self.s, self.pending[1], "bond with no preceding atom")
        self.prev = idx

    def _ring_closure(self, number: int, offset: int) -> None:
        if self.prev is None:
            raise UnmatchedRingClosureError(self.s, offset, f"ring bond {number} has no atom")
        symbol = self._take_pending()
        if number in self.rings:
            other, open_symbol, _ = self.rings.pop(number)
            if other == self.prev or self.graph.has_bond(other, self.prev):
                raise UnmatchedRingClosureError(self.s, offset, f"ring bond {number} duplicates an existing bond")
            chosen = symbol or open_symbol
            order = _BOND_SYMBOLS[chosen] if chosen else self._default_order(other, self.prev)
            self.graph.add_bond(other, self.prev, order)
        else:
            self.rings[number] = (self.prev, symbol, offset)

    def _bracket(self, start: int) -> int:
        end = self.s.find("]", start)
        if end < 0:
            raise UnknownTokenError(self.s, start, "unterminated bracket atom")
        body = self.s[start + 1:end]
        match = _BRACKET.match(body)
        if not match:
            raise UnknownTokenError(self.s, start, f"bad bracket atom [{body}]")
        symbol = match.group("symbol")
        aromatic = symbol[0].islower()
        if aromatic:
            if symbol not in AROMATIC_BRACKET:
                raise UnknownTokenError(self.s, start, f"[{body}] is not an aromatic element")
            symbol = symbol.capitalize()
        elif symbol != "*" and symbol not in ELEMENTS:
            raise UnknownTokenError(self.s, start, f"unknown element {symbol!r}")
        hcount = match.group("hcount")
        hydrogens = 0 if not hcount else (int(hcount[1:]) if len(hcount) > 1 else 1)
        self._add_atom(Atom(
            symbol=symbol,
            aromatic=aromatic,
            charge=_parse_charge(match.group("charge")),
            hydrogens=hydrogens,
            bracket=True,
            isotope=int(match.group("isotope")) if match.group("isotope") else None,
            atom_class=int(match.group("cls")) if match.group("cls") else None,
            offset=start,
        ))
        return end + 1

    # --- main loop ---
    def read(self) -> MolGraph:
        s, i, n = self.s, 0, len(self.s)
        if not s:
            raise UnknownTokenError(s, 0, "empty SMILES")
        while i < n:
            ch = s[i]
            if ch == "(":
                if self.prev is None:
                    raise UnmatchedParenthesisError(s, i, "branch opened before any atom")
                self.branches.append((self.prev, i))
                i += 1
            elif ch == ")":
                if not self.branches:
                    raise UnmatchedParenthesisError(s, i, "')' without '('")
                if self.pending is not None:
                    raise UnknownTokenError(s, self.pending[1], "bond symbol before ')'")
                self.prev = self.branches.pop()[0]
                i += 1
            elif ch in _BOND_SYMBOLS:
                if self.pending is not None:
                    raise UnknownTokenError(s, i, "two consecutive bond symbols")
                self.pending = (ch, i)
                i += 1
            elif ch == ".":
                if self.pending is not None:
                    raise UnknownTokenError(s, self.pending[1], "bond symbol before '.'")
                self.prev = None
                i += 1
            elif ch.isdigit():
                self._ring_closure(int(ch), i)
                i += 1
            elif ch == "%":
                digits = s[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise UnknownTokenError(s, i, "'%' must be followed by two digits")
                self._ring_closure(int(digits), i)
                i += 3
            elif ch == "[":
                i = self._bracket(i)
            elif s.startswith(("Cl", "Br"), i):
                self._add_atom(Atom(symbol=s[i:i + 2], offset=i))
                i += 2
            elif ch in "BCNOPSFI":
                self._add_atom(Atom(symbol=ch, offset=i))
                i += 1
            elif ch in AROMATIC_ORGANIC:
                self._add_atom(Atom(symbol=ch.upper(), aromatic=True, offset=i))
                i += 1
            elif ch == "*":
                self._add_atom(Atom(symbol="*", offset=i))
                i += 1
            else:
                raise UnknownTokenError(s, i, f"unexpected character {ch!r}")

        if self.rings:
            number, (_, _, offset) = min(self.rings.items(), key=lambda item: item[1][2])
            raise UnmatchedRingClosureError(s, offset, f"ring bond {number} never closed")
        if self.branches:
            raise UnmatchedParenthesisError(s, self.branches[-1][1], "'(' never closed")
        if self.pending is not None:
            raise UnknownTokenError(s, self.pending[1], "dangling bond symbol")
        if not self.graph.atoms:
            raise UnknownTokenError(s, 0, "no atoms")
        return self.graph


def implicit_hydrogens(graph: MolGraph, idx: int) -> int:
    """Hydrogens an unbracketed atom receives from its standard valences"""
    atom = graph.atoms[idx]
    valences = DEFAULT_VALENCES.get(atom.symbol, ())
    if not valences:
        return 0
    if atom.aromatic:
        used = sum(1 if b.order == "aromatic" else int(b.value) for b in graph.incident_bonds(idx))
        return max(0, valences[0] - used - 1)
    used = sum(b.value for b in graph.incident_bonds(idx))
    for valence in valences:
        if valence >= used:
            return int(round(valence - used))
    raise ValenceOverflowError(graph.smiles, atom.offset,
                               f"{atom.symbol} with bond order sum {used:g} exceeds {max(valences)}")


def ring_bond_flags(graph: MolGraph) -> List[bool]:
    """A bond is in a ring iff it is not a bridge (iterative Tarjan lowlink)"""
    n = graph.num_atoms
    disc = [-1] * n
    low = [0] * n
    bridges = set()
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(graph.adjacency[root]))]
        while stack:
            u, parent, neighbours = stack[-1]
            advanced = False
            for v in neighbours:
                if v == parent:
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, u, iter(graph.adjacency[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if advanced:
                continue
            stack.pop()
            if stack:
                p = stack[-1][0]
                low[p] = min(low[p], low[u])
                if low[u] > disc[p]:
                    bridges.add(graph.bond_id(p, u))
    return [i not in bridges for i in range(graph.num_bonds)]


def parse_smiles(smiles: str) -> MolGraph:
    """Parse one SMILES string; raises a SmilesParseError subclass with the byte offset"""
    smiles = smiles.strip()
    graph = _SmilesReader(smiles).read()
    for idx, atom in enumerate(graph.atoms):
        if not atom.bracket:
            atom.hydrogens = implicit_hydrogens(graph, idx)
    for bond, flag in zip(graph.bonds, ring_bond_flags(graph)):
        bond.in_ring = flag
    logger.debug(f"🧪 parsed {smiles!r}: {graph.num_atoms} atoms, {graph.num_bonds} bonds")
    return graph
