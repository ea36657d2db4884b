# src/chem/smiles_writer.py
import logging
from typing import Dict, List, Optional, Tuple

from core.errors import ValenceOverflowError

from .molecule import ORGANIC_SUBSET, MolGraph
from .smiles_parser import implicit_hydrogens

logger = logging.getLogger(__name__)


def _needs_bracket(graph: MolGraph, idx: int) -> bool:
    atom = graph.atoms[idx]
    if atom.symbol == "*":
        return atom.charge != 0 or atom.hydrogens != 0 or atom.isotope is not None
    if atom.symbol not in ORGANIC_SUBSET or atom.charge or atom.isotope is not None:
        return True
    try:
        return implicit_hydrogens(graph, idx) != atom.hydrogens
    except ValenceOverflowError:
        return True


def _atom_token(graph: MolGraph, idx: int) -> str:
    atom = graph.atoms[idx]
    symbol = atom.symbol.lower() if atom.aromatic else atom.symbol
    if not _needs_bracket(graph, idx):
        return symbol
    parts = ["["]
    if atom.isotope is not None:
        parts.append(str(atom.isotope))
    parts.append(symbol)
    if atom.hydrogens:
        parts.append("H" if atom.hydrogens == 1 else f"H{atom.hydrogens}")
    if atom.charge:
        sign = "+" if atom.charge > 0 else "-"
        parts.append(sign if abs(atom.charge) == 1 else f"{sign}{abs(atom.charge)}")
    if atom.atom_class is not None:
        parts.append(f":{atom.atom_class}")
    parts.append("]")
    return "".join(parts)


def _bond_token(graph: MolGraph, a: int, b: int) -> str:
    order = graph.bond(a, b).order
    both_aromatic = graph.atoms[a].aromatic and graph.atoms[b].aromatic
    if order == "double":
        return "="
    if order == "triple":
        return "#"
    if order == "aromatic":
        return "" if both_aromatic else ":"
    return "-" if both_aromatic else ""


def _ring_label(number: int) -> str:
    return str(number) if number < 10 else f"%{number:02d}"


def write_smiles(graph: MolGraph) -> str:
    """Emit a SMILES string by depth-first traversal from the lowest atom index of each part"""
    n = graph.num_atoms
    visited = [False] * n
    parent: List[Optional[int]] = [None] * n
    children: List[List[int]] = [[] for _ in range(n)]
    ring_pairs: List[Tuple[int, int]] = []
    seen_ring = set()

    def explore(u: int) -> None:
        visited[u] = True
        for v in sorted(graph.adjacency[u]):
            if v == parent[u]:
                continue
            if visited[v]:
                bid = graph.bond_id(u, v)
                if bid not in seen_ring:
                    seen_ring.add(bid)
                    ring_pairs.append((v, u))
                continue
            parent[v] = u
            children[u].append(v)
            explore(v)

    roots = []
    for start in range(n):
        if not visited[start]:
            roots.append(start)
            explore(start)

    opens: Dict[int, List[Tuple[int, int]]] = {}
    closes: Dict[int, List[Tuple[int, int]]] = {}
    for k, (opener, closer) in enumerate(ring_pairs):
        opens.setdefault(opener, []).append((k, closer))
        closes.setdefault(closer, []).append((k, opener))

    free: List[int] = []
    next_label = [1]
    assigned: Dict[int, int] = {}

    def take_label() -> int:
        if free:
            free.sort()
            return free.pop(0)
        label = next_label[0]
        next_label[0] += 1
        return label

    out: List[str] = []

    def emit(u: int) -> None:
        out.append(_atom_token(graph, u))
        for k, opener in closes.get(u, []):
            label = assigned.pop(k)
            out.append(_bond_token(graph, opener, u) + _ring_label(label))
            free.append(label)
        for k, _ in opens.get(u, []):
            label = take_label()
            assigned[k] = label
            out.append(_ring_label(label))
        kids = children[u]
        for i, child in enumerate(kids):
            branch = i < len(kids) - 1
            if branch:
                out.append("(")
            out.append(_bond_token(graph, u, child))
            emit(child)
            if branch:
                out.append(")")

    for i, root in enumerate(roots):
        if i:
            out.append(".")
        emit(root)
    return "".join(out)
