# src/chem/isomorphism.py
import logging
from typing import Dict, List, Optional, Tuple

from .molecule import MolGraph

logger = logging.getLogger(__name__)


def _atom_label(graph: MolGraph, idx: int) -> Tuple:
    a = graph.atoms[idx]
    return (a.symbol, a.aromatic, a.charge, a.hydrogens, a.degree)


def refine_colors(graph: MolGraph, rounds: Optional[int] = None) -> List[int]:
    """Colour refinement on atom and bond labels; equal colours are a necessary match condition"""
    labels = [_atom_label(graph, i) for i in range(graph.num_atoms)]
    palette = {lab: k for k, lab in enumerate(sorted(set(labels), key=repr))}
    colors = [palette[lab] for lab in labels]
    for _ in range(rounds or graph.num_atoms):
        signatures = [
            (colors[i], tuple(sorted((colors[j], graph.bond(i, j).order) for j in graph.adjacency[i])))
            for i in range(graph.num_atoms)
        ]
        palette = {sig: k for k, sig in enumerate(sorted(set(signatures), key=repr))}
        refined = [palette[sig] for sig in signatures]
        if len(set(refined)) == len(set(colors)):
            return refined
        colors = refined
    return colors


def graphs_isomorphic(g1: MolGraph, g2: MolGraph) -> bool:
    """Label-preserving isomorphism by colour-pruned backtracking (meant for small molecules)"""
    if g1.num_atoms != g2.num_atoms or g1.num_bonds != g2.num_bonds:
        return False
    n = g1.num_atoms
    # refine both graphs jointly so colour ids are comparable
    joint = MolGraph(smiles=f"{g1.smiles}.{g2.smiles}")
    for g in (g1, g2):
        base = joint.num_atoms
        for a in g.atoms:
            joint.add_atom(type(a)(**{**a.__dict__, "degree": 0}))
        for b in g.bonds:
            joint.add_bond(base + b.begin, base + b.end, b.order)
    colors = refine_colors(joint)
    c1, c2 = colors[:n], colors[n:]
    if sorted(c1) != sorted(c2):
        return False

    order = sorted(range(n), key=lambda i: (sum(1 for j in range(n) if c1[j] == c1[i]), i))
    # prefer extending along bonds so adjacency checks prune early
    placed, frontier = [], []
    remaining = set(order)
    while remaining:
        pick = next((i for i in frontier if i in remaining), None)
        if pick is None:
            pick = next(i for i in order if i in remaining)
        remaining.discard(pick)
        placed.append(pick)
        frontier.extend(sorted(g1.adjacency[pick]))

    mapping: Dict[int, int] = {}
    used = set()

    def consistent(u: int, v: int) -> bool:
        for w in g1.adjacency[u]:
            if w in mapping:
                x = mapping[w]
                if not g2.has_bond(v, x) or g2.bond(v, x).order != g1.bond(u, w).order:
                    return False
        mapped_nbrs = sum(1 for w in g1.adjacency[u] if w in mapping)
        return mapped_nbrs == sum(1 for x in g2.adjacency[v] if x in used)

    def search(k: int) -> bool:
        if k == n:
            return True
        u = placed[k]
        for v in range(n):
            if v in used or c2[v] != c1[u] or not consistent(u, v):
                continue
            mapping[u] = v
            used.add(v)
            if search(k + 1):
                return True
            del mapping[u]
            used.discard(v)
        return False

    return search(0)
