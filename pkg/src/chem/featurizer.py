# src/chem/featurizer.py
"""
Atom and bond featurization.

Atom rows are 43 wide, built from seven blocks:

    element (16) | degree 0-5 (6) | total H 0-4 (5) | implicit valence 0-5 (6)
    | formal charge -2..+2 (5) | hybridization sp/sp2/sp3/other (4) | aromatic (1)

Values beyond a block's range go to its last bucket (charge clamps at both
ends). Bond rows are one-hot single/double/triple/aromatic plus an in-ring bit.
"""

import logging
from typing import List

import numpy as np

from .molecule import BOND_ORDERS, MolGraph

logger = logging.getLogger(__name__)

ELEMENT_VOCAB = ["C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "Si", "Se", "As", "Sn", "other", "*"]
HYBRIDIZATIONS = ["sp", "sp2", "sp3", "other"]
BLOCK_SIZES = (16, 6, 5, 6, 5, 4, 1)
ATOM_FEATURE_DIM = sum(BLOCK_SIZES)
BOND_FEATURE_DIM = len(BOND_ORDERS) + 1
FEATURIZER_VERSION = "atom43-bond5-v1"

_HYBRID_ELEMENTS = frozenset(("C", "N", "O", "S"))


def hybridization(graph: MolGraph, idx: int) -> str:
    atom = graph.atoms[idx]
    if atom.symbol not in _HYBRID_ELEMENTS:
        return "other"
    orders = [b.order for b in graph.incident_bonds(idx)]
    if "triple" in orders or orders.count("double") >= 2:
        return "sp"
    if "double" in orders or "aromatic" in orders or atom.aromatic:
        return "sp2"
    return "sp3"


def _bucket(value: int, size: int, what: str, smiles: str) -> int:
    if value < 0 or value >= size:
        clamped = min(max(value, 0), size - 1)
        logger.debug(f"⚠️ {what}={value} clamped to {clamped} in {smiles!r}")
        return clamped
    return value


def featurize_atoms(graph: MolGraph) -> np.ndarray:
    """N×43 matrix of 0/1 values"""
    feats = np.zeros((graph.num_atoms, ATOM_FEATURE_DIM))
    offsets = np.cumsum((0,) + BLOCK_SIZES[:-1])
    for i, atom in enumerate(graph.atoms):
        element = atom.symbol if atom.symbol in ELEMENT_VOCAB else "other"
        picks: List[int] = [
            ELEMENT_VOCAB.index(element),
            _bucket(atom.degree, 6, "degree", graph.smiles),
            _bucket(atom.hydrogens, 5, "hydrogens", graph.smiles),
            _bucket(atom.implicit_hydrogens, 6, "implicit valence", graph.smiles),
            _bucket(atom.charge + 2, 5, "charge", graph.smiles),
            HYBRIDIZATIONS.index(hybridization(graph, i)),
        ]
        for block, pick in enumerate(picks):
            feats[i, offsets[block] + pick] = 1.0
        feats[i, -1] = 1.0 if atom.aromatic else 0.0
    return feats


def featurize_bonds(graph: MolGraph) -> np.ndarray:
    """E×5 matrix: bond order one-hot followed by the in-ring bit"""
    feats = np.zeros((graph.num_bonds, BOND_FEATURE_DIM))
    for k, bond in enumerate(graph.bonds):
        feats[k, BOND_ORDERS.index(bond.order)] = 1.0
        feats[k, -1] = 1.0 if bond.in_ring else 0.0
    return feats


def block_sums(features: np.ndarray) -> np.ndarray:
    """Per-row sums of the six one-hot blocks (aromatic bit excluded)"""
    edges = np.cumsum((0,) + BLOCK_SIZES)
    return np.stack([features[:, edges[k]:edges[k + 1]].sum(axis=1) for k in range(6)], axis=1)
