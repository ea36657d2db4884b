# src/chem/__init__.py
"""
Molecule graphs from SMILES: parser, writer, isomorphism test, atom/bond
featurizer and junction-tree decomposition.
"""

from .junction_tree import JunctionTree, check_tree, tree_decompose
from .molecule import MolGraph
from .smiles_parser import parse_smiles
from .smiles_writer import write_smiles

__all__ = [
    'JunctionTree',
    'MolGraph',
    'check_tree',
    'parse_smiles',
    'tree_decompose',
    'write_smiles',
]
