# src/data_loaders/protein_features.py
"""
Residue-level protein inputs: one-hot letters, the fixed physicochemical
descriptor table and the thresholded contact graph with RBF edge features.
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd

from core.batch import ProtSample
from core.config import TrainConfig

logger = logging.getLogger(__name__)

AMINO_ACIDS = "ARNDCQEGHILKMFPSTWYV"
UNKNOWN_CLASS = len(AMINO_ACIDS)          # 21st one-hot column, also used for 'X'
PROTEIN_ALPHABET = frozenset(AMINO_ACIDS + "X")
DESCRIPTOR_FILE = Path(__file__).resolve().parent.parent.parent / "data" / "physchem_descriptors.csv"

RBF_LOW, RBF_HIGH = 0.5, 1.0


def onehot_residues(sequence: str) -> np.ndarray:
    """R×21; letters outside the 20 standard residues land in the last column"""
    out = np.zeros((len(sequence), UNKNOWN_CLASS + 1))
    for i, aa in enumerate(sequence.upper()):
        out[i, AMINO_ACIDS.find(aa) if aa in AMINO_ACIDS else UNKNOWN_CLASS] = 1.0
    return out


@lru_cache(maxsize=4)
def descriptor_table(path: str = str(DESCRIPTOR_FILE)) -> pd.DataFrame:
    table = pd.read_csv(path).set_index("residue")
    missing = set(AMINO_ACIDS) - set(table.index)
    if missing:
        raise ValueError(f"{path}: descriptor rows missing for {''.join(sorted(missing))}")
    logger.debug(f"📂 descriptor table {path}: {table.shape[0]} residues × {table.shape[1]} descriptors")
    return table.loc[list(AMINO_ACIDS)].astype(np.float64)


def physchem_residues(sequence: str) -> np.ndarray:
    """R×12 raw descriptor values; unknown residues take the column means"""
    table = descriptor_table()
    values = table.to_numpy()
    fallback = values.mean(axis=0)
    rows = [values[AMINO_ACIDS.index(aa)] if aa in AMINO_ACIDS else fallback for aa in sequence.upper()]
    return np.asarray(rows, dtype=np.float64).reshape(len(sequence), values.shape[1])


def rbf_centers(count: int = 16) -> np.ndarray:
    return np.linspace(RBF_LOW, RBF_HIGH, count)


def rbf_expand(probabilities: np.ndarray, count: int = 16, width: float = 0.05) -> np.ndarray:
    p = np.asarray(probabilities, dtype=np.float64)[..., None]
    return np.exp(-((p - rbf_centers(count)) ** 2) / (2.0 * width ** 2))


def build_prot_graph(contacts: np.ndarray, threshold: float = 0.5, centers: int = 16,
                     width: float = 0.05) -> Tuple[np.ndarray, np.ndarray]:
    """Directed edge list (both directions) for p_ij ≥ τ, i ≠ j, and its RBF features"""
    contacts = np.asarray(contacts, dtype=np.float64)
    keep = contacts >= threshold
    np.fill_diagonal(keep, False)
    src, dst = np.nonzero(keep)
    edge_index = np.stack([src, dst]).astype(np.int64)
    return edge_index, rbf_expand(contacts[src, dst], centers, width).reshape(-1, centers)


def protein_sample(sequence: str, esm: np.ndarray, contacts: np.ndarray, config: TrainConfig) -> ProtSample:
    edge_index, edge_attr = build_prot_graph(contacts, config.contact_threshold, config.rbf_centers, config.rbf_width)
    return ProtSample(esm=np.asarray(esm, dtype=np.float64), onehot=onehot_residues(sequence),
                      physchem=physchem_residues(sequence), edge_index=edge_index, edge_attr=edge_attr)
