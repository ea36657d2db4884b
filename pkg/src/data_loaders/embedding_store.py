# src/data_loaders/embedding_store.py
import hashlib
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from core.errors import (AsymmetricContactError, BadMagicError, EmbeddingFormatError,
                         MissingEmbeddingError, NonFiniteError, ShapeMismatchError)
from core.rng import SeededRng

logger = logging.getLogger(__name__)

EMBEDDING_MAGIC = b"HFE1"
CONTACT_MAGIC = b"HFC1"
SYMMETRY_TOLERANCE = 1e-6


def _read_header(protein_id: str, raw: bytes, magic: bytes, words: int) -> Tuple[int, ...]:
    need = len(magic) + 4 * words
    if len(raw) < need or raw[:len(magic)] != magic:
        raise BadMagicError(protein_id, f"expected {magic!r}, found {raw[:len(magic)]!r}")
    return tuple(int(v) for v in np.frombuffer(raw[len(magic):need], dtype="<u4"))


def _check_finite(protein_id: str, values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.sum(~np.isfinite(values)))
        raise NonFiniteError(protein_id, f"{bad} non-finite value(s) in {what}")


def decode_embedding(protein_id: str, raw: bytes, length: Optional[int] = None,
                     width: Optional[int] = None) -> np.ndarray:
    rows, cols = _read_header(protein_id, raw, EMBEDDING_MAGIC, 2)
    body = raw[len(EMBEDDING_MAGIC) + 8:]
    if len(body) != 4 * rows * cols:
        raise ShapeMismatchError(protein_id, f"header says {rows}×{cols}, payload has {len(body) // 4} values")
    if length is not None and rows != length:
        raise ShapeMismatchError(protein_id, f"embedding has {rows} rows, sequence has {length} residues")
    if width is not None and cols != width:
        raise ShapeMismatchError(protein_id, f"embedding width {cols}, expected {width}")
    values = np.frombuffer(body, dtype="<f4").reshape(rows, cols).astype(np.float64)
    _check_finite(protein_id, values, "embedding")
    return values


def decode_contacts(protein_id: str, raw: bytes, length: Optional[int] = None) -> np.ndarray:
    (size,) = _read_header(protein_id, raw, CONTACT_MAGIC, 1)
    body = raw[len(CONTACT_MAGIC) + 4:]
    if len(body) != 4 * size * size:
        raise ShapeMismatchError(protein_id, f"header says {size}×{size}, payload has {len(body) // 4} values")
    if length is not None and size != length:
        raise ShapeMismatchError(protein_id, f"contact map is {size}×{size}, sequence has {length} residues")
    values = np.frombuffer(body, dtype="<f4").reshape(size, size).astype(np.float64)
    _check_finite(protein_id, values, "contact map")
    gap = float(np.max(np.abs(values - values.T))) if size else 0.0
    if gap > SYMMETRY_TOLERANCE:
        raise AsymmetricContactError(protein_id, f"max |p_ij - p_ji| = {gap:.3g}")
    return values


def encode_embedding(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype="<f4")
    header = np.asarray(values.shape, dtype="<u4").tobytes()
    return EMBEDDING_MAGIC + header + values.tobytes(order="C")


def encode_contacts(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype="<f4")
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"contact map must be square, got {values.shape}")
    return CONTACT_MAGIC + np.asarray([values.shape[0]], dtype="<u4").tobytes() + values.tobytes(order="C")


def _residue_key(protein_id: str, position: int, residue: str) -> int:
    text = f"{protein_id}\x00{position}\x00{residue}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def stub_embedding(protein_id: str, sequence: str, width: int = 1280, seed: int = 0) -> np.ndarray:
    """Per-residue N(0,1) vectors addressed by (protein id, position, residue letter)"""
    rng = SeededRng(seed)
    rows = [rng.generator(_residue_key(protein_id, i, aa)).standard_normal(width)
            for i, aa in enumerate(sequence)]
    return np.asarray(rows, dtype=np.float64).reshape(len(sequence), width)


def stub_contacts(protein_id: str, length: int, seed: int = 0, band: int = 2, boost: float = 0.6) -> np.ndarray:
    """
    Sigmoid of a seeded symmetric Gaussian matrix (mean -2), plus `boost`
    within `band` of the diagonal; clipped to [0, 1] with a unit diagonal.
    """
    g = SeededRng(seed).generator(f"contacts:{protein_id}").normal(-2.0, 1.0, size=(length, length))
    upper = np.triu(g, 1)
    logits = upper + upper.T
    probs = 1.0 / (1.0 + np.exp(-logits))
    offset = np.abs(np.subtract.outer(np.arange(length), np.arange(length)))
    probs = np.clip(probs + boost * ((offset > 0) & (offset <= band)), 0.0, 1.0)
    np.fill_diagonal(probs, 1.0)
    # round-trip through f32 so stored and in-memory maps agree
    return probs.astype(np.float32).astype(np.float64)


class EmbeddingStore:
    """
    Directory of per-protein embedding (`<id>.emb`) and contact (`<id>.cmap`)
    files. Tracks which proteins were loaded, stubbed or found missing.
    """

    def __init__(self, root: Union[str, Path], esm_dim: int = 1280):
        self.root = Path(root)
        self.config = {"esm_dim": esm_dim, "embedding_suffix": ".emb", "contact_suffix": ".cmap"}
        self.status: Dict[str, str] = {}

    def embedding_path(self, protein_id: str) -> Path:
        return self.root / f"{protein_id}{self.config['embedding_suffix']}"

    def contact_path(self, protein_id: str) -> Path:
        return self.root / f"{protein_id}{self.config['contact_suffix']}"

    def has(self, protein_id: str) -> bool:
        return self.embedding_path(protein_id).exists() and self.contact_path(protein_id).exists()

    def missing(self, protein_ids: Iterable[str]) -> List[str]:
        return sorted({p for p in protein_ids if not self.has(p)})

    def require(self, protein_ids: Iterable[str]) -> None:
        absent = self.missing(protein_ids)
        if absent:
            raise MissingEmbeddingError(absent)

    def load_embedding(self, protein_id: str, length: Optional[int] = None) -> np.ndarray:
        path = self.embedding_path(protein_id)
        if not path.exists():
            raise MissingEmbeddingError([protein_id])
        values = decode_embedding(protein_id, path.read_bytes(), length, self.config["esm_dim"])
        self.status[protein_id] = "loaded"
        return values

    def load_contacts(self, protein_id: str, length: Optional[int] = None) -> np.ndarray:
        path = self.contact_path(protein_id)
        if not path.exists():
            raise MissingEmbeddingError([protein_id])
        return decode_contacts(protein_id, path.read_bytes(), length)

    def write_embedding(self, protein_id: str, values: np.ndarray) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.embedding_path(protein_id)
        path.write_bytes(encode_embedding(values))
        return path

    def write_contacts(self, protein_id: str, values: np.ndarray) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.contact_path(protein_id)
        path.write_bytes(encode_contacts(values))
        return path

    def digest(self, protein_id: str) -> str:
        """Content digest of both files, part of the feature cache key"""
        h = hashlib.blake2b(digest_size=16)
        for path in (self.embedding_path(protein_id), self.contact_path(protein_id)):
            h.update(path.read_bytes())
        return h.hexdigest()

    def stub(self, proteins: Dict[str, str], seed: int = 0, overwrite: bool = False) -> List[str]:
        """Write stub files for every (id → sequence) lacking them; returns the ids written"""
        written = []
        for protein_id, sequence in proteins.items():
            if self.has(protein_id) and not overwrite:
                continue
            self.write_embedding(protein_id, stub_embedding(protein_id, sequence, self.config["esm_dim"], seed))
            self.write_contacts(protein_id, stub_contacts(protein_id, len(sequence), seed))
            self.status[protein_id] = "stubbed"
            written.append(protein_id)
        if written:
            logger.info(f"🧬 Stubbed embeddings for {len(written)} protein(s) under {self.root}")
        return written

    def ensure(self, proteins: Dict[str, str], stub_missing: bool = False, seed: int = 0) -> None:
        absent = self.missing(proteins)
        if not absent:
            return
        if not stub_missing:
            logger.error(f"❌ {len(absent)} protein(s) have no embeddings in {self.root}")
            raise MissingEmbeddingError(absent)
        logger.warning(f"⚠️ {len(absent)} protein(s) missing, generating stubs")
        self.stub({p: proteins[p] for p in absent}, seed=seed)

    def inventory(self) -> Dict[str, object]:
        embeddings = sorted(p.stem for p in self.root.glob(f"*{self.config['embedding_suffix']}")) if self.root.exists() else []
        return {
            "root": str(self.root),
            "esm_dim": self.config["esm_dim"],
            "proteins": len(embeddings),
            "without_contacts": [p for p in embeddings if not self.contact_path(p).exists()],
            "session": dict(self.status),
        }


def validate_store(store: EmbeddingStore, proteins: Dict[str, str]) -> Dict[str, str]:
    """Load every file once; returns id → error message for the ones that fail"""
    problems: Dict[str, str] = {}
    for protein_id, sequence in proteins.items():
        try:
            store.load_embedding(protein_id, len(sequence))
            store.load_contacts(protein_id, len(sequence))
        except (EmbeddingFormatError, MissingEmbeddingError) as e:
            problems[protein_id] = str(e)
    return problems
