# src/data_loaders/feature_cache.py
"""
Content-addressed cache of per-drug and per-protein feature samples.

Entries live at `<cache_dir>/<kind>/<hash>.bin` as numpy archives. A drug
key covers the SMILES text and the featurizer version; a protein key also
covers the embedding/contact file digest and the contact-graph settings, so
changing the threshold invalidates protein entries only.
"""

import hashlib
import io
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from chem.featurizer import FEATURIZER_VERSION, featurize_atoms, featurize_bonds
from chem.junction_tree import tree_decompose
from chem.smiles_parser import parse_smiles
from core.batch import DrugSample, ProtSample
from core.config import TrainConfig

from .data_loader import AffinityRecord, PairDataset, unique_drugs, unique_proteins
from .embedding_store import EmbeddingStore
from .protein_features import protein_sample

logger = logging.getLogger(__name__)

CACHE_FORMAT = "hifdta-cache-v1"
DRUG_FIELDS = ("atom_x", "edge_index", "edge_attr", "member_atoms", "member_clusters", "cluster_types", "first_cluster")
PROT_FIELDS = ("esm", "onehot", "physchem", "edge_index", "edge_attr")


@dataclass
class CacheStats:
    hits: int = 0
    builds: int = 0
    rebuilds: int = 0
    parses: int = 0
    by_kind: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {"hits": self.hits, "builds": self.builds, "rebuilds": self.rebuilds,
                "parses": self.parses, "by_kind": dict(self.by_kind)}


def drug_sample(smiles: str) -> DrugSample:
    """SMILES → atom/bond features and junction-tree memberships"""
    graph = parse_smiles(smiles)
    tree = tree_decompose(graph)
    bonds = featurize_bonds(graph)
    begin = np.asarray([b.begin for b in graph.bonds], dtype=np.int64)
    end = np.asarray([b.end for b in graph.bonds], dtype=np.int64)
    member_atoms, member_clusters = tree.membership_pairs()
    return DrugSample(
        atom_x=featurize_atoms(graph),
        edge_index=np.stack([np.concatenate([begin, end]), np.concatenate([end, begin])]).reshape(2, -1),
        edge_attr=np.concatenate([bonds, bonds], axis=0),
        member_atoms=member_atoms,
        member_clusters=member_clusters,
        cluster_types=np.asarray(tree.cluster_types, dtype=np.int64),
        first_cluster=np.asarray(tree.first_cluster(), dtype=np.int64),
    )


def _hash(*parts: object) -> str:
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def _encode(sample, fields: Sequence[str], version: str) -> bytes:
    buffer = io.BytesIO()
    np.savez(buffer, __version__=np.array(version), **{name: getattr(sample, name) for name in fields})
    return buffer.getvalue()


class FeatureCache:
    """Builds samples in a worker pool; only the calling thread writes files"""

    def __init__(self, root: Union[str, Path], config: TrainConfig, store: Optional[EmbeddingStore] = None,
                 workers: Optional[int] = None, version: str = FEATURIZER_VERSION):
        self.root = Path(root)
        self.config = config
        self.store = store
        self.workers = workers or config.workers
        self.version = f"{CACHE_FORMAT}/{version}"
        self.stats = CacheStats()
        self._lock = threading.Lock()

    # --- keys ---
    def drug_key(self, smiles: str) -> str:
        return _hash("drug", smiles, self.version)

    def protein_key(self, protein_id: str, sequence: str) -> str:
        digest = self.store.digest(protein_id) if self.store is not None else ""
        c = self.config
        return _hash("protein", protein_id, sequence, digest, self.version,
                     c.contact_threshold, c.rbf_centers, c.rbf_width, c.esm_dim)

    def path(self, kind: str, key: str) -> Path:
        return self.root / kind / f"{key}.bin"

    # --- file access ---
    def _read(self, kind: str, key: str, fields: Sequence[str]) -> Optional[Dict[str, np.ndarray]]:
        path = self.path(kind, key)
        if not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as archive:
                if str(archive["__version__"]) != self.version:
                    logger.warning(f"⚠️ stale cache entry {path.name} ({archive['__version__']}), rebuilding")
                    self.stats.rebuilds += 1
                    return None
                return {name: archive[name] for name in fields}
        except (OSError, KeyError, ValueError) as e:
            logger.warning(f"⚠️ unreadable cache entry {path} ({e}), rebuilding")
            self.stats.rebuilds += 1
            return None

    def _write(self, kind: str, key: str, sample, fields: Sequence[str]) -> None:
        path = self.path(kind, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(_encode(sample, fields, self.version))
        tmp.replace(path)

    def _resolve(self, kind: str, items: Dict[str, Tuple[str, Callable[[], object]]],
                 fields: Sequence[str], factory) -> Dict[str, object]:
        """items: name → (cache key, builder); returns name → sample"""
        out: Dict[str, object] = {}
        pending: List[Tuple[str, str, Callable[[], object]]] = []
        for name, (key, build) in items.items():
            cached = self._read(kind, key, fields)
            if cached is None:
                pending.append((name, key, build))
            else:
                out[name] = factory(**cached)
                self.stats.hits += 1
        if pending:
            logger.info(f"⚙️ building {len(pending)} {kind} feature set(s) with {self.workers} worker(s)")
            if self.workers > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    built = list(pool.map(lambda job: job[2](), pending))
            else:
                built = [job[2]() for job in pending]
            for (name, key, _), sample in zip(pending, built):
                self._write(kind, key, sample, fields)
                out[name] = sample
            self.stats.builds += len(pending)
            self.stats.by_kind[kind] = self.stats.by_kind.get(kind, 0) + len(pending)
        return out

    # --- public ---
    def _parse(self, smiles: str) -> DrugSample:
        with self._lock:
            self.stats.parses += 1
        return drug_sample(smiles)

    def drugs(self, smiles_by_id: Dict[str, str]) -> Dict[str, DrugSample]:
        items = {drug_id: (self.drug_key(smiles), lambda s=smiles: self._parse(s))
                 for drug_id, smiles in smiles_by_id.items()}
        return self._resolve("drug", items, DRUG_FIELDS, DrugSample)

    def proteins(self, sequences: Dict[str, str]) -> Dict[str, ProtSample]:
        if self.store is None:
            raise ValueError("protein features need an embedding store")

        def build(protein_id: str, sequence: str) -> ProtSample:
            esm = self.store.load_embedding(protein_id, len(sequence))
            contacts = self.store.load_contacts(protein_id, len(sequence))
            return protein_sample(sequence, esm, contacts, self.config)

        items = {pid: (self.protein_key(pid, seq), lambda p=pid, s=seq: build(p, s))
                 for pid, seq in sequences.items()}
        return self._resolve("protein", items, PROT_FIELDS, ProtSample)

    def clear(self) -> int:
        removed = 0
        for path in self.root.glob("*/*.bin"):
            path.unlink()
            removed += 1
        logger.info(f"🗑️ removed {removed} cache entries under {self.root}")
        return removed


def build_pair_dataset(records: Sequence[AffinityRecord], config: TrainConfig, store: EmbeddingStore,
                       cache_root: Optional[Union[str, Path]] = None, stub_missing: bool = False) -> PairDataset:
    """Resolve embeddings (stubbing if asked), featurize through the cache and bundle the pairs"""
    proteins = unique_proteins(records)
    store.ensure(proteins, stub_missing=stub_missing, seed=config.seed)
    cache = FeatureCache(cache_root if cache_root is not None else config.cache_dir, config, store)
    dataset = PairDataset(list(records), cache.drugs(unique_drugs(records)), cache.proteins(proteins))
    logger.info(f"✅ features ready: {len(dataset.drugs)} drugs, {len(dataset.proteins)} proteins "
                f"(cache hits {cache.stats.hits}, built {cache.stats.builds})")
    dataset.cache_stats = cache.stats
    return dataset
