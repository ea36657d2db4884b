# src/data_loaders/data_loader.py
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.batch import Batch, DrugSample, ProtSample, collate
from core.errors import DatasetFormatError, DomainError, UsageError

from .protein_features import PROTEIN_ALPHABET

logger = logging.getLogger(__name__)

COLUMNS = ["drug_id", "smiles", "protein_id", "sequence", "affinity"]
PAIR_COLUMNS = COLUMNS[:4]


@dataclass(frozen=True)
class AffinityRecord:
    drug_id: str
    smiles: str
    protein_id: str
    sequence: str
    affinity: float


@dataclass
class FoldSplit:
    seed: int
    folds: List[np.ndarray]

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_indices(self, fold: int) -> np.ndarray:
        rest = [f for i, f in enumerate(self.folds) if i != fold]
        return np.concatenate(rest) if rest else np.zeros(0, dtype=np.int64)

    def valid_indices(self, fold: int) -> np.ndarray:
        return self.folds[fold]


@dataclass
class DatasetStats:
    """Counts in the style of a benchmark summary table"""
    records: int
    drugs: int
    proteins: int
    affinity_mean: float
    affinity_std: float
    affinity_min: float
    affinity_max: float
    max_sequence_length: int = 0
    duplicates_dropped: int = 0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def pkd_transform(kd_nm: float) -> float:
    """K_d in nM → pK_d = -log10(K_d / 1e9)"""
    if not kd_nm > 0:
        raise DomainError(f"pkd_transform: K_d must be > 0, got {kd_nm}")
    return -math.log10(kd_nm / 1e9)


def _read_table(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, quoting=3)
    except pd.errors.ParserError as e:
        where = re.search(r"line (\d+)", str(e))
        raise DatasetFormatError(str(path), int(where.group(1)) if where else None, "wrong field count") from None
    header = list(frame.columns)
    if header[:len(columns)] != list(columns):
        raise DatasetFormatError(str(path), 1, f"header {header} does not start with {list(columns)}")
    return frame


def _check_row(path: Path, line: int, row: Dict[str, str], columns: Sequence[str]) -> None:
    for name in columns:
        if not row[name].strip():
            raise DatasetFormatError(str(path), line, f"empty {name}")
    bad = set(row["sequence"].upper()) - PROTEIN_ALPHABET
    if bad:
        raise DatasetFormatError(str(path), line, f"sequence has letters outside the protein alphabet: {''.join(sorted(bad))}")


def load_dataset(path: Union[str, Path], transform: bool = False) -> List[AffinityRecord]:
    """
    Parse a `drug_id smiles protein_id sequence affinity` TSV. Records keep
    file order; a repeated (drug, protein) pair keeps the last value at the
    position of its first occurrence.
    """
    path = Path(path)
    logger.info(f"📥 Loading dataset {path}")
    frame = _read_table(path, COLUMNS)
    by_pair: Dict[Tuple[str, str], AffinityRecord] = {}
    duplicates = 0
    for offset, row in enumerate(frame.to_dict(orient="records")):
        line = offset + 2
        if not all(isinstance(row.get(c), str) for c in COLUMNS):
            raise DatasetFormatError(str(path), line, "wrong field count")
        _check_row(path, line, row, COLUMNS)
        try:
            value = float(row["affinity"])
        except ValueError:
            raise DatasetFormatError(str(path), line, f"affinity {row['affinity']!r} is not a number") from None
        if not math.isfinite(value):
            raise DatasetFormatError(str(path), line, f"affinity {value} is not finite")
        if transform:
            try:
                value = pkd_transform(value)
            except DomainError as e:
                raise DatasetFormatError(str(path), line, str(e)) from None
        record = AffinityRecord(row["drug_id"].strip(), row["smiles"].strip(), row["protein_id"].strip(),
                                row["sequence"].strip().upper(), value)
        key = (record.drug_id, record.protein_id)
        if key in by_pair:
            duplicates += 1
            logger.warning(f"⚠️ {path}:{line}: duplicate pair {key}, keeping the later value")
        by_pair[key] = record
    records = list(by_pair.values())
    logger.info(f"✅ Loaded {len(records)} records ({duplicates} duplicate pair(s) replaced)")
    return records


def load_pairs(path: Union[str, Path]) -> pd.DataFrame:
    """Prediction input: the dataset columns without affinity (extra columns are kept)"""
    path = Path(path)
    frame = _read_table(path, PAIR_COLUMNS)
    for offset, row in enumerate(frame.to_dict(orient="records")):
        _check_row(path, offset + 2, row, PAIR_COLUMNS)
    frame["sequence"] = frame["sequence"].str.strip().str.upper()
    return frame


def write_dataset(records: Sequence[AffinityRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([asdict(r) for r in records], columns=COLUMNS)
    frame.to_csv(path, sep="\t", index=False, float_format="%.10g")
    return path


def kfold_split(records: Union[int, Sequence[AffinityRecord]], k: int = 5, seed: int = 0) -> FoldSplit:
    """Seeded shuffle then contiguous slices; sizes differ by at most one"""
    count = records if isinstance(records, int) else len(records)
    if k < 1 or k > max(count, 1):
        raise UsageError(f"kfold_split: cannot make {k} folds from {count} records")
    order = np.random.default_rng(seed).permutation(count)
    return FoldSplit(seed=seed, folds=[np.sort(part) for part in np.array_split(order, k)])


def inspect_dataset(records: Sequence[AffinityRecord], duplicates_dropped: int = 0) -> DatasetStats:
    values = np.asarray([r.affinity for r in records], dtype=np.float64)
    if values.size == 0:
        return DatasetStats(0, 0, 0, float("nan"), float("nan"), float("nan"), float("nan"))
    return DatasetStats(
        records=len(records),
        drugs=len({r.drug_id for r in records}),
        proteins=len({r.protein_id for r in records}),
        affinity_mean=float(values.mean()),
        affinity_std=float(values.std()),
        affinity_min=float(values.min()),
        affinity_max=float(values.max()),
        max_sequence_length=max(len(r.sequence) for r in records),
        duplicates_dropped=duplicates_dropped,
    )


def unique_drugs(records: Sequence[AffinityRecord]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for r in records:
        out.setdefault(r.drug_id, r.smiles)
    return out


def unique_proteins(records: Sequence[AffinityRecord]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for r in records:
        out.setdefault(r.protein_id, r.sequence)
    return out


@dataclass
class PairDataset:
    """Records plus the per-drug/per-protein samples they reference"""
    records: List[AffinityRecord]
    drugs: Dict[str, DrugSample]
    proteins: Dict[str, ProtSample]
    labels: np.ndarray = field(init=False)
    cache_stats: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = np.asarray([r.affinity for r in self.records], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.records)

    def subset(self, indices: Sequence[int]) -> "PairDataset":
        return PairDataset([self.records[i] for i in indices], self.drugs, self.proteins)

    def batch(self, indices: Sequence[int], labelled: bool = True) -> Batch:
        chosen = [self.records[i] for i in indices]
        return collate([self.drugs[r.drug_id] for r in chosen],
                       [self.proteins[r.protein_id] for r in chosen],
                       [r.affinity for r in chosen] if labelled else None)

    def drug_samples(self) -> List[DrugSample]:
        return [self.drugs[d] for d in dict.fromkeys(r.drug_id for r in self.records)]

    def protein_samples(self) -> List[ProtSample]:
        return [self.proteins[p] for p in dict.fromkeys(r.protein_id for r in self.records)]
