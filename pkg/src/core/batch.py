# src/core/batch.py
"""
Per-sample feature containers and their collation into padded batches.

Drug and protein samples are produced once per unique SMILES / protein by
the data loaders (and cached); `collate` turns a list of (drug, protein,
label) triples into the index arrays the encoders consume.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class DrugSample:
    atom_x: np.ndarray            # N×43
    edge_index: np.ndarray        # 2×E' directed (both directions)
    edge_attr: np.ndarray         # E'×5
    member_atoms: np.ndarray      # memberships (atom side)
    member_clusters: np.ndarray   # memberships (cluster side)
    cluster_types: np.ndarray     # C
    first_cluster: np.ndarray     # N, lowest cluster id per atom

    @property
    def num_atoms(self) -> int:
        return self.atom_x.shape[0]

    @property
    def num_clusters(self) -> int:
        return self.cluster_types.shape[0]


@dataclass
class ProtSample:
    esm: np.ndarray               # R×esm_dim
    onehot: np.ndarray            # R×21
    physchem: np.ndarray          # R×12 raw descriptor values
    edge_index: np.ndarray        # 2×L' directed
    edge_attr: np.ndarray         # L'×rbf

    @property
    def num_residues(self) -> int:
        return self.esm.shape[0]


@dataclass
class DenseLayout:
    """Pointers for scattering ragged rows into a B×L padded block"""
    index: np.ndarray             # B×L, row id or `pad` for empty slots
    mask: np.ndarray              # B×L bool
    flat_pos: np.ndarray          # per row, its position in the flattened B·L block
    pad: int

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mask.shape


def dense_layout(segment_ids: np.ndarray, num_segments: int, order: Optional[np.ndarray] = None) -> DenseLayout:
    """
    Pack rows by segment. `order` lists row ids in the order they should
    occupy slots (defaults to ascending row id); rows of a segment must be
    contiguous in that order.
    """
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    n = segment_ids.shape[0]
    order = np.arange(n) if order is None else np.asarray(order, dtype=np.int64)
    counts = np.bincount(segment_ids, minlength=num_segments)
    width = int(counts.max()) if n else 0
    index = np.full((num_segments, width), n, dtype=np.int64)
    mask = np.zeros((num_segments, width), dtype=bool)
    flat_pos = np.zeros(n, dtype=np.int64)
    fill = np.zeros(num_segments, dtype=np.int64)
    for row in order:
        b = segment_ids[row]
        t = fill[b]
        index[b, t] = row
        mask[b, t] = True
        flat_pos[row] = b * width + t
        fill[b] += 1
    return DenseLayout(index=index, mask=mask, flat_pos=flat_pos, pad=n)


def reversed_layout(layout: DenseLayout) -> DenseLayout:
    """Same rows with each segment's valid prefix reversed"""
    index = np.full_like(layout.index, layout.pad)
    flat_pos = np.zeros_like(layout.flat_pos)
    batch, width = layout.shape
    lengths = layout.mask.sum(axis=1)
    for b in range(batch):
        n = int(lengths[b])
        index[b, :n] = layout.index[b, :n][::-1]
        for t in range(n):
            flat_pos[index[b, t]] = b * width + t
    return DenseLayout(index=index, mask=layout.mask.copy(), flat_pos=flat_pos, pad=layout.pad)


@dataclass
class DrugBatch:
    atom_x: np.ndarray
    atom_batch: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_attr: np.ndarray
    member_atoms: np.ndarray
    member_clusters: np.ndarray
    cluster_types: np.ndarray
    cluster_batch: np.ndarray
    first_cluster: np.ndarray
    atoms: DenseLayout
    atoms_reversed: DenseLayout
    clusters: DenseLayout
    num_molecules: int

    @property
    def num_atoms(self) -> int:
        return self.atom_x.shape[0]

    @property
    def num_clusters(self) -> int:
        return self.cluster_types.shape[0]


@dataclass
class ProtBatch:
    esm: np.ndarray
    onehot: np.ndarray
    physchem: np.ndarray
    residue_batch: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_attr: np.ndarray
    degree: np.ndarray
    sort_perm: np.ndarray         # sorted position -> residue id
    sorted_layout: DenseLayout    # dense slots over degree-sorted rows
    layout: DenseLayout           # dense slots in residue order
    adjacency: np.ndarray         # B×V×V binary contacts in residue order
    num_proteins: int

    @property
    def num_residues(self) -> int:
        return self.esm.shape[0]


@dataclass
class Batch:
    drug: DrugBatch
    prot: ProtBatch
    labels: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.drug.num_molecules


def degree_sort(degree: np.ndarray, segment_ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stable order by (segment, degree, original index); returns (perm, inverse)"""
    n = degree.shape[0]
    perm = np.lexsort((np.arange(n), degree, segment_ids))
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(n)
    return perm, inverse


def collate_drugs(samples: Sequence[DrugSample]) -> DrugBatch:
    xs, batch, src, dst, eattr = [], [], [], [], []
    m_atoms, m_clusters, types, c_batch, first = [], [], [], [], []
    atom_offset = cluster_offset = 0
    for b, s in enumerate(samples):
        xs.append(s.atom_x)
        batch.append(np.full(s.num_atoms, b, dtype=np.int64))
        src.append(s.edge_index[0] + atom_offset)
        dst.append(s.edge_index[1] + atom_offset)
        eattr.append(s.edge_attr)
        m_atoms.append(s.member_atoms + atom_offset)
        m_clusters.append(s.member_clusters + cluster_offset)
        types.append(s.cluster_types)
        c_batch.append(np.full(s.num_clusters, b, dtype=np.int64))
        first.append(s.first_cluster + cluster_offset)
        atom_offset += s.num_atoms
        cluster_offset += s.num_clusters
    atom_batch = np.concatenate(batch)
    cluster_batch = np.concatenate(c_batch)
    atoms = dense_layout(atom_batch, len(samples))
    return DrugBatch(
        atom_x=np.concatenate(xs, axis=0),
        atom_batch=atom_batch,
        edge_src=np.concatenate(src).astype(np.int64),
        edge_dst=np.concatenate(dst).astype(np.int64),
        edge_attr=np.concatenate(eattr, axis=0),
        member_atoms=np.concatenate(m_atoms).astype(np.int64),
        member_clusters=np.concatenate(m_clusters).astype(np.int64),
        cluster_types=np.concatenate(types).astype(np.int64),
        cluster_batch=cluster_batch,
        first_cluster=np.concatenate(first).astype(np.int64),
        atoms=atoms,
        atoms_reversed=reversed_layout(atoms),
        clusters=dense_layout(cluster_batch, len(samples)),
        num_molecules=len(samples),
    )


def collate_proteins(samples: Sequence[ProtSample]) -> ProtBatch:
    esm, onehot, phys, batch, src, dst, eattr = [], [], [], [], [], [], []
    offset = 0
    for b, s in enumerate(samples):
        esm.append(s.esm)
        onehot.append(s.onehot)
        phys.append(s.physchem)
        batch.append(np.full(s.num_residues, b, dtype=np.int64))
        src.append(s.edge_index[0] + offset)
        dst.append(s.edge_index[1] + offset)
        eattr.append(s.edge_attr)
        offset += s.num_residues
    residue_batch = np.concatenate(batch)
    edge_src = np.concatenate(src).astype(np.int64)
    edge_dst = np.concatenate(dst).astype(np.int64)
    degree = np.bincount(edge_dst, minlength=offset)
    perm, _ = degree_sort(degree, residue_batch)
    layout = dense_layout(residue_batch, len(samples))
    batch_size, width = layout.shape
    adjacency = np.zeros((batch_size, width, width))
    local = layout.flat_pos % max(width, 1)
    adjacency[residue_batch[edge_src], local[edge_src], local[edge_dst]] = 1.0
    return ProtBatch(
        esm=np.concatenate(esm, axis=0),
        onehot=np.concatenate(onehot, axis=0),
        physchem=np.concatenate(phys, axis=0),
        residue_batch=residue_batch,
        edge_src=edge_src,
        edge_dst=edge_dst,
        edge_attr=np.concatenate(eattr, axis=0),
        degree=degree,
        sort_perm=perm,
        sorted_layout=dense_layout(residue_batch, len(samples), order=perm),
        layout=layout,
        adjacency=adjacency,
        num_proteins=len(samples),
    )


def collate(drugs: Sequence[DrugSample], prots: Sequence[ProtSample],
            labels: Optional[Sequence[float]] = None) -> Batch:
    if len(drugs) != len(prots):
        raise ValueError(f"collate: {len(drugs)} drugs vs {len(prots)} proteins")
    y = None if labels is None else np.asarray(labels, dtype=np.float64)
    return Batch(drug=collate_drugs(drugs), prot=collate_proteins(prots), labels=y)


def batch_indices(count: int, batch_size: int, rng: Optional[np.random.Generator] = None) -> List[np.ndarray]:
    """Split range(count) into batches, shuffled when rng is given; the last batch may be short"""
    order = rng.permutation(count) if rng is not None else np.arange(count)
    return [order[i:i + batch_size] for i in range(0, count, batch_size)]
