# src/chem/junction_tree.py
"""
Tree decomposition of a molecular graph into substructure clusters.

Clusters are ring systems, non-ring bonds and isolated atoms. Rings come
from a cycle basis (one shortest cycle per non-tree edge of a BFS forest).
Rings sharing three or more atoms, or sharing a bonded atom pair, are merged
into one system so every bond lies in exactly one cluster. The cluster graph
links clusters that share atoms, weighted by the number shared, and a maximum
spanning forest of it gives the tree edges.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Set, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree, shortest_path

from .molecule import MolGraph

logger = logging.getLogger(__name__)

VOCAB_SIZE = 512
TAG_BUCKETS = 64

# tag classes, each owning TAG_BUCKETS consecutive ids
TAG_ISOLATED, TAG_SINGLE, TAG_DOUBLE, TAG_TRIPLE, TAG_AROMATIC = 0, 1, 2, 3, 4
TAG_SMALL_RING, TAG_RING, TAG_LARGE_OR_FUSED = 5, 6, 7
_BOND_TAGS = {"single": TAG_SINGLE, "double": TAG_DOUBLE, "triple": TAG_TRIPLE, "aromatic": TAG_AROMATIC}


@dataclass
class JunctionTree:
    clusters: List[Tuple[int, ...]]
    atom_clusters: List[List[int]]
    tree_edges: List[Tuple[int, int]]
    cluster_types: List[int]
    cluster_kinds: List[str] = field(default_factory=list)

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def first_cluster(self) -> List[int]:
        """Lowest cluster id containing each atom"""
        return [members[0] for members in self.atom_clusters]

    def membership_pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """(atom index, cluster index) for every membership"""
        atoms, clusters = [], []
        for c, members in enumerate(self.clusters):
            atoms.extend(members)
            clusters.extend([c] * len(members))
        return np.asarray(atoms, dtype=np.int64), np.asarray(clusters, dtype=np.int64)

    def to_dict(self) -> Dict[str, object]:
        return {
            "clusters": [list(c) for c in self.clusters],
            "tree_edges": [list(e) for e in self.tree_edges],
            "cluster_types": list(self.cluster_types),
        }


def _adjacency_matrix(graph: MolGraph, skip: Tuple[int, int] = None) -> csr_matrix:
    rows, cols = [], []
    for b in graph.bonds:
        if skip is not None and {b.begin, b.end} == set(skip):
            continue
        rows.extend((b.begin, b.end))
        cols.extend((b.end, b.begin))
    n = graph.num_atoms
    return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def cycle_basis(graph: MolGraph) -> List[Tuple[int, ...]]:
    """One shortest cycle through each non-tree edge of a BFS spanning forest"""
    n = graph.num_atoms
    adjacency = _adjacency_matrix(graph)
    tree_edges: Set[FrozenSet[int]] = set()
    seen = np.zeros(n, dtype=bool)
    for root in range(n):
        if seen[root]:
            continue
        order, predecessors = breadth_first_order(adjacency, root, directed=False, return_predecessors=True)
        seen[order] = True
        for v in order:
            p = predecessors[v]
            if p >= 0:
                tree_edges.add(frozenset((int(p), int(v))))

    rings: List[Tuple[int, ...]] = []
    known: Set[FrozenSet[int]] = set()
    non_tree = [b for b in graph.bonds if b.in_ring and frozenset((b.begin, b.end)) not in tree_edges]
    for b in non_tree:
        _add_shortest_cycle(graph, b.begin, b.end, rings, known)
    # a ring bond whose cycle was shadowed by a duplicate gets its own shortest cycle
    covered = {frozenset(pair) for ring in rings for pair in zip(ring, ring[1:] + ring[:1])}
    for b in graph.bonds:
        if b.in_ring and frozenset((b.begin, b.end)) not in covered:
            ring = _add_shortest_cycle(graph, b.begin, b.end, rings, known)
            if ring:
                covered.update(frozenset(pair) for pair in zip(ring, ring[1:] + ring[:1]))
    return rings


def _add_shortest_cycle(graph: MolGraph, begin: int, end: int,
                        rings: List[Tuple[int, ...]], known: Set[FrozenSet[int]]) -> Tuple[int, ...]:
    reduced = _adjacency_matrix(graph, skip=(begin, end))
    _, predecessors = shortest_path(reduced, directed=False, unweighted=True,
                                    indices=begin, return_predecessors=True)
    path = [end]
    while path[-1] != begin:
        step = predecessors[path[-1]]
        if step < 0:
            return ()
        path.append(int(step))
    key = frozenset(path)
    if key not in known:
        known.add(key)
        rings.append(tuple(path))
    return tuple(path)


def _merge_rings(graph: MolGraph, rings: List[Tuple[int, ...]]) -> List[Tuple[FrozenSet[int], int]]:
    """Merge rings sharing >= 3 atoms or a bonded pair; returns (atoms, ring count) per system"""
    systems = [(frozenset(r), 1) for r in rings]
    changed = True
    while changed:
        changed = False
        for i in range(len(systems)):
            for j in range(i + 1, len(systems)):
                shared = systems[i][0] & systems[j][0]
                bonded = len(shared) == 2 and graph.has_bond(*sorted(shared))
                if len(shared) >= 3 or bonded:
                    merged = (systems[i][0] | systems[j][0], systems[i][1] + systems[j][1])
                    systems = [s for k, s in enumerate(systems) if k not in (i, j)] + [merged]
                    changed = True
                    break
            if changed:
                break
    return systems


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def cluster_signature(graph: MolGraph, members: Tuple[int, ...], kind: str) -> Tuple[int, str]:
    """(tag class, signature text) of a cluster"""
    atoms = sorted((graph.atoms[i].symbol, graph.atoms[i].aromatic) for i in members)
    body = ",".join(f"{s}{'a' if ar else ''}" for s, ar in atoms)
    if kind == "atom":
        tag = TAG_ISOLATED
    elif kind == "bond":
        tag = _BOND_TAGS[graph.bond(*members).order]
    elif kind == "ring":
        size = len(members)
        tag = TAG_SMALL_RING if size <= 4 else (TAG_RING if size <= 6 else TAG_LARGE_OR_FUSED)
    else:
        tag = TAG_LARGE_OR_FUSED
    return tag, f"{kind}:{len(members)}:{tag}:{body}"


def cluster_type_id(graph: MolGraph, members: Tuple[int, ...], kind: str) -> int:
    """Vocabulary id in [0, 512): tag class block plus a stable hash of the signature"""
    tag, signature = cluster_signature(graph, members, kind)
    return TAG_BUCKETS * tag + _stable_hash(signature) % TAG_BUCKETS


def tree_decompose(graph: MolGraph) -> JunctionTree:
    rings = cycle_basis(graph)
    systems = _merge_rings(graph, rings)
    systems.sort(key=lambda s: min(s[0]))

    clusters: List[Tuple[int, ...]] = []
    kinds: List[str] = []
    for atoms, count in systems:
        clusters.append(tuple(sorted(atoms)))
        kinds.append("ring" if count == 1 else "system")
    for b in graph.bonds:
        if not b.in_ring:
            clusters.append(tuple(sorted((b.begin, b.end))))
            kinds.append("bond")
    for i, atom in enumerate(graph.atoms):
        if atom.degree == 0:
            clusters.append((i,))
            kinds.append("atom")

    # stable order by first atom so cluster ids follow the SMILES
    order = sorted(range(len(clusters)), key=lambda k: (clusters[k][0], len(clusters[k]), clusters[k]))
    clusters = [clusters[k] for k in order]
    kinds = [kinds[k] for k in order]

    atom_clusters: List[List[int]] = [[] for _ in range(graph.num_atoms)]
    for c, members in enumerate(clusters):
        for a in members:
            atom_clusters[a].append(c)

    tree_edges = _spanning_tree(clusters, atom_clusters)
    types = [cluster_type_id(graph, members, kind) for members, kind in zip(clusters, kinds)]
    return JunctionTree(clusters=clusters, atom_clusters=atom_clusters, tree_edges=tree_edges,
                        cluster_types=types, cluster_kinds=kinds)


def _spanning_tree(clusters: List[Tuple[int, ...]], atom_clusters: List[List[int]]) -> List[Tuple[int, int]]:
    count = len(clusters)
    if count < 2:
        return []
    weights: Dict[Tuple[int, int], int] = {}
    for members in atom_clusters:
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                key = (members[x], members[y])
                weights[key] = weights.get(key, 0) + 1
    if not weights:
        return []
    top = max(weights.values())
    rows = [k[0] for k in weights]
    cols = [k[1] for k in weights]
    # maximum spanning forest as a minimum one over inverted positive weights
    costs = [top + 1 - w for w in weights.values()]
    forest = minimum_spanning_tree(csr_matrix((costs, (rows, cols)), shape=(count, count))).tocoo()
    return sorted((int(min(i, j)), int(max(i, j))) for i, j in zip(forest.row, forest.col))


def check_tree(graph: MolGraph, tree: JunctionTree) -> List[str]:
    """Invariant violations: atom coverage, unique bond coverage, forest shape"""
    problems: List[str] = []
    for a, members in enumerate(tree.atom_clusters):
        if not members:
            problems.append(f"atom {a} in no cluster")
    cluster_sets = [set(c) for c in tree.clusters]
    for b in graph.bonds:
        holders = [k for k, s in enumerate(cluster_sets) if b.begin in s and b.end in s]
        if len(holders) != 1:
            problems.append(f"bond {b.begin}-{b.end} in {len(holders)} clusters")
    # forest: edges = clusters - components of the cluster graph
    parent = list(range(tree.num_clusters))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in tree.tree_edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            problems.append(f"tree edge {i}-{j} closes a cycle")
        parent[ri] = rj
    components = len(graph.components())
    if tree.num_clusters - len(tree.tree_edges) != components:
        problems.append(f"{tree.num_clusters} clusters, {len(tree.tree_edges)} edges, {components} components")
    return problems
