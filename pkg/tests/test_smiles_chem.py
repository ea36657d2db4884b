# tests/test_smiles_chem.py
import time

import numpy as np
import pytest

from chem.featurizer import ATOM_FEATURE_DIM, BLOCK_SIZES, block_sums, featurize_atoms, featurize_bonds, hybridization
from chem.isomorphism import graphs_isomorphic
from chem.junction_tree import (TAG_BUCKETS, TAG_LARGE_OR_FUSED, TAG_RING, TAG_SINGLE, VOCAB_SIZE, check_tree,
                                cluster_type_id, tree_decompose)
from chem.smiles_parser import parse_smiles
from chem.smiles_writer import write_smiles
from core.errors import (SmilesParseError, UnknownTokenError, UnmatchedParenthesisError, UnmatchedRingClosureError,
                         ValenceOverflowError)
from data_loaders.desk_corpus import DESK_SMILES

from conftest import BENZENE, CAFFEINE, TOLUENE

OFFSETS = np.cumsum((0,) + BLOCK_SIZES)
DEGREE, HYDROGENS, HYBRID, AROMATIC = OFFSETS[1], OFFSETS[2], OFFSETS[5], OFFSETS[6]


class TestParser:
    def test_ethanol(self):
        g = parse_smiles("CCO")
        assert g.num_atoms == 3 and g.num_bonds == 2
        assert all(b.order == "single" and not b.in_ring for b in g.bonds)
        assert [a.hydrogens for a in g.atoms] == [3, 2, 1]

    def test_cyclopropane(self):
        g = parse_smiles("C1CC1")
        assert g.num_atoms == 3 and g.num_bonds == 3
        assert all(b.in_ring for b in g.bonds)

    def test_benzene(self):
        g = parse_smiles(BENZENE)
        assert g.num_atoms == 6
        assert all(a.aromatic and a.hydrogens == 1 for a in g.atoms)
        assert g.num_bonds == 6
        assert all(b.order == "aromatic" and b.in_ring for b in g.bonds)

    def test_two_digit_ring_closure(self):
        g = parse_smiles("C%12CC%12")
        assert g.num_bonds == 3 and all(b.in_ring for b in g.bonds)

    def test_bracket_atoms(self):
        g = parse_smiles("[NH4+].[O-]C(=O)C")
        ammonium, oxide = g.atoms[0], g.atoms[1]
        assert (ammonium.symbol, ammonium.hydrogens, ammonium.charge) == ("N", 4, 1)
        assert (oxide.charge, oxide.hydrogens) == (-1, 0)
        assert len(g.components()) == 2

    def test_aromatic_bracket_hydrogen(self):
        g = parse_smiles("c1ccc2[nH]ccc2c1")
        nitrogen = next(a for a in g.atoms if a.symbol == "N")
        assert nitrogen.aromatic and nitrogen.hydrogens == 1

    def test_stereo_marks_are_dropped(self):
        plain = parse_smiles("CC(O)F")
        marked = parse_smiles("C[C@@H](O)F")
        assert graphs_isomorphic(plain, marked)
        assert parse_smiles("F/C=C/F").num_bonds == 3

    def test_explicit_bond_symbols(self):
        g = parse_smiles("C=CC#N")
        assert [b.order for b in g.bonds] == ["double", "single", "triple"]

    def test_degree_matches_adjacency(self):
        g = parse_smiles(CAFFEINE)
        assert all(a.degree == len(g.adjacency[i]) for i, a in enumerate(g.atoms))

    @pytest.mark.parametrize("smiles, error, offset", [
        ("C1CC", UnmatchedRingClosureError, 1),
        ("CC(C", UnmatchedParenthesisError, 2),
        ("CC)C", UnmatchedParenthesisError, 2),
        ("CQ", UnknownTokenError, 1),
        ("C[Xx]", UnknownTokenError, 1),
        ("FC(F)(F)(F)F", ValenceOverflowError, 1),
    ])
    def test_errors_carry_offset(self, smiles, error, offset):
        with pytest.raises(error) as info:
            parse_smiles(smiles)
        assert info.value.offset == offset
        assert isinstance(info.value, SmilesParseError)
        assert f"byte {offset}" in str(info.value)


class TestFeaturizer:
    def test_methane(self):
        row = featurize_atoms(parse_smiles("C"))[0]
        assert row[DEGREE + 0] == 1.0
        assert row[HYDROGENS + 4] == 1.0
        assert row[AROMATIC] == 0.0

    def test_benzene_carbon(self):
        g = parse_smiles(BENZENE)
        row = featurize_atoms(g)[0]
        assert row[AROMATIC] == 1.0
        assert hybridization(g, 0) == "sp2"
        assert row[HYBRID + 1] == 1.0

    def test_hybridization_rules(self):
        g = parse_smiles("CC#N")
        assert [hybridization(g, i) for i in range(3)] == ["sp3", "sp", "sp"]
        allene = parse_smiles("C=C=C")
        assert hybridization(allene, 1) == "sp"
        assert hybridization(parse_smiles("[Na+]"), 0) == "other"

    def test_width_and_blocks_on_corpus(self):
        for smiles in DESK_SMILES.values():
            feats = featurize_atoms(parse_smiles(smiles))
            assert feats.shape[1] == ATOM_FEATURE_DIM == 43
            np.testing.assert_array_equal(block_sums(feats), 1.0)

    def test_out_of_range_values_clamp(self):
        feats = featurize_atoms(parse_smiles("[Fe+3]"))
        assert feats[0, OFFSETS[4] + 4] == 1.0
        np.testing.assert_array_equal(block_sums(feats), 1.0)

    @pytest.mark.parametrize("smiles, expected", [
        ("CC", [1, 0, 0, 0, 0]),
        (BENZENE, [0, 0, 0, 1, 1]),
        ("C=C", [0, 1, 0, 0, 0]),
    ])
    def test_bond_features(self, smiles, expected):
        np.testing.assert_array_equal(featurize_bonds(parse_smiles(smiles))[0], expected)


class TestJunctionTree:
    def test_single_bond(self):
        tree = tree_decompose(parse_smiles("CC"))
        assert tree.clusters == [(0, 1)] and tree.tree_edges == []

    def test_toluene(self):
        g = parse_smiles(TOLUENE)
        tree = tree_decompose(g)
        assert sorted(len(c) for c in tree.clusters) == [2, 6]
        assert len(tree.tree_edges) == 1
        i, j = tree.tree_edges[0]
        assert len(set(tree.clusters[i]) & set(tree.clusters[j])) == 1

    def test_caffeine_invariants(self):
        g = parse_smiles(CAFFEINE)
        tree = tree_decompose(g)
        assert check_tree(g, tree) == []
        # brute-force coverage scan
        covered = set().union(*map(set, tree.clusters))
        assert covered == set(range(g.num_atoms))
        for b in g.bonds:
            assert sum(b.begin in c and b.end in c for c in tree.clusters) == 1

    def test_fused_rings_merge(self):
        tree = tree_decompose(parse_smiles("c1ccc2ccccc2c1"))
        assert tree.clusters == [tuple(range(10))]
        assert tree.cluster_kinds == ["system"]

    def test_spiro_rings_stay_apart(self):
        g = parse_smiles("C1CCC2(CC1)CCCC2")
        tree = tree_decompose(g)
        rings = [c for c, kind in zip(tree.clusters, tree.cluster_kinds) if kind == "ring"]
        assert sorted(len(r) for r in rings) == [5, 6]
        assert len(set(rings[0]) & set(rings[1])) == 1
        assert check_tree(g, tree) == []

    def test_disconnected_parts_form_a_forest(self):
        g = parse_smiles("CC(=O)[O-].[Na+]")
        tree = tree_decompose(g)
        assert "atom" in tree.cluster_kinds
        assert tree.num_clusters - len(tree.tree_edges) == 2
        assert check_tree(g, tree) == []

    def test_corpus_invariants(self):
        started = time.perf_counter()
        corpus = list(DESK_SMILES.values()) + [CAFFEINE]
        assert len(corpus) >= 50
        for smiles in corpus:
            g = parse_smiles(smiles)
            assert check_tree(g, tree_decompose(g)) == [], smiles
        assert time.perf_counter() - started < 5.0

    def test_first_cluster_is_lowest_id(self):
        tree = tree_decompose(parse_smiles(TOLUENE))
        assert tree.first_cluster() == [min(m) for m in tree.atom_clusters]


class TestClusterTypes:
    def test_benzene_ring_shared_across_molecules(self):
        benzene = parse_smiles(BENZENE)
        toluene = parse_smiles(TOLUENE)
        ring = next(c for c in tree_decompose(toluene).clusters if len(c) == 6)
        assert cluster_type_id(benzene, tuple(range(6)), "ring") == cluster_type_id(toluene, ring, "ring")

    def test_bond_order_changes_id(self):
        single = cluster_type_id(parse_smiles("CC"), (0, 1), "bond")
        double = cluster_type_id(parse_smiles("C=C"), (0, 1), "bond")
        assert single != double
        assert single // TAG_BUCKETS == TAG_SINGLE

    def test_tag_blocks(self):
        assert cluster_type_id(parse_smiles(BENZENE), tuple(range(6)), "ring") // TAG_BUCKETS == TAG_RING
        naphthalene = parse_smiles("c1ccc2ccccc2c1")
        assert cluster_type_id(naphthalene, tuple(range(10)), "system") // TAG_BUCKETS == TAG_LARGE_OR_FUSED

    def test_ids_in_vocabulary(self):
        for smiles in DESK_SMILES.values():
            assert all(0 <= t < VOCAB_SIZE for t in tree_decompose(parse_smiles(smiles)).cluster_types)


class TestRoundTrip:
    def test_writer_round_trip_is_isomorphic(self):
        for name, smiles in DESK_SMILES.items():
            g = parse_smiles(smiles)
            if g.num_atoms > 30:
                continue
            again = parse_smiles(write_smiles(g))
            assert graphs_isomorphic(g, again), f"{name}: {smiles} -> {write_smiles(g)}"

    def test_caffeine_round_trip(self):
        g = parse_smiles(CAFFEINE)
        again = parse_smiles(write_smiles(g))
        assert again.num_atoms == 14 and graphs_isomorphic(g, again)

    def test_non_isomorphic_pairs(self):
        assert not graphs_isomorphic(parse_smiles("CCO"), parse_smiles("COC"))
        assert not graphs_isomorphic(parse_smiles("CC=C"), parse_smiles("CCC"))
        assert graphs_isomorphic(parse_smiles("OCC"), parse_smiles("CCO"))
