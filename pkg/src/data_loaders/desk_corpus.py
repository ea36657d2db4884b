# src/data_loaders/desk_corpus.py
"""
Small built-in corpus for desk-scale runs when benchmark files are absent:
a fixed SMILES list and a synthetic Davis-format pair generator with a
smooth hidden affinity function.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from chem.junction_tree import cycle_basis
from chem.smiles_parser import parse_smiles
from core.errors import UsageError

from .data_loader import AffinityRecord
from .protein_features import AMINO_ACIDS

logger = logging.getLogger(__name__)

KINASE_INHIBITORS: Dict[str, str] = {
    "imatinib": "CC1=C(C=C(C=C1)NC(=O)C2=CC=C(C=C2)CN3CCN(CC3)C)NC4=NC=CC(=N4)C5=CN=CC=C5",
    "gefitinib": "COC1=C(C=C2C(=C1)N=CN=C2NC3=CC(=C(C=C3)F)Cl)OCCCN4CCOCC4",
    "erlotinib": "COCCOC1=C(C=C2C(=C1)C(=NC=N2)NC3=CC=CC(=C3)C#C)OCCOC",
    "lapatinib": "CS(=O)(=O)CCNCC1=CC=C(O1)C2=CC3=C(C=C2)N=CN=C3NC4=CC(=C(C=C4)OCC5=CC(=CC=C5)F)Cl",
    "sorafenib": "CNC(=O)C1=NC=CC(=C1)OC2=CC=C(C=C2)NC(=O)NC3=CC(=C(C=C3)Cl)C(F)(F)F",
    "sunitinib": "CCN(CC)CCNC(=O)C1=C(NC(=C1C)/C=C\\2/C3=C(C=CC(=C3)F)NC2=O)C",
    "dasatinib": "CC1=C(C(=CC=C1)Cl)NC(=O)C2=CN=C(S2)NC3=CC(=NC(=N3)C)N4CCN(CC4)CCO",
    "nilotinib": "CC1=CN(C=N1)C2=CC(=CC(=C2)C(F)(F)F)NC(=O)C3=CC(=C(C=C3)C)NC4=NC=CC(=N4)C5=CN=CC=C5",
    "vandetanib": "CN1CCC(CC1)COC2=C(C=C3C(=C2)N=CN=C3NC4=C(C=C(C=C4)Br)F)OC",
    "pazopanib": "CC1=C(C=C(C=C1)NC2=NC=CC(=N2)N(C)C3=CC4=NN(C(=C4C=C3)C)C)S(=O)(=O)N",
    "staurosporine": "CN[C@@H]1C[C@H]2O[C@@](C)([C@@H]1OC)N1C3=CC=CC=C3C3=C4CNC(=O)C4=C4C5=CC=CC=C5N2C4=C13",
    "tofacitinib": "CC1CCN(CC1N(C)C2=NC=NC3=C2C=CN3)C(=O)CC#N",
    "vatalanib": "C1=CC(=CC=C1NC2=NN=C(C3=CC=CC=C32)CC4=CC=NC=C4)Cl",
    "tandutinib": "CC(C)OC1=CC=C(C=C1)NC(=O)N2CCN(CC2)C3=NC=NC4=CC(=C(C=C43)OC)OCCCN5CCCCC5",
    "axitinib": "CNC(=O)C1=CC=CC=C1SC2=CC3=C(C=C2)C(=NN3)/C=C/C4=CC=CC=N4",
    "bosutinib": "CN1CCN(CC1)CCCOC2=C(C=C3C(=C2)N=CC(=C3NC4=CC(=C(C=C4Cl)Cl)OC)C#N)OC",
    "crizotinib": "CC(C1=C(C=CC(=C1Cl)F)Cl)OC2=C(N=CC(=C2)C3=CN(N=C3)C4CCNCC4)N",
    "ruxolitinib": "C1CCC(C1)C(CC#N)N2C=C(C=N2)C3=C4C=CNC4=NC=N3",
    "dovitinib": "CN1CCN(CC1)C2=CC3=C(C=C2)N=C(N3)C4=C(C5=C(C=CC=C5F)NC4=O)N",
    "canertinib": "C=CC(=O)NC1=C(C=C2C(=C1)C(=NC=N2)NC3=CC(=C(C=C3)F)Cl)OCCCN4CCOCC4",
    "tozasertib": "CC1=CC(=NN1)NC2=NC(=NC(=C2)N3CCN(CC3)C)SC4=CC=C(C=C4)NC(=O)C5CC5",
}

SMALL_MOLECULES: Dict[str, str] = {
    "benzene": "c1ccccc1",
    "toluene": "Cc1ccccc1",
    "caffeine": "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "aspirin": "CC(=O)Oc1ccccc1C(=O)O",
    "ethanol": "CCO",
    "naphthalene": "c1ccc2ccccc2c1",
    "ibuprofen": "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "paracetamol": "CC(=O)Nc1ccc(O)cc1",
    "pyridine": "c1ccncc1",
    "indole": "c1ccc2[nH]ccc2c1",
    "cyclohexane": "C1CCCCC1",
    "adamantane": "C1C2CC3CC1CC(C2)C3",
    "spiro_decane": "C1CCC2(CC1)CCCC2",
    "norbornane": "C1CC2CCC1C2",
    "sodium_acetate": "CC(=O)[O-].[Na+]",
    "nicotine": "CN1CCCC1c1cccnc1",
    "quinoline": "c1ccc2ncccc2c1",
    "purine": "c1ncc2nc[nH]c2n1",
    "thiophene": "c1ccsc1",
    "furan": "c1ccoc1",
    "cubane": "C12C3C4C1C5C2C3C45",
    "anthracene": "c1ccc2cc3ccccc3cc2c1",
    "biphenyl": "c1ccc(cc1)-c1ccccc1",
    "acetonitrile": "CC#N",
    "urea": "NC(=O)N",
    "methane": "C",
    "glucose": "OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O",
    "morphine": "CN1CC[C@]23c4c5ccc(O)c4O[C@H]2[C@@H](O)C=C[C@H]3[C@H]1C5",
    "azulene": "c1ccc2cccc2cc1",
    "chlorobenzene": "Clc1ccccc1",
}

DESK_SMILES: Dict[str, str] = {**SMALL_MOLECULES, **KINASE_INHIBITORS}

# motifs shared by protein kinase domains
KINASE_MOTIFS = ("GXGXXG", "VAIK", "HRDLKPEN", "DFG", "APE")


def random_kinase_sequence(rng: np.random.Generator, length: int) -> str:
    """Random background with the conserved kinase motifs spliced in order"""
    letters = np.asarray(list(AMINO_ACIDS))
    body = list(rng.choice(letters, size=length))
    slots = np.sort(rng.choice(np.arange(0, max(length - 8, 1)), size=len(KINASE_MOTIFS), replace=False)) \
        if length > 8 * len(KINASE_MOTIFS) else []
    for motif, start in zip(KINASE_MOTIFS, slots):
        for k, aa in enumerate(motif):
            if start + k < length:
                body[start + k] = str(rng.choice(letters)) if aa == "X" else aa
    return "".join(body)


def drug_descriptor(smiles: str) -> np.ndarray:
    graph = parse_smiles(smiles)
    n = max(graph.num_atoms, 1)
    symbols = [a.symbol for a in graph.atoms]
    return np.array([
        graph.num_atoms / 30.0,
        len(cycle_basis(graph)) / 4.0,
        symbols.count("N") / n,
        symbols.count("O") / n,
        sum(a.aromatic for a in graph.atoms) / n,
        sum(s in ("F", "Cl", "Br", "I") for s in symbols) / n,
    ])


def protein_descriptor(sequence: str) -> np.ndarray:
    n = max(len(sequence), 1)
    return np.array([
        sum(aa in "AILMFVW" for aa in sequence) / n,
        sum(aa in "DEKR" for aa in sequence) / n,
        sum(aa in "FWY" for aa in sequence) / n,
        sum(aa in "STNQ" for aa in sequence) / n,
        len(sequence) / 100.0,
    ])


def generate_desk_dataset(n_pairs: int, seed: int = 0, n_proteins: int = 12,
                          length_range: Sequence[int] = (40, 90), raw_kd: bool = True,
                          drugs: Optional[Dict[str, str]] = None, noise: float = 0.1) -> List[AffinityRecord]:
    """
    Davis-format synthetic pairs. The affinity is a smooth function of simple
    drug and protein descriptors, pK_d = 5 + 4·sigmoid(uᵀ M w) + ε, returned
    as raw K_d in nM when `raw_kd` is set.
    """
    rng = np.random.default_rng(seed)
    drugs = dict(drugs or KINASE_INHIBITORS)
    drug_ids = sorted(drugs)
    proteins = {f"KIN{p:03d}": random_kinase_sequence(rng, int(rng.integers(length_range[0], length_range[1] + 1)))
                for p in range(n_proteins)}
    protein_ids = sorted(proteins)
    u = {d: drug_descriptor(drugs[d]) for d in drug_ids}
    w = {p: protein_descriptor(proteins[p]) for p in protein_ids}
    mixing = rng.normal(0.0, 3.0, size=(6, 5))
    centre = np.mean([u[d] @ mixing @ w[p] for d in drug_ids for p in protein_ids])

    all_pairs = [(d, p) for d in drug_ids for p in protein_ids]
    if n_pairs > len(all_pairs):
        raise UsageError(f"asked for {n_pairs} pairs, only {len(all_pairs)} distinct pairs available")
    chosen = rng.choice(len(all_pairs), size=n_pairs, replace=False)
    records = []
    for idx in sorted(chosen):
        d, p = all_pairs[idx]
        score = u[d] @ mixing @ w[p] - centre
        pkd = 5.0 + 4.0 / (1.0 + np.exp(-score)) + rng.normal(0.0, noise)
        affinity = 10.0 ** (9.0 - pkd) if raw_kd else pkd
        records.append(AffinityRecord(d, drugs[d], p, proteins[p], float(affinity)))
    logger.info(f"🧪 generated {len(records)} synthetic pairs ({len(drug_ids)} drugs × {len(protein_ids)} proteins)")
    return records
