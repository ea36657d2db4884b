# src/chem/molecule.py
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

logger = logging.getLogger(__name__)

BOND_ORDERS = ("single", "double", "triple", "aromatic")
BOND_VALUE = {"single": 1.0, "double": 2.0, "triple": 3.0, "aromatic": 1.5}

# Standard valences for atoms written without brackets
DEFAULT_VALENCES: Dict[str, Tuple[int, ...]] = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5), "S": (2, 4, 6),
    "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}
ORGANIC_SUBSET = frozenset(DEFAULT_VALENCES)
AROMATIC_ORGANIC = frozenset(("b", "c", "n", "o", "p", "s"))


@dataclass
class Atom:
    symbol: str
    aromatic: bool = False
    charge: int = 0
    hydrogens: int = 0
    bracket: bool = False
    isotope: Optional[int] = None
    atom_class: Optional[int] = None
    degree: int = 0
    offset: int = 0

    @property
    def implicit_hydrogens(self) -> int:
        """Hydrogens inferred from valence rules (bracket atoms state theirs explicitly)"""
        return 0 if self.bracket else self.hydrogens


@dataclass
class Bond:
    begin: int
    end: int
    order: str = "single"
    in_ring: bool = False

    @property
    def value(self) -> float:
        return BOND_VALUE[self.order]

    def other(self, atom: int) -> int:
        return self.end if atom == self.begin else self.begin


@dataclass
class MolGraph:
    """Heavy-atom molecular graph; atoms keep their SMILES order"""
    smiles: str
    atoms: List[Atom] = field(default_factory=list)
    bonds: List[Bond] = field(default_factory=list)
    adjacency: List[List[int]] = field(default_factory=list)

    def __post_init__(self):
        self._bond_index: Dict[Tuple[int, int], int] = {}
        for i, b in enumerate(self.bonds):
            self._bond_index[(min(b.begin, b.end), max(b.begin, b.end))] = i

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        self.adjacency.append([])
        return len(self.atoms) - 1

    def add_bond(self, begin: int, end: int, order: str) -> int:
        key = (min(begin, end), max(begin, end))
        self.bonds.append(Bond(begin, end, order))
        self._bond_index[key] = len(self.bonds) - 1
        self.adjacency[begin].append(end)
        self.adjacency[end].append(begin)
        self.atoms[begin].degree += 1
        self.atoms[end].degree += 1
        return len(self.bonds) - 1

    def bond_id(self, a: int, b: int) -> Optional[int]:
        return self._bond_index.get((min(a, b), max(a, b)))

    def has_bond(self, a: int, b: int) -> bool:
        return self.bond_id(a, b) is not None

    def bond(self, a: int, b: int) -> Bond:
        return self.bonds[self._bond_index[(min(a, b), max(a, b))]]

    def incident_bonds(self, atom: int) -> Iterator[Bond]:
        for nbr in self.adjacency[atom]:
            yield self.bond(atom, nbr)

    def components(self) -> List[List[int]]:
        seen = [False] * self.num_atoms
        comps: List[List[int]] = []
        for start in range(self.num_atoms):
            if seen[start]:
                continue
            comp, stack = [], [start]
            seen[start] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def summary(self) -> Dict[str, int]:
        return {
            "atoms": self.num_atoms,
            "bonds": self.num_bonds,
            "ring_bonds": sum(b.in_ring for b in self.bonds),
            "aromatic_atoms": sum(a.aromatic for a in self.atoms),
        }
