# src/core/errors.py
"""
Exception hierarchy for the HiF-DTA system.

Every failure the package raises on purpose derives from HifdtaError, so the
CLI can report it cleanly and exit non-zero. Value-type failures also derive
from the builtin ValueError.
"""

from typing import Iterable, Optional, Sequence


class HifdtaError(Exception):
    """Base class for all expected failures"""


class UsageError(HifdtaError, ValueError):
    """An API or CLI entry point was called incorrectly"""


class DimensionError(HifdtaError, ValueError):
    """Operand shapes are incompatible for a tensor op"""

    def __init__(self, op: str, *shapes: Sequence[int], detail: str = ""):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        shape_text = " vs ".join(str(s) for s in self.shapes)
        message = f"{op}: incompatible shapes {shape_text}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class NumericError(HifdtaError, ArithmeticError):
    """A forward op produced NaN or Inf"""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        message = f"{op}: non-finite values in output"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class DomainError(HifdtaError, ValueError):
    """Argument outside the mathematical domain of a transform"""


class MetricUndefinedError(HifdtaError, ValueError):
    """A metric has no defined value for the given inputs"""


# --- SMILES parsing -------------------------------------------------------

class SmilesParseError(HifdtaError, ValueError):
    """Base class for SMILES syntax and valence failures"""

    kind = "parse error"

    def __init__(self, smiles: str, offset: int, detail: str = ""):
        self.smiles = smiles
        self.offset = offset
        message = f"{self.kind} at byte {offset} in {smiles!r}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class UnmatchedRingClosureError(SmilesParseError):
    kind = "unmatched ring closure"


class UnmatchedParenthesisError(SmilesParseError):
    kind = "unmatched parenthesis"


class UnknownTokenError(SmilesParseError):
    kind = "unknown token"


class ValenceOverflowError(SmilesParseError):
    kind = "valence overflow"


# --- Embedding store --------------------------------------------------------

class EmbeddingFormatError(HifdtaError, ValueError):
    """Base class for malformed embedding/contact files"""

    kind = "bad embedding file"

    def __init__(self, protein_id: str, detail: str = ""):
        self.protein_id = protein_id
        message = f"{self.kind} for protein {protein_id!r}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class BadMagicError(EmbeddingFormatError):
    kind = "bad magic"


class ShapeMismatchError(EmbeddingFormatError):
    kind = "shape mismatch"


class NonFiniteError(EmbeddingFormatError):
    kind = "non-finite values"


class AsymmetricContactError(EmbeddingFormatError):
    kind = "asymmetric contact map"


class MissingEmbeddingError(HifdtaError, FileNotFoundError):
    """One or more proteins have no embedding/contact files"""

    def __init__(self, protein_ids: Iterable[str]):
        self.protein_ids = sorted(set(protein_ids))
        preview = ", ".join(self.protein_ids[:10])
        more = f" (+{len(self.protein_ids) - 10} more)" if len(self.protein_ids) > 10 else ""
        super().__init__(f"missing embeddings for {len(self.protein_ids)} protein(s): {preview}{more}")


# --- Dataset / checkpoint ---------------------------------------------------

class DatasetFormatError(HifdtaError, ValueError):
    """Malformed dataset row or header"""

    def __init__(self, path: str, line: Optional[int], detail: str):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {detail}")


class CheckpointVersionError(HifdtaError, ValueError):
    """Unknown checkpoint version or architecture mismatch"""
