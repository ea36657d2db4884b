# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from core.gradcheck import toy_batch, toy_config  # noqa: E402
from data_loaders.data_loader import AffinityRecord  # noqa: E402
from data_loaders.desk_corpus import generate_desk_dataset  # noqa: E402
from data_loaders.embedding_store import EmbeddingStore  # noqa: E402

BENZENE = "c1ccccc1"
TOLUENE = "Cc1ccccc1"
CAFFEINE = "CN1C=NC2=C1C(=O)N(C(=O)N2C)C"


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_config():
    """Tiny architecture: dropout off, d=8, clusters 4→3→2, esm width 6"""
    return toy_config()


@pytest.fixture
def small_batch(small_config):
    return toy_batch(small_config, seed=0)


@pytest.fixture
def desk_records():
    return generate_desk_dataset(24, seed=3, n_proteins=4, length_range=(12, 20))


@pytest.fixture
def toy_records():
    return [
        AffinityRecord("D1", "CCO", "P1", "MKVLAGHE", 5000.0),
        AffinityRecord("D2", "c1ccccc1O", "P1", "MKVLAGHE", 1.0),
        AffinityRecord("D1", "CCO", "P2", "GSHMDFGKEQ", 1e9),
    ]


@pytest.fixture
def stub_store(tmp_path, small_config):
    return EmbeddingStore(tmp_path / "embeddings", small_config.esm_dim)


def write_tsv(path: Path, rows, header="drug_id\tsmiles\tprotein_id\tsequence\taffinity") -> Path:
    path.write_text("\n".join([header, *("\t".join(map(str, r)) for r in rows)]) + "\n")
    return path
