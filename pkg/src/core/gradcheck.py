# src/core/gradcheck.py
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from data_loaders.embedding_store import stub_contacts, stub_embedding
from data_loaders.feature_cache import drug_sample
from data_loaders.protein_features import protein_sample

from .batch import Batch, collate
from .config import TrainConfig
from .errors import UsageError
from .model import HifDTA
from .tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)


@dataclass
class GradcheckResult:
    """Outcome of one finite-difference comparison"""
    name: str
    max_rel_error: float
    coords_checked: int
    worst_param: Optional[str] = None
    per_param: Dict[str, float] = field(default_factory=dict)

    def passed(self, tolerance: float = 1e-5) -> bool:
        return self.max_rel_error < tolerance


def finite_diff_report(f: Callable[[], Tensor],
                       params: Union[Mapping[str, Tensor], Sequence[Tensor]],
                       h: float = 1e-6,
                       max_coords: Optional[int] = None,
                       seed: int = 0,
                       name: str = "f") -> GradcheckResult:
    """
    Compare the tape gradient of a scalar f() against central differences.

    `max_coords` limits how many coordinates of each parameter are probed
    (sampled without replacement); None probes all of them.
    """
    named = dict(params) if isinstance(params, Mapping) else {f"p{i}": p for i, p in enumerate(params)}
    for p in named.values():
        p.grad = None
    backward(f())
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for k, p in named.items()}

    rng = np.random.default_rng(seed)
    worst, worst_name, checked = 0.0, None, 0
    per_param: Dict[str, float] = {}
    with no_grad():
        for key, p in named.items():
            flat = p.data.reshape(-1)
            if flat.size and not np.shares_memory(flat, p.data):
                raise UsageError(f"parameter {key} is not contiguous")
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
            grad_flat = analytic[key].reshape(-1)
            param_worst = 0.0
            for i in coords:
                original = flat[i]
                flat[i] = original + h
                plus = f().item()
                flat[i] = original - h
                minus = f().item()
                flat[i] = original
                numeric = (plus - minus) / (2.0 * h)
                err = abs(grad_flat[i] - numeric) / max(1.0, abs(numeric))
                param_worst = max(param_worst, err)
            checked += len(coords)
            per_param[key] = param_worst
            if worst_name is None or param_worst > worst:
                worst, worst_name = param_worst, key

    logger.debug(f"🧪 gradcheck {name}: max rel err {worst:.3e} over {checked} coords")
    return GradcheckResult(name=name, max_rel_error=worst, coords_checked=checked,
                           worst_param=worst_name, per_param=per_param)


def finite_diff_check(f: Callable[[], Tensor],
                      params: Union[Mapping[str, Tensor], Sequence[Tensor]],
                      h: float = 1e-6,
                      max_coords: Optional[int] = None,
                      seed: int = 0) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |central difference|)"""
    return finite_diff_report(f, params, h=h, max_coords=max_coords, seed=seed).max_rel_error


def summarize(results: List[GradcheckResult], tolerance: float = 1e-5) -> Dict[str, object]:
    return {
        "tolerance": tolerance,
        "passed": all(r.passed(tolerance) for r in results),
        "max_rel_error": max((r.max_rel_error for r in results), default=0.0),
        "checks": [
            {"name": r.name, "max_rel_error": r.max_rel_error, "coords": r.coords_checked,
             "worst_param": r.worst_param, "passed": r.passed(tolerance)}
            for r in results
        ],
    }


# --- suite over the composed modules on a two-pair toy batch ---

TOY_DRUGS = ("CC(=O)Oc1ccccc1C(=O)O", "c1ccncc1")
TOY_PROTEINS = (("TOY1", "MKVLAG"), ("TOY2", "GSHMDFGKE"))


def toy_config(**overrides) -> TrainConfig:
    base = dict(hidden_channels=8, drug_heads=2, fusion_heads=2, dropout=0.0, total_layer=1,
                cluster_sizes=(4, 3, 2), ssm_state=3, esm_dim=6, rbf_centers=4, rbf_width=0.2)
    base.update(overrides)
    return TrainConfig(**base)


def toy_batch(config: TrainConfig, seed: int = 0) -> Batch:
    drugs = [drug_sample(s) for s in TOY_DRUGS]
    prots = [protein_sample(seq, stub_embedding(pid, seq, config.esm_dim, seed), stub_contacts(pid, len(seq), seed), config)
             for pid, seq in TOY_PROTEINS]
    return collate(drugs, prots, [6.5, 8.25])


def run_gradient_suite(seed: int = 0, max_coords: Optional[int] = 6, h: float = 1e-6) -> List[GradcheckResult]:
    """Finite-difference checks for each composed module and for the full loss"""
    config = toy_config(seed=seed)
    batch = toy_batch(config, seed)
    model = HifDTA(config)
    model.eval()
    rng = np.random.default_rng(seed)
    results: List[GradcheckResult] = []

    def check(name: str, f: Callable[[], Tensor], params: Mapping[str, Tensor]) -> None:
        results.append(finite_diff_report(f, params, h=h, max_coords=max_coords, seed=seed, name=name))

    proj = rng.normal(size=(batch.drug.num_molecules, config.hidden_channels))
    check("drug_encoder", lambda: (model.drug(batch.drug).molecules * proj).sum(), model.drug.parameters())

    d = config.hidden_channels
    x = Tensor(rng.normal(size=(2, 5, d)))
    mask = np.array([[True] * 5, [True, True, True, False, False]])
    w_ssm = rng.normal(size=(2, 5, d))
    check("selective_ssm", lambda: (model.protein.ssm(x, mask) * w_ssm).sum(), model.protein.ssm.parameters())

    adjacency = (rng.random((2, 5, 5)) > 0.5).astype(np.float64)
    adjacency = np.triu(adjacency, 1) + np.triu(adjacency, 1).transpose(0, 2, 1)
    level = model.protein.clusters.levels[0]
    w_pool = rng.normal(size=(2, level.clusters, d))

    def mincut_objective() -> Tensor:
        out = level(x, adjacency, mask)
        return (out.features * w_pool).sum() + out.cut_loss + out.ortho_loss

    check("mincut_level", mincut_objective, level.parameters())

    block = model.fusion.blocks[0]
    v = Tensor(rng.normal(size=(2, 4, d)))
    v_mask = np.array([[True] * 4, [True, True, False, False]])
    r = Tensor(rng.normal(size=(2, 3, d)))
    r_mask = np.ones((2, 3), dtype=bool)
    w_r, w_v = rng.normal(size=(2, 3, d)), rng.normal(size=(2, 4, d))

    def fusion_objective() -> Tensor:
        out = block(v, v_mask, r, r_mask)
        return (out.residues * w_r).sum() + (out.drug * w_v).sum()

    check("bilinear_fusion", fusion_objective, block.parameters())

    p = Tensor(rng.normal(size=(2, d)))
    q = Tensor(rng.normal(size=(2, d)))
    w_head = rng.normal(size=2)
    check("affinity_head", lambda: (model.head(p, q) * w_head).sum(), model.head.parameters())

    check("full_loss", lambda: model.loss(batch)[0], model.parameters())
    return results
