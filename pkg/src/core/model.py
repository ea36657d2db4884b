# src/core/model.py
"""
The full affinity model: drug encoder, protein encoder with residue
clustering, multi-scale bilinear fusion, attentive pooling and the head.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .batch import Batch, DrugSample, ProtSample
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config, save_config
from .drug_encoder import DrugEncoder, DrugScales
from .errors import CheckpointVersionError, UsageError
from .fusion import MultiScaleFusion, ScaleAttention
from .layers import Module
from .pna import degree_statistics
from .predictor import AffinityHead, DrugPool, ProteinPool
from .protein_encoder import ProteinEncoder, ProteinOutput, from_dense, to_dense
from .rng import SeededRng
from .tensor import Tensor, reshape

logger = logging.getLogger(__name__)

META_KEYS = ("hidden_channels", "drug_heads", "fusion_heads", "esm_dim", "ssm_state", "bilinear_k")


@dataclass
class ModelOutput:
    prediction: Tensor                      # B
    aux_loss: Tensor                        # scalar, summed mincut losses
    drug: DrugScales
    protein: ProteinOutput
    attention: Dict[str, ScaleAttention] = field(default_factory=dict)
    residue_weights: Optional[Tensor] = None
    atom_weights: Optional[Tensor] = None


class HifDTA(Module):
    def __init__(self, config: TrainConfig, seed: Optional[int] = None):
        self.config = config
        self.seed = config.seed if seed is None else seed
        seeded = SeededRng(self.seed)
        rng = seeded.generator("init")
        d = config.hidden_channels
        self.drug = DrugEncoder(config, rng, seeded)
        self.protein = ProteinEncoder(config, rng)
        self.fusion = MultiScaleFusion(config, rng)
        self.protein_pool = ProteinPool(d, rng)
        self.drug_pool = DrugPool(d, rng)
        self.head = AffinityHead(config, rng, seeded)
        logger.debug(f"🧱 model built: {self.num_parameters()} parameters, ablation '{config.ablation.to_spec()}'")

    # --- statistics fitted on the training fold ---
    def fit_statistics(self, drugs: Sequence[DrugSample], proteins: Sequence[ProtSample]) -> None:
        if self.drug.pna is not None:
            degrees = [np.bincount(s.edge_index[1], minlength=s.num_atoms) for s in drugs]
            self.drug.pna.set_degree_statistics(*degree_statistics(degrees))
        if self.protein.pna is not None:
            degrees = [np.bincount(s.edge_index[1], minlength=s.num_residues) for s in proteins]
            self.protein.pna.set_degree_statistics(*degree_statistics(degrees))
        if proteins:
            table = np.concatenate([s.physchem for s in proteins], axis=0)
            self.protein.project.set_physchem_statistics(table.mean(axis=0), table.std(axis=0))

    def forward(self, batch: Batch) -> ModelOutput:
        db = batch.drug
        scales = self.drug(db)
        prot = self.protein(batch.prot)
        final = prot.hierarchy.final
        cluster_mask = np.ones(final.features.shape[:2], dtype=bool)
        B, d = db.num_molecules, self.config.hidden_channels

        inputs = {
            "atom": (to_dense(scales.atoms, db.atoms), db.atoms.mask),
            "sub": (to_dense(scales.clusters, db.clusters), db.clusters.mask),
            "mol": (reshape(scales.molecules, (B, 1, d)), np.ones((B, 1), dtype=bool)),
        }
        fused, attention = self.fusion({k: inputs[k] for k in self.fusion.scale_names}, final.features, cluster_mask)

        atoms = from_dense(attention["atom"].drug, db.atoms) if "atom" in attention else scales.atoms
        clusters = from_dense(attention["sub"].drug, db.clusters) if "sub" in attention else scales.clusters
        molecules = reshape(attention["mol"].drug, (B, d)) if "mol" in attention else scales.molecules

        p, residue_weights = self.protein_pool(fused, prot.hierarchy.composed_assignment(), prot.dense, prot.mask)
        q, atom_weights = self.drug_pool(atoms, clusters, molecules, db)
        prediction = self.head(p, q)
        return ModelOutput(prediction=prediction, aux_loss=prot.hierarchy.aux_loss, drug=scales,
                           protein=prot, attention=attention,
                           residue_weights=residue_weights, atom_weights=atom_weights)

    def loss(self, batch: Batch) -> Tuple[Tensor, Tensor, ModelOutput]:
        """(total, mse, output) with total = MSE + λ_aux · Σ(L_cut + L_ortho)"""
        if batch.labels is None:
            raise UsageError("loss needs a labelled batch")
        out = self.forward(batch)
        residual = out.prediction - batch.labels
        mse = (residual * residual).mean()
        return mse + out.aux_loss * self.config.lambda_aux, mse, out

    # --- persistence ---
    def save(self, path: Union[str, Path]) -> Path:
        state = self.state_dict()
        for key in META_KEYS:
            state[f"meta.{key}"] = np.array(float(getattr(self.config, key)))
        path = save_checkpoint(path, state)
        save_config(self.config, config_sidecar(path))
        return path

    def load_weights(self, path: Union[str, Path]) -> "HifDTA":
        state = load_checkpoint(path)
        for key in META_KEYS:
            stored = state.get(f"meta.{key}")
            expected = getattr(self.config, key)
            if stored is not None and int(stored) != int(expected):
                raise CheckpointVersionError(f"{path}: {key}={int(stored)} in checkpoint, model has {expected}")
        self.load_state_dict(state)
        return self

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path], config: Optional[TrainConfig] = None) -> "HifDTA":
        path = Path(path)
        if config is None:
            sidecar = config_sidecar(path)
            if not sidecar.exists():
                raise CheckpointVersionError(f"{path}: no config sidecar {sidecar.name}")
            config = load_config(sidecar)
        return cls(config).load_weights(path)


def config_sidecar(checkpoint: Union[str, Path]) -> Path:
    checkpoint = Path(checkpoint)
    return checkpoint.with_name(checkpoint.name + ".cfg")
