# src/core/config.py
"""
Training configuration.

`TrainConfig` carries the model and schedule hyperparameters with their
published defaults. It round-trips through a flat `key = value` text file
(`#` starts a comment, lists are comma-separated), which is also written next
to every checkpoint so a model can be rebuilt from disk.
"""

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from .errors import UsageError

logger = logging.getLogger(__name__)

SCALES = ("atom", "sub", "mol")
FUSION_MODES = ("bilinear", "concat", "add")


@dataclass(frozen=True)
class Ablation:
    """Architecture switches for the pathway / scale / fusion variants"""
    drug_global_only: bool = False
    drug_local_only: bool = False
    prot_global_only: bool = False
    prot_local_only: bool = False
    scales: Tuple[str, ...] = SCALES
    fusion: str = "bilinear"

    @property
    def drug_uses_global(self) -> bool:
        return not self.drug_local_only

    @property
    def drug_uses_local(self) -> bool:
        return not self.drug_global_only

    @property
    def prot_uses_global(self) -> bool:
        return not self.prot_local_only

    @property
    def prot_uses_local(self) -> bool:
        return not self.prot_global_only

    def to_spec(self) -> str:
        tokens = [name for name in ("drug_global_only", "drug_local_only",
                                    "prot_global_only", "prot_local_only") if getattr(self, name)]
        if tuple(self.scales) != SCALES:
            tokens.append("scales=" + "+".join(self.scales))
        if self.fusion != "bilinear":
            tokens.append(f"fusion={self.fusion}")
        return ",".join(tokens)


def parse_ablation(spec: Optional[str]) -> Ablation:
    """Parse e.g. "drug_global_only,scales=atom+mol,fusion=concat" """
    if not spec or not spec.strip():
        return Ablation()
    flags: Dict[str, Any] = {}
    for raw in spec.split(","):
        token = raw.strip()
        if not token:
            continue
        if token in ("drug_global_only", "drug_local_only", "prot_global_only", "prot_local_only"):
            flags[token] = True
        elif token.startswith("scales="):
            chosen = [s.strip() for s in token[len("scales="):].split("+") if s.strip()]
            unknown = [s for s in chosen if s not in SCALES]
            if not chosen or unknown:
                raise UsageError(f"ablation: bad scales {token!r} (choose from {'+'.join(SCALES)})")
            flags["scales"] = tuple(s for s in SCALES if s in chosen)
        elif token.startswith("fusion="):
            mode = token[len("fusion="):].strip()
            if mode not in FUSION_MODES:
                raise UsageError(f"ablation: unknown fusion {mode!r} (choose from {', '.join(FUSION_MODES)})")
            flags["fusion"] = mode
        else:
            raise UsageError(f"ablation: unknown token {token!r}")
    ablation = Ablation(**flags)
    if ablation.drug_global_only and ablation.drug_local_only:
        raise UsageError("ablation: drug_global_only and drug_local_only are mutually exclusive")
    if ablation.prot_global_only and ablation.prot_local_only:
        raise UsageError("ablation: prot_global_only and prot_local_only are mutually exclusive")
    return ablation


@dataclass(frozen=True)
class TrainConfig:
    # model
    hidden_channels: int = 200
    drug_heads: int = 4
    fusion_heads: int = 4
    dropout: float = 0.2
    total_layer: int = 3
    cluster_sizes: Tuple[int, ...] = (20, 10, 5)
    bilinear_k: int = 1
    ssm_state: int = 16
    esm_dim: int = 1280
    vocab_size: int = 512
    contact_threshold: float = 0.5
    rbf_centers: int = 16
    rbf_width: float = 0.05
    lambda_aux: float = 1.0
    ablation: Ablation = field(default_factory=Ablation)
    # schedule
    lr: float = 1e-3
    lr_decay: float = 5e-4
    lr_decay_epoch: int = 100
    batch_size: int = 64
    max_epochs: int = 400
    patience: int = 100
    grad_clip: float = 0.0
    seed: int = 0
    folds: int = 5
    # data / runtime
    pkd_transform: bool = False
    workers: int = 1
    cache_dir: str = "cache"
    results_dir: str = "results"

    def __post_init__(self):
        if self.hidden_channels <= 0 or self.hidden_channels % 2:
            raise UsageError(f"hidden_channels must be a positive even number, got {self.hidden_channels}")
        for heads_name in ("drug_heads", "fusion_heads"):
            heads = getattr(self, heads_name)
            if heads <= 0 or self.hidden_channels % heads:
                raise UsageError(f"{heads_name}={heads} must divide hidden_channels={self.hidden_channels}")
        if not self.cluster_sizes or any(c <= 0 for c in self.cluster_sizes):
            raise UsageError(f"cluster_sizes must be positive, got {self.cluster_sizes}")
        if list(self.cluster_sizes) != sorted(self.cluster_sizes, reverse=True):
            raise UsageError(f"cluster_sizes must be non-increasing, got {self.cluster_sizes}")
        if not 0.0 <= self.dropout < 1.0:
            raise UsageError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.folds < 2:
            raise UsageError(f"folds must be >= 2, got {self.folds}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for a 1-based epoch"""
        return self.lr if epoch <= self.lr_decay_epoch else self.lr_decay

    def with_overrides(self, **overrides: Any) -> "TrainConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(clean) - {f.name for f in fields(self)}
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return replace(self, **clean)

    def architecture(self) -> Dict[str, Any]:
        """Fields that fix parameter shapes; must match between checkpoint and model"""
        return {
            "hidden_channels": self.hidden_channels,
            "drug_heads": self.drug_heads,
            "fusion_heads": self.fusion_heads,
            "total_layer": self.total_layer,
            "cluster_sizes": tuple(self.cluster_sizes),
            "bilinear_k": self.bilinear_k,
            "ssm_state": self.ssm_state,
            "esm_dim": self.esm_dim,
            "vocab_size": self.vocab_size,
            "rbf_centers": self.rbf_centers,
            "ablation": self.ablation.to_spec(),
        }


def _coerce(name: str, kind: Any, text: str) -> Any:
    text = text.strip()
    try:
        if name == "ablation":
            return parse_ablation(text)
        if name == "cluster_sizes":
            return tuple(int(v) for v in text.split(",") if v.strip())
        if kind is bool or kind == "bool":
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int or kind == "int":
            return int(text)
        if kind is float or kind == "float":
            return float(text)
        return text
    except ValueError:
        raise UsageError(f"config: bad value for {name}: {text!r}") from None


def parse_config_text(text: str, base: Optional[TrainConfig] = None) -> TrainConfig:
    base = base or TrainConfig()
    types = {f.name: f.type for f in fields(TrainConfig)}
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], value)
    return replace(base, **values)


def load_config(path: Union[str, Path], base: Optional[TrainConfig] = None) -> TrainConfig:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    config = parse_config_text(path.read_text(encoding="utf-8"), base)
    logger.info(f"⚙️  loaded config {path}")
    return config


def config_to_text(config: TrainConfig) -> str:
    lines = ["# HiF-DTA training configuration"]
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "ablation":
            value = value.to_spec()
        elif isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def save_config(config: TrainConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config_to_text(config), encoding="utf-8")
    return path
