"""Model kinds and hyperparameter containers.

A config file is JSON with top-level ``hybrid``, ``baseline`` and
``features`` objects whose keys are the dataclass fields below; unknown
keys are rejected. Values given on the command line override file values.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from ..errors import ContractViolation
from ..features import DEFAULT_MAX_LEN, FeatureKind


class ModelKind(str, Enum):
    NB = "nb"
    LR = "lr"
    SVM = "svm"
    CNN = "cnn"
    LSTM = "lstm"
    CONTEXTUAL_ONLY = "contextual"
    HYBRID = "hybrid"


# Column order of the comparison table.
TABLE_ORDER = [ModelKind.NB, ModelKind.LR, ModelKind.SVM, ModelKind.CNN, ModelKind.LSTM,
               ModelKind.CONTEXTUAL_ONLY, ModelKind.HYBRID]

DEFAULT_FEATURES = {
    ModelKind.NB: FeatureKind.TFIDF,
    ModelKind.LR: FeatureKind.STATIC_W2V,
    ModelKind.SVM: FeatureKind.STATIC_W2V,
    ModelKind.CNN: FeatureKind.STATIC_W2V,
    ModelKind.LSTM: FeatureKind.STATIC_W2V,
    ModelKind.CONTEXTUAL_ONLY: FeatureKind.CONTEXTUAL,
    ModelKind.HYBRID: FeatureKind.CONTEXTUAL,
}

FLAT_KINDS = frozenset({ModelKind.NB, ModelKind.LR, ModelKind.SVM})
NEURAL_KINDS = frozenset(set(ModelKind) - FLAT_KINDS)


@dataclass(frozen=True)
class HybridModelConfig:
    conv_stack: tuple[int, ...] = (512, 256, 128)
    kernel_size: int = 3
    lstm_hidden: int = 500
    dense_hidden: int = 128
    n_classes: int = 2
    learning_rate: float = 1e-3
    encoder_learning_rate: float = 2e-5
    batch_size: int = 32
    epochs: int = 3
    fine_tune: bool = False

    def __post_init__(self):
        object.__setattr__(self, "conv_stack", tuple(int(c) for c in self.conv_stack))
        if not self.conv_stack or min(self.conv_stack) < 1:
            raise ContractViolation("conv_stack must be a non-empty list of positive filter counts")
        if self.n_classes < 2:
            raise ContractViolation("n_classes must be >= 2")
        if self.kernel_size < 1 or self.lstm_hidden < 1 or self.dense_hidden < 1:
            raise ContractViolation("layer sizes must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractViolation("batch_size and epochs must be positive")


@dataclass(frozen=True)
class BaselineConfig:
    nb_alpha: float = 1.0
    lr_c: float = 1.0
    svm_c: float = 1.0
    svm_kernel: str = "linear"
    cnn_filters: int = 128
    cnn_kernel: int = 3
    lstm_hidden: int = 128
    tfidf_projection: int = 128

    def __post_init__(self):
        if self.svm_kernel not in ("linear", "rbf"):
            raise ContractViolation(f"svm_kernel must be 'linear' or 'rbf', got {self.svm_kernel!r}")


@dataclass(frozen=True)
class FeatureConfig:
    max_len: int = DEFAULT_MAX_LEN
    tfidf_max_features: int = 50_000
    w2v_dim: int = 300
    w2v_epochs: int = 5
    encoder: str = "bert-base-uncased"


@dataclass(frozen=True)
class ModelConfig:
    hybrid: HybridModelConfig = field(default_factory=HybridModelConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hybrid"]["conv_stack"] = list(self.hybrid.conv_stack)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelConfig":
        unknown = set(d) - {"hybrid", "baseline", "features"}
        if unknown:
            raise ContractViolation(f"unknown config section(s): {sorted(unknown)}")
        return cls(
            hybrid=_build(HybridModelConfig, d.get("hybrid", {})),
            baseline=_build(BaselineConfig, d.get("baseline", {})),
            features=_build(FeatureConfig, d.get("features", {})),
        )

    @classmethod
    def from_file(cls, path) -> "ModelConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **sections: Mapping[str, Any]) -> "ModelConfig":
        """Return a copy with per-section field overrides, e.g. ``override(hybrid={"epochs": 5})``."""
        return ModelConfig(
            hybrid=dataclasses.replace(self.hybrid, **sections.get("hybrid", {})),
            baseline=dataclasses.replace(self.baseline, **sections.get("baseline", {})),
            features=dataclasses.replace(self.features, **sections.get("features", {})),
        )


def _build(klass, values: Mapping[str, Any]):
    names = {f.name for f in dataclasses.fields(klass)}
    unknown = set(values) - names
    if unknown:
        raise ContractViolation(f"unknown {klass.__name__} key(s): {sorted(unknown)}")
    return klass(**values)


def toy_config(dim_hint: str = "random:32") -> ModelConfig:
    """Small widths for desk-scale runs: conv [32, 16, 8], LSTM 32, 32-dim random embeddings."""
    return ModelConfig(
        hybrid=HybridModelConfig(conv_stack=(32, 16, 8), lstm_hidden=32, dense_hidden=16, epochs=8,
                                 batch_size=16, learning_rate=3e-3),
        baseline=BaselineConfig(cnn_filters=16, lstm_hidden=16, tfidf_projection=16),
        features=FeatureConfig(max_len=64, w2v_dim=32, w2v_epochs=10, encoder=dim_hint),
    )
