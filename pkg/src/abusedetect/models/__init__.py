from .classifier import CLASSES, Predictions, TrainedModel, decide, predict, set_reproducible, train
from .config import (
    DEFAULT_FEATURES,
    TABLE_ORDER,
    BaselineConfig,
    FeatureConfig,
    HybridModelConfig,
    ModelConfig,
    ModelKind,
    toy_config,
)
from .ops import (
    ConvLayerSpec,
    HeadParams,
    HybridParams,
    LstmParams,
    LstmState,
    conv1d_ngram,
    conv1d_same,
    dense_softmax,
    hybrid_forward,
    lstm_sequence,
    lstm_step,
    max_pool,
    relu,
    softmax,
)
from .persistence import load_model, save_model

__all__ = [
    "CLASSES", "Predictions", "TrainedModel", "decide", "predict", "set_reproducible", "train",
    "DEFAULT_FEATURES", "TABLE_ORDER", "BaselineConfig", "FeatureConfig", "HybridModelConfig",
    "ModelConfig", "ModelKind", "toy_config",
    "ConvLayerSpec", "HeadParams", "HybridParams", "LstmParams", "LstmState", "conv1d_ngram",
    "conv1d_same", "dense_softmax", "hybrid_forward", "lstm_sequence", "lstm_step", "max_pool",
    "relu", "softmax", "load_model", "save_model",
]
