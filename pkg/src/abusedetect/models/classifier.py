"""One classifier interface over the seven model kinds.

``train`` fits the feature model on the training texts only, then the
classifier; ``predict`` returns labels, class probabilities and the
wall-clock prediction time. Probability column 0 is NON_ABUSIVE and
column 1 is ABUSIVE, so ``argmax`` breaks exact ties toward NON_ABUSIVE.
"""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import torch
from torch import nn

from ..corpus import Label
from ..errors import ContractViolation, TrainingError
from ..features import (
    FeatureKind,
    StaticEmbeddings,
    TfidfModel,
    embed_static,
    make_encoder,
)
from .config import FLAT_KINDS, DEFAULT_FEATURES, ModelConfig, ModelKind
from .networks import (
    CnnBody,
    EncoderInput,
    HybridBody,
    LstmBody,
    PooledLinearBody,
    SequenceClassifier,
    TfidfInput,
    VectorInput,
)
from .ops import sigmoid

log = logging.getLogger(__name__)

CLASSES = (Label.NON_ABUSIVE, Label.ABUSIVE)
PREDICT_BATCH = 256


def label_ids(labels: Sequence) -> np.ndarray:
    """Map labels (``Label`` or 0/1) to ``0 = NON_ABUSIVE, 1 = ABUSIVE``."""
    out = []
    for lab in labels:
        if isinstance(lab, Label):
            out.append(1 if lab is Label.ABUSIVE else 0)
        elif lab in (0, 1):
            out.append(int(lab))
        else:
            out.append(1 if Label(lab) is Label.ABUSIVE else 0)
    return np.asarray(out, dtype=np.int64)


def _pad(seqs: list[np.ndarray], dim: int) -> tuple[torch.Tensor, torch.Tensor]:
    n = max(len(s) for s in seqs)
    out = np.zeros((len(seqs), n, dim), dtype=np.float32)
    mask = np.zeros((len(seqs), n), dtype=bool)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
        mask[i, : len(s)] = True
    return torch.from_numpy(out), torch.from_numpy(mask)


class TfidfFeaturizer:
    kind = FeatureKind.TFIDF

    def __init__(self, max_features: int = 50_000, max_len: int = 256, projection: int = 128, model=None):
        self.max_features = max_features
        self.max_len = max_len
        self.projection = projection
        self.model: TfidfModel | None = model

    def fit(self, texts):
        self.model = TfidfModel(max_features=self.max_features).fit(texts)
        return self

    @property
    def flat_dim(self) -> int:
        return self.model.vocab_size

    @property
    def seq_dim(self) -> int:
        return self.projection

    def flat(self, texts):
        return self.model.transform(texts)

    def batch(self, texts) -> dict:
        ids_l, w_l = [], []
        for t in texts:
            ids, w = self.model.token_weights(t)
            ids, w = ids[: self.max_len], w[: self.max_len]
            if len(ids) == 0:
                ids, w = np.zeros(1, np.int64), np.zeros(1)
            else:
                ids = ids + 1  # 0 is padding
            ids_l.append(ids)
            w_l.append(w)
        n = max(len(i) for i in ids_l)
        ids = torch.zeros((len(texts), n), dtype=torch.long)
        weights = torch.zeros((len(texts), n), dtype=torch.float32)
        mask = torch.zeros((len(texts), n), dtype=torch.bool)
        for r, (i, w) in enumerate(zip(ids_l, w_l)):
            ids[r, : len(i)] = torch.from_numpy(i)
            weights[r, : len(w)] = torch.from_numpy(w.astype(np.float32))
            mask[r, : len(i)] = True
        return {"ids": ids, "weights": weights, "mask": mask}

    def input_layer(self) -> nn.Module:
        return TfidfInput(self.model.vocab_size, self.projection)

    def binding(self) -> dict:
        return {"kind": self.kind.value, "max_features": self.max_features, "max_len": self.max_len,
                "projection": self.projection, "vocab_size": self.model.vocab_size}


class W2VFeaturizer:
    kind = FeatureKind.STATIC_W2V

    def __init__(self, dim: int = 300, epochs: int = 5, seed: int = 0, max_len: int = 256, model=None):
        self.dim = dim
        self.epochs = epochs
        self.seed = seed
        self.max_len = max_len
        self.model: StaticEmbeddings | None = model

    def fit(self, texts):
        self.model = StaticEmbeddings.fit(texts, d=self.dim, seed=self.seed, epochs=self.epochs)
        return self

    @property
    def flat_dim(self) -> int:
        return self.dim

    seq_dim = flat_dim

    def flat(self, texts):
        vecs = []
        n_oov = 0
        for t in texts:
            v, all_oov = embed_static(self.model, t)
            n_oov += all_oov
            vecs.append(v)
        if n_oov:
            log.debug("%d text(s) had no in-vocabulary token; zero vector used", n_oov)
        return np.stack(vecs).astype(np.float64) if vecs else np.zeros((0, self.dim))

    def batch(self, texts) -> dict:
        vectors, mask = _pad([self.model.sequence(t)[: self.max_len] for t in texts], self.dim)
        return {"vectors": vectors, "mask": mask}

    def input_layer(self) -> nn.Module:
        return VectorInput()

    def binding(self) -> dict:
        return {"kind": self.kind.value, "dim": self.dim, "epochs": self.epochs, "seed": self.seed,
                "max_len": self.max_len}


class ContextualFeaturizer:
    """Per-token encoder outputs; frozen by default, or ids for a fine-tuned encoder copy."""

    kind = FeatureKind.CONTEXTUAL

    def __init__(self, encoder, max_len: int = 256, fine_tune: bool = False):
        self.encoder = encoder
        self.max_len = max_len
        self.fine_tune = fine_tune

    def fit(self, texts):
        return self

    @property
    def flat_dim(self) -> int:
        return self.encoder.dim

    seq_dim = flat_dim

    def flat(self, texts):
        out = []
        for start in range(0, len(texts), 64):
            vecs, mask = self.encoder.encode_batch(list(texts[start : start + 64]), self.max_len)
            m = mask[..., None].astype(np.float64)
            out.append((vecs * m).sum(axis=1) / np.maximum(m.sum(axis=1), 1.0))
        return np.concatenate(out) if out else np.zeros((0, self.encoder.dim))

    def batch(self, texts) -> dict:
        if self.fine_tune:
            ids, mask = self.encoder.tokenize(list(texts), self.max_len)
            return {"ids": ids, "mask": mask}
        vecs, mask = self.encoder.encode_batch(list(texts), self.max_len)
        return {"vectors": torch.from_numpy(vecs), "mask": torch.from_numpy(mask)}

    def input_layer(self) -> nn.Module:
        if self.fine_tune:
            module = copy.deepcopy(self.encoder.module)
            for p in module.parameters():
                p.requires_grad_(True)
            return EncoderInput(module)
        return VectorInput()

    def binding(self) -> dict:
        return {"kind": self.kind.value, "max_len": self.max_len, "fine_tune": self.fine_tune,
                "encoder": self.encoder.lock()}


def make_featurizer(feature_kind: FeatureKind, config: ModelConfig, seed: int, encoder=None):
    fc = config.features
    if feature_kind is FeatureKind.TFIDF:
        return TfidfFeaturizer(fc.tfidf_max_features, fc.max_len, config.baseline.tfidf_projection)
    if feature_kind is FeatureKind.STATIC_W2V:
        return W2VFeaturizer(fc.w2v_dim, fc.w2v_epochs, seed, fc.max_len)
    if encoder is None:
        encoder = make_encoder(fc.encoder, seed=seed)
    return ContextualFeaturizer(encoder, fc.max_len, config.hybrid.fine_tune)


def build_network(kind: ModelKind, featurizer, config: ModelConfig) -> SequenceClassifier:
    d = featurizer.seq_dim
    h, b = config.hybrid, config.baseline
    if kind is ModelKind.HYBRID:
        body = HybridBody(d, h.conv_stack, h.kernel_size, h.lstm_hidden, h.dense_hidden, h.n_classes)
    elif kind is ModelKind.CNN:
        body = CnnBody(d, b.cnn_filters, b.cnn_kernel, h.n_classes)
    elif kind is ModelKind.LSTM:
        body = LstmBody(d, b.lstm_hidden, h.n_classes)
    elif kind is ModelKind.CONTEXTUAL_ONLY:
        body = PooledLinearBody(d, h.n_classes)
    else:
        raise ContractViolation(f"{kind.value} is not a neural model kind")
    return SequenceClassifier(featurizer.input_layer(), body)


def build_flat_estimator(kind: ModelKind, feature_kind: FeatureKind, config: ModelConfig, seed: int):
    from sklearn.linear_model import LogisticRegression
    from sklearn.naive_bayes import GaussianNB, MultinomialNB
    from sklearn.svm import SVC, LinearSVC

    b = config.baseline
    if kind is ModelKind.NB:
        # multinomial NB needs non-negative features; dense embeddings get the Gaussian variant
        return MultinomialNB(alpha=b.nb_alpha) if feature_kind is FeatureKind.TFIDF else GaussianNB()
    if kind is ModelKind.LR:
        return LogisticRegression(C=b.lr_c, max_iter=2000, random_state=seed)
    if kind is ModelKind.SVM:
        if b.svm_kernel == "rbf":
            return SVC(C=b.svm_c, kernel="rbf", gamma="scale", random_state=seed)
        return LinearSVC(C=b.svm_c, loss="squared_hinge", dual="auto", max_iter=10_000, random_state=seed)
    raise ContractViolation(f"{kind.value} is not a flat model kind")


@dataclass
class TrainedModel:
    kind: ModelKind
    feature_kind: FeatureKind
    config: ModelConfig
    featurizer: Any
    estimator: Any
    training_metadata: dict = field(default_factory=dict)

    @property
    def is_neural(self) -> bool:
        return self.kind not in FLAT_KINDS

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        """``(N, 2)`` float64 probabilities, columns ``[NON_ABUSIVE, ABUSIVE]``."""
        texts = list(texts)
        if not texts:
            return np.zeros((0, 2))
        if self.is_neural:
            return self._proba_neural(texts)
        X = self.featurizer.flat(texts)
        n_in = getattr(self.estimator, "n_features_in_", X.shape[1])
        if X.shape[1] != n_in:
            raise ContractViolation(f"feature dimension {X.shape[1]} differs from trained dimension {n_in}")
        if hasattr(self.estimator, "predict_proba"):
            p = self.estimator.predict_proba(X).astype(np.float64)
            return p / p.sum(axis=1, keepdims=True)
        p1 = sigmoid(self.estimator.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def _proba_neural(self, texts):
        net = self.estimator
        net.eval()
        out = []
        with torch.no_grad():
            for start in range(0, len(texts), PREDICT_BATCH):
                batch = self.featurizer.batch(texts[start : start + PREDICT_BATCH])
                out.append(torch.softmax(net(batch).double(), dim=1).numpy())
        return np.concatenate(out)


@dataclass(frozen=True)
class Predictions:
    labels: list[Label]
    proba: np.ndarray
    seconds: float

    @property
    def abusive_scores(self) -> np.ndarray:
        return self.proba[:, 1]


def decide(proba: np.ndarray) -> list[Label]:
    """Argmax over ``[NON_ABUSIVE, ABUSIVE]``; an exact tie goes to NON_ABUSIVE."""
    proba = np.asarray(proba)
    return [CLASSES[i] for i in np.argmax(proba, axis=1)] if len(proba) else []


def predict(model: TrainedModel, texts: Sequence[str]) -> Predictions:
    t0 = time.perf_counter()
    proba = model.predict_proba(texts)
    labels = decide(proba)
    return Predictions(labels, proba, time.perf_counter() - t0)


def set_reproducible(flag: bool = True) -> None:
    """Single-threaded deterministic torch kernels."""
    torch.use_deterministic_algorithms(flag)
    if flag:
        torch.set_num_threads(1)


def _train_network(net, featurizer, texts, y, config: ModelConfig, seed: int) -> list[float]:
    h = config.hybrid
    groups = []
    enc_params = list(net.input_layer.parameters()) if isinstance(net.input_layer, EncoderInput) else []
    enc_ids = {id(p) for p in enc_params}
    rest = [p for p in net.parameters() if id(p) not in enc_ids and p.requires_grad]
    groups.append({"params": rest, "lr": h.learning_rate})
    enc_trainable = [p for p in enc_params if p.requires_grad]
    if enc_trainable:
        groups.append({"params": enc_trainable, "lr": h.encoder_learning_rate})
    opt = torch.optim.Adam(groups)
    loss_fn = nn.CrossEntropyLoss()
    gen = torch.Generator().manual_seed(seed)
    y_t = torch.from_numpy(y)
    history = []
    net.train()
    for epoch in range(h.epochs):
        perm = torch.randperm(len(texts), generator=gen).tolist()
        total = 0.0
        for start in range(0, len(perm), h.batch_size):
            idx = perm[start : start + h.batch_size]
            batch = featurizer.batch([texts[i] for i in idx])
            loss = loss_fn(net(batch), y_t[idx])
            if not torch.isfinite(loss):
                raise TrainingError(f"loss became non-finite in epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        history.append(total / len(texts))
        log.debug("epoch %d loss %.5f", epoch, history[-1])
    net.eval()
    return history


def train(
    kind: ModelKind | str,
    config: ModelConfig,
    texts: Sequence[str],
    labels: Sequence,
    seed: int = 0,
    feature_kind: FeatureKind | str | None = None,
    encoder=None,
) -> TrainedModel:
    """Fit features and a classifier of the given kind on the training texts."""
    kind = ModelKind(kind)
    feature_kind = DEFAULT_FEATURES[kind] if feature_kind is None else FeatureKind(feature_kind)
    if kind in (ModelKind.HYBRID, ModelKind.CONTEXTUAL_ONLY) and feature_kind is not FeatureKind.CONTEXTUAL:
        raise ContractViolation(f"{kind.value} requires contextual features")
    texts = list(texts)
    y = label_ids(labels)
    if len(texts) != len(y):
        raise ContractViolation("texts and labels differ in length")
    if len(texts) == 0 or len(np.unique(y)) < 2:
        raise TrainingError("training set must contain both classes")

    t0 = time.perf_counter()
    torch.manual_seed(seed)
    featurizer = make_featurizer(feature_kind, config, seed, encoder).fit(texts)
    meta: dict = {"seed": seed, "n_train": len(texts)}
    if kind in FLAT_KINDS:
        est = build_flat_estimator(kind, feature_kind, config, seed)
        est.fit(featurizer.flat(texts), y)
    else:
        torch.manual_seed(seed)
        est = build_network(kind, featurizer, config)
        meta["loss_history"] = _train_network(est, featurizer, texts, y, config, seed)
        meta["epochs"] = config.hybrid.epochs
    meta["train_seconds"] = time.perf_counter() - t0
    return TrainedModel(kind, feature_kind, config, featurizer, est, meta)
