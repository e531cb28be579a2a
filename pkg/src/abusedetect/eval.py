"""Confusion-matrix metrics, ROC/AUC and stratified k-fold cross-validation.

ABUSIVE is the positive class throughout. Precision or recall with a zero
denominator is defined as 0, and F1 is 0 when precision + recall is 0.

A :class:`CvReport` serialises to JSON in two parts: everything that is a
pure function of (corpus, folds, model, config, seed) at the top level,
and wall-clock timings plus the creation timestamp under ``metadata``.
Two runs with the same seed in reproducible mode therefore give
byte-identical JSON once ``metadata`` is dropped.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .corpus import Corpus, FoldAssignment, Label
from .errors import ContractViolation, FoldError
from .features import FeatureKind
from .models.classifier import label_ids, predict, train
from .models.config import DEFAULT_FEATURES, ModelConfig, ModelKind

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
METRIC_NAMES = ("precision", "recall", "accuracy", "f1", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ContractViolation("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def _positive(labels) -> np.ndarray:
    return label_ids(labels).astype(bool)


def confusion(truth: Sequence, predictions: Sequence) -> ConfusionMatrix:
    if len(truth) != len(predictions):
        raise ContractViolation(f"{len(truth)} labels but {len(predictions)} predictions")
    if len(truth) == 0:
        raise ContractViolation("confusion matrix of an empty sample")
    t, p = _positive(truth), _positive(predictions)
    return ConfusionMatrix(
        tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)), tn=int(np.sum(~t & ~p)), fn=int(np.sum(t & ~p))
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def metrics(cm: ConfusionMatrix) -> dict[str, float]:
    """Precision, recall, accuracy and F1 from confusion counts."""
    p = _ratio(cm.tp, cm.tp + cm.fp)
    r = _ratio(cm.tp, cm.tp + cm.fn)
    return {
        "precision": p,
        "recall": r,
        "accuracy": _ratio(cm.tp + cm.tn, cm.total),
        "f1": _ratio(2 * p * r, p + r),
    }


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending; first entry is +inf
    tpr: np.ndarray
    fpr: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "fpr", "tpr"])
            for th, f, t in zip(self.thresholds, self.fpr, self.tpr):
                w.writerow([repr(float(th)), repr(float(f)), repr(float(t))])

    @classmethod
    def from_csv(cls, path) -> "RocCurve":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(*(np.array([float(r[c]) for r in rows]) for c in ("threshold", "tpr", "fpr")))

    def to_dict(self) -> dict:
        return {
            "thresholds": [None if math.isinf(x) else float(x) for x in self.thresholds],
            "fpr": self.fpr.tolist(),
            "tpr": self.tpr.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RocCurve":
        th = np.array([math.inf if x is None else x for x in d["thresholds"]], dtype=float)
        return cls(th, np.array(d["tpr"], dtype=float), np.array(d["fpr"], dtype=float))


def roc_curve(truth: Sequence, scores: Sequence[float]) -> RocCurve:
    """ROC points at every distinct score, from (0, 0) to (1, 1).

    Tied scores form one point, so a tie moves the curve diagonally and
    the trapezoid under it counts the tied pairs as one half.
    """
    y = _positive(truth)
    s = np.asarray(scores, dtype=float)
    if len(y) != len(s):
        raise ContractViolation("truth and scores differ in length")
    if not np.all(np.isfinite(s)):
        raise ContractViolation("scores must be finite")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ContractViolation("ROC/AUC needs both classes in the truth labels")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_run = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(y)[last_of_run]
    fps = (last_of_run + 1) - tps
    return RocCurve(
        thresholds=np.r_[np.inf, s[last_of_run]],
        tpr=np.r_[0.0, tps / n_pos],
        fpr=np.r_[0.0, fps / n_neg],
    )


def roc_auc(truth: Sequence, scores: Sequence[float]) -> tuple[RocCurve, float]:
    curve = roc_curve(truth, scores)
    return curve, float(np.trapezoid(curve.tpr, curve.fpr))


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    accuracy: float
    f1: float
    auc: float
    train_seconds: float = 0.0
    predict_seconds: float = 0.0

    def __post_init__(self):
        for name in METRIC_NAMES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractViolation(f"{name}={v} outside [0, 1]")
        if self.train_seconds < 0 or self.predict_seconds < 0:
            raise ContractViolation("timings must be non-negative")

    def scores(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRIC_NAMES}

    def timing(self) -> dict[str, float]:
        return {"train_seconds": self.train_seconds, "predict_seconds": self.predict_seconds}

    def f1_consistent(self, tol: float = 1e-9) -> bool:
        return abs(self.f1 - _ratio(2 * self.precision * self.recall, self.precision + self.recall)) <= tol

    @classmethod
    def mean(cls, reports: Sequence["MetricsReport"]) -> "MetricsReport":
        # mean of fold F1s, not the harmonic mean of mean precision and recall
        fields = METRIC_NAMES + ("train_seconds", "predict_seconds")
        return cls(**{f: float(np.mean([getattr(r, f) for r in reports])) for f in fields})


@dataclass
class CvReport:
    model_kind: ModelKind
    feature_kind: FeatureKind
    seed: int
    folds: list[MetricsReport]
    confusions: list[ConfusionMatrix]
    config: dict = field(default_factory=dict)
    corpus_checksum: str = ""
    fold_sizes: list[int] = field(default_factory=list)
    roc: RocCurve | None = None
    created: str = ""

    @property
    def k(self) -> int:
        return len(self.folds)

    @property
    def average(self) -> MetricsReport:
        return MetricsReport.mean(self.folds)

    @property
    def label(self) -> str:
        return f"{self.model_kind.value}_{self.feature_kind.value}"

    def to_dict(self) -> dict:
        avg = self.average
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "model_kind": self.model_kind.value,
            "feature_kind": self.feature_kind.value,
            "seed": self.seed,
            "k": self.k,
            "corpus_checksum": self.corpus_checksum,
            "config": self.config,
            "folds": [
                {"fold": i, "n_test": size, "confusion": cm.to_dict(), "metrics": m.scores()}
                for i, (m, cm, size) in enumerate(zip(self.folds, self.confusions, self.fold_sizes))
            ],
            "average": avg.scores(),
            "roc": None if self.roc is None else {"pooled": True, **self.roc.to_dict()},
            "metadata": {
                "created": self.created,
                "package_version": __version__,
                "timing": {"folds": [m.timing() for m in self.folds], "average": avg.timing()},
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "CvReport":
        version = d.get("schema_version")
        if version != REPORT_SCHEMA_VERSION:
            raise ContractViolation(f"report schema version {version} is not {REPORT_SCHEMA_VERSION}")
        timing = d["metadata"]["timing"]["folds"]
        folds = [MetricsReport(**f["metrics"], **t) for f, t in zip(d["folds"], timing)]
        return cls(
            model_kind=ModelKind(d["model_kind"]),
            feature_kind=FeatureKind(d["feature_kind"]),
            seed=d["seed"],
            folds=folds,
            confusions=[ConfusionMatrix(**f["confusion"]) for f in d["folds"]],
            config=d["config"],
            corpus_checksum=d["corpus_checksum"],
            fold_sizes=[f["n_test"] for f in d["folds"]],
            roc=None if d.get("roc") is None else RocCurve.from_dict(d["roc"]),
            created=d["metadata"]["created"],
        )

    @classmethod
    def load(cls, path) -> "CvReport":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except ContractViolation as exc:
            raise ContractViolation(f"{path}: {exc}") from exc


def strip_metadata(report_json: str) -> str:
    """Re-serialise a report without its ``metadata`` block (timings and timestamp)."""
    d = json.loads(report_json)
    d.pop("metadata", None)
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def evaluate_fold(model, texts, truth) -> tuple[MetricsReport, ConfusionMatrix, np.ndarray]:
    pred = predict(model, texts)
    cm = confusion(truth, pred.labels)
    _, auc = roc_auc(truth, pred.abusive_scores)
    m = metrics(cm)
    report = MetricsReport(**m, auc=auc, train_seconds=model.training_metadata["train_seconds"],
                           predict_seconds=pred.seconds)
    return report, cm, pred.abusive_scores


def cross_validate(
    corpus: Corpus,
    folds: FoldAssignment,
    model_kind: ModelKind | str,
    config: ModelConfig,
    seed: int = 0,
    feature_kind: FeatureKind | str | None = None,
    encoder=None,
) -> CvReport:
    """Train on k-1 folds and test on the held-out fold, k times.

    Feature models are fitted inside each fold on the training split only.
    Training time includes that fitting; prediction time covers the whole
    held-out fold. Folds run sequentially so timings are not contended.
    """
    kind = ModelKind(model_kind)
    fkind = DEFAULT_FEATURES[kind] if feature_kind is None else FeatureKind(feature_kind)
    texts = corpus.texts
    labels = corpus.labels
    reports, cms, sizes = [], [], []
    pooled_truth: list[Label] = []
    pooled_scores: list[np.ndarray] = []
    for f in range(folds.k):
        train_idx, test_idx = folds.split(corpus, f)
        try:
            model = train(kind, config, [texts[i] for i in train_idx], [labels[i] for i in train_idx],
                          seed=seed, feature_kind=fkind, encoder=encoder)
            truth = [labels[i] for i in test_idx]
            report, cm, scores = evaluate_fold(model, [texts[i] for i in test_idx], truth)
        except FoldError:
            raise
        except Exception as exc:
            raise FoldError(f"{type(exc).__name__}: {exc}", fold=f) from exc
        log.info("%s fold %d: f1=%.4f auc=%.4f", kind.value, f, report.f1, report.auc)
        reports.append(report)
        cms.append(cm)
        sizes.append(len(test_idx))
        pooled_truth.extend(truth)
        pooled_scores.append(scores)
    roc, _ = roc_auc(pooled_truth, np.concatenate(pooled_scores))
    return CvReport(
        model_kind=kind,
        feature_kind=fkind,
        seed=seed,
        folds=reports,
        confusions=cms,
        config=config.to_dict(),
        corpus_checksum=corpus.checksum(),
        fold_sizes=sizes,
        roc=roc,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
