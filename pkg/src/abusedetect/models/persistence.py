"""Save and load trained models as artifact directories.

Layout::

    <dir>/manifest.json        kind, schema version, feature binding, seed, checksums
    <dir>/features/...         vocabulary / idf / embedding tables, encoder lockfile
    <dir>/weights.safetensors  neural models
    <dir>/estimator.joblib     scikit-learn models

Every file except the manifest is listed with its SHA-256 in the manifest
and verified on load.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import joblib
from safetensors.torch import load_file, save_file

from .. import __version__
from ..errors import ArtifactChecksumError, ArtifactError, ArtifactVersionError, ContractViolation
from ..features import FeatureKind, StaticEmbeddings, TfidfModel, load_encoder, save_encoder
from .classifier import (
    ContextualFeaturizer,
    TfidfFeaturizer,
    TrainedModel,
    W2VFeaturizer,
    build_network,
)
from .config import FLAT_KINDS, ModelConfig, ModelKind

SCHEMA_VERSION = 1
MANIFEST = "manifest.json"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _save_featurizer(featurizer, directory: Path) -> None:
    if isinstance(featurizer, TfidfFeaturizer):
        featurizer.model.save(directory)
    elif isinstance(featurizer, W2VFeaturizer):
        featurizer.model.save(directory)
    else:
        save_encoder(featurizer.encoder, directory)


def _load_featurizer(binding: dict, directory: Path, encoder=None):
    kind = FeatureKind(binding["kind"])
    if kind is FeatureKind.TFIDF:
        return TfidfFeaturizer(binding["max_features"], binding["max_len"], binding["projection"],
                               model=TfidfModel.load(directory))
    if kind is FeatureKind.STATIC_W2V:
        return W2VFeaturizer(binding["dim"], binding["epochs"], binding["seed"], binding["max_len"],
                             model=StaticEmbeddings.load(directory))
    enc = encoder if encoder is not None else load_encoder(directory)
    if enc.dim != binding["encoder"]["dim"]:
        raise ContractViolation(f"encoder dimension {enc.dim} differs from trained dimension "
                                f"{binding['encoder']['dim']}")
    return ContextualFeaturizer(enc, binding["max_len"], binding["fine_tune"])


def save_model(model: TrainedModel, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _save_featurizer(model.featurizer, d / "features")
    if model.is_neural:
        state = {k: v.detach().contiguous().clone() for k, v in model.estimator.state_dict().items()}
        save_file(state, str(d / "weights.safetensors"))
    else:
        joblib.dump(model.estimator, d / "estimator.joblib")

    files = sorted(p for p in d.rglob("*") if p.is_file() and p.name != MANIFEST)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "kind": model.kind.value,
        "feature_kind": model.feature_kind.value,
        "feature_binding": model.featurizer.binding(),
        "config": model.config.to_dict(),
        "seed": model.training_metadata.get("seed"),
        "training_metadata": model.training_metadata,
        "checksums": {p.relative_to(d).as_posix(): _sha256(p) for p in files},
    }
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return d


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise ArtifactError(f"no model artifact at {directory} (missing {MANIFEST})")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: {exc}") from exc
    version = manifest.get("schema_version")
    if not isinstance(version, int) or version > SCHEMA_VERSION:
        raise ArtifactVersionError(
            f"{path}: artifact schema version {version} is not supported (this build reads <= {SCHEMA_VERSION})"
        )
    return manifest


def load_model(directory, encoder=None) -> TrainedModel:
    """Load an artifact directory, verifying checksums first.

    ``encoder`` overrides the encoder named in a contextual artifact's lockfile.
    """
    d = Path(directory)
    manifest = read_manifest(d)
    for rel, digest in manifest["checksums"].items():
        p = d / rel
        if not p.is_file():
            raise ArtifactChecksumError(f"{p}: listed in manifest but missing")
        if _sha256(p) != digest:
            raise ArtifactChecksumError(f"{p}: checksum mismatch")

    kind = ModelKind(manifest["kind"])
    config = ModelConfig.from_dict(manifest["config"])
    featurizer = _load_featurizer(manifest["feature_binding"], d / "features", encoder)
    if kind in FLAT_KINDS:
        estimator = joblib.load(d / "estimator.joblib")
    else:
        estimator = build_network(kind, featurizer, config)
        try:
            estimator.load_state_dict(load_file(str(d / "weights.safetensors")))
        except RuntimeError as exc:
            raise ContractViolation(f"weights do not fit the {kind.value} network: {exc}") from exc
        estimator.eval()
    return TrainedModel(kind, FeatureKind(manifest["feature_kind"]), config, featurizer, estimator,
                        manifest["training_metadata"])
