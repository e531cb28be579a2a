"""Text normalisation and the three feature representations.

* TF-IDF sparse vectors (:class:`TfidfModel`), fitted on training texts only.
* Static Word2Vec embeddings (:class:`StaticEmbeddings`), mean-pooled into one
  vector per document for the flat classifiers or kept as a token sequence
  for the sequence models.
* Contextual per-token embeddings from a transformer encoder
  (:class:`ContextualEncoder`). :class:`RandomEmbeddingEncoder` is a frozen
  random lookup table with the same interface, used as a cheap stand-in.

Fitted models are immutable after ``fit`` and persist into a directory as
a vocabulary file plus raw little-endian arrays with JSON headers.
"""

from __future__ import annotations

import json
import os
import re
import unicodedata
import zlib
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ArtifactVersionError, ContractViolation, EncoderUnavailableError, NotFittedError

FEATURE_FORMAT_VERSION = 1
CONTEXTUAL_DIM = 768
DEFAULT_MAX_LEN = 256
URL_TOKEN = "<url>"

_URL_RE = re.compile(r"(?:https?://|ftp://|www\.)\S+", re.IGNORECASE)
_WS_RE = re.compile(r"\s+")
_TOKEN_RE = re.compile(r"<url>|'\w+|\w+|[^\w\s]")


class FeatureKind(str, Enum):
    TFIDF = "tfidf"
    STATIC_W2V = "w2v"
    CONTEXTUAL = "contextual"


def normalize_text(text: str) -> str:
    """Lowercase, NFC-normalise, replace URLs, drop control chars, collapse whitespace."""
    text = unicodedata.normalize("NFC", text)
    text = unicodedata.normalize("NFC", text.lower())
    text = _URL_RE.sub(f" {URL_TOKEN} ", text)
    text = "".join(
        ch if ch.isspace() or unicodedata.category(ch) not in ("Cc", "Cf", "Cs", "Co") else " " for ch in text
    )
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if any(t == "" for t in self.tokens):
            raise ContractViolation("empty-string token")

    @property
    def n(self) -> int:
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def tokenize(text: str) -> TokenSequence:
    """Split normalised text into word, clitic and punctuation tokens.

    A word is a run of ``\\w`` characters; an apostrophe starts a clitic
    token (``don't`` -> ``don``, ``'t``); every other non-space character is
    its own token. ``<url>`` stays whole.
    """
    return TokenSequence(tuple(_TOKEN_RE.findall(text)))


def analyze(text: str) -> TokenSequence:
    return tokenize(normalize_text(text))


def _as_tokens(doc) -> Sequence[str]:
    if isinstance(doc, str):
        return analyze(doc).tokens
    return tuple(doc)


def _write_array(directory: Path, stem: str, arr: np.ndarray, **header) -> None:
    arr = np.ascontiguousarray(arr)
    dtype = arr.dtype.newbyteorder("<")
    (directory / f"{stem}.bin").write_bytes(arr.astype(dtype).tobytes())
    meta = {"format_version": FEATURE_FORMAT_VERSION, "dtype": dtype.str, "shape": list(arr.shape), **header}
    (directory / f"{stem}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _read_array(directory: Path, stem: str) -> tuple[np.ndarray, dict]:
    meta = json.loads((directory / f"{stem}.json").read_text())
    if meta.get("format_version", 0) > FEATURE_FORMAT_VERSION:
        raise ArtifactVersionError(f"{stem}: format version {meta['format_version']} is newer than supported")
    arr = np.frombuffer((directory / f"{stem}.bin").read_bytes(), dtype=np.dtype(meta["dtype"]))
    return arr.reshape(meta["shape"]).copy(), meta


def _write_vocab(path: Path, vocab: Sequence[str]) -> None:
    path.write_text("".join(t + "\n" for t in vocab), encoding="utf-8")


def _read_vocab(path: Path) -> list[str]:
    return path.read_text(encoding="utf-8").split("\n")[:-1]


@dataclass(frozen=True)
class SparseFeatureVector:
    indices: np.ndarray
    values: np.ndarray
    vocab_size: int

    def __post_init__(self):
        if len(self.indices) and (np.any(np.diff(self.indices) <= 0) or self.indices[-1] >= self.vocab_size):
            raise ContractViolation("indices must be strictly increasing and below vocab_size")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("non-finite feature value")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.vocab_size)
        out[self.indices] = self.values
        return out


class TfidfModel:
    """TF-IDF with smoothed document frequency.

    ``idf(t) = ln((1 + N) / (1 + df(t))) + 1`` and raw term counts as tf.
    Rows are L2-normalised unless ``norm=None``. The vocabulary keeps the
    ``max_features`` most frequent terms by document frequency.
    """

    def __init__(self, max_features: int | None = 50_000, norm: str | None = "l2"):
        self.max_features = max_features
        self.norm = norm
        self.vocab: list[str] | None = None
        self.idf: np.ndarray | None = None
        self._index: dict[str, int] = {}

    @property
    def vocab_size(self) -> int:
        self._check()
        return len(self.vocab)

    def _check(self):
        if self.vocab is None:
            raise NotFittedError("TfidfModel used before fit")

    def fit(self, docs: Iterable) -> "TfidfModel":
        docs = [_as_tokens(d) for d in docs]
        df = Counter()
        for toks in docs:
            df.update(set(toks))
        ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
        if self.max_features is not None:
            ranked = ranked[: self.max_features]
        vocab = sorted(t for t, _ in ranked)
        n = len(docs)
        self.vocab = vocab
        self._index = {t: i for i, t in enumerate(vocab)}
        self.idf = np.array([np.log((1 + n) / (1 + df[t])) + 1.0 for t in vocab])
        return self

    def transform_one(self, doc) -> SparseFeatureVector:
        self._check()
        counts = Counter(self._index[t] for t in _as_tokens(doc) if t in self._index)
        idx = np.array(sorted(counts), dtype=np.int64)
        vals = np.array([counts[i] for i in idx], dtype=float) * self.idf[idx] if len(idx) else np.zeros(0)
        if self.norm == "l2" and len(vals):
            vals = vals / np.linalg.norm(vals)
        return SparseFeatureVector(idx, vals, len(self.vocab))

    def transform(self, docs: Iterable) -> sp.csr_matrix:
        rows = [self.transform_one(d) for d in docs]
        indptr = np.cumsum([0] + [len(r.indices) for r in rows])
        indices = np.concatenate([r.indices for r in rows]) if rows else np.zeros(0, np.int64)
        data = np.concatenate([r.values for r in rows]) if rows else np.zeros(0)
        return sp.csr_matrix((data, indices, indptr), shape=(len(rows), self.vocab_size))

    def token_weights(self, doc) -> tuple[np.ndarray, np.ndarray]:
        """Per-position ``(vocab_index, tf-idf weight)`` for in-vocabulary tokens, in text order."""
        vec = self.transform_one(doc)
        w = dict(zip(vec.indices.tolist(), vec.values.tolist()))
        ids = [self._index[t] for t in _as_tokens(doc) if t in self._index]
        return np.array(ids, dtype=np.int64), np.array([w[i] for i in ids], dtype=float)

    def save(self, directory) -> None:
        self._check()
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        _write_vocab(d / "vocab.txt", self.vocab)
        _write_array(d, "idf", self.idf, max_features=self.max_features, norm=self.norm)

    @classmethod
    def load(cls, directory) -> "TfidfModel":
        d = Path(directory)
        idf, meta = _read_array(d, "idf")
        m = cls(max_features=meta["max_features"], norm=meta["norm"])
        m.vocab = _read_vocab(d / "vocab.txt")
        m._index = {t: i for i, t in enumerate(m.vocab)}
        m.idf = idf
        return m


def fit_tfidf(train_docs: Iterable, max_features: int | None = 50_000) -> TfidfModel:
    return TfidfModel(max_features=max_features).fit(train_docs)


def transform_tfidf(model: TfidfModel, tokens) -> SparseFeatureVector:
    return model.transform_one(tokens)


def _stable_hash(s: str) -> int:
    # gensim seeds vectors through this; builtin hash() is salted per process
    return zlib.crc32(s.encode("utf-8"))


@dataclass
class StaticEmbeddings:
    vocab: list[str]
    vectors: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {t: i for i, t in enumerate(self.vocab)}

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token) -> bool:
        return token in self._index

    @classmethod
    def fit(
        cls, docs: Iterable, d: int = 300, seed: int = 0, epochs: int = 5, window: int = 5, min_count: int = 1
    ) -> "StaticEmbeddings":
        """Train skip-gram Word2Vec on tokenised training documents."""
        from gensim.models import Word2Vec

        sentences = [list(_as_tokens(doc)) for doc in docs]
        w2v = Word2Vec(
            sentences=sentences,
            vector_size=d,
            window=window,
            min_count=min_count,
            sg=1,
            seed=seed,
            workers=1,
            epochs=epochs,
            hashfxn=_stable_hash,
        )
        vocab = sorted(w2v.wv.key_to_index)
        vectors = np.stack([w2v.wv[t] for t in vocab]) if vocab else np.zeros((0, d), np.float32)
        return cls(vocab, vectors.astype(np.float32))

    def sequence(self, doc) -> np.ndarray:
        """Token vectors for in-vocabulary tokens; one zero row when none are known."""
        ids = [self._index[t] for t in _as_tokens(doc) if t in self._index]
        if not ids:
            return np.zeros((1, self.d), np.float32)
        return self.vectors[ids]

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        _write_vocab(d / "w2v_vocab.txt", self.vocab)
        _write_array(d, "embeddings", self.vectors)

    @classmethod
    def load(cls, directory) -> "StaticEmbeddings":
        d = Path(directory)
        vectors, _ = _read_array(d, "embeddings")
        return cls(_read_vocab(d / "w2v_vocab.txt"), vectors)


def embed_static(model: StaticEmbeddings, tokens) -> tuple[np.ndarray, bool]:
    """Mean of in-vocabulary token vectors, and whether every token was out of vocabulary."""
    ids = [model._index[t] for t in _as_tokens(tokens) if t in model._index]
    if not ids:
        return np.zeros(model.d, dtype=np.float32), True
    return model.vectors[ids].mean(axis=0), False


@dataclass(frozen=True)
class EmbeddingSequence:
    """``n`` per-token vectors of dimension ``d``; ``mask`` marks real (non-pad) positions."""

    vectors: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        v = self.vectors
        if v.ndim != 2 or v.shape[0] < 1:
            raise ContractViolation(f"expected an (n>=1, d) matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ContractViolation("non-finite embedding entry")
        if self.mask is None:
            object.__setattr__(self, "mask", np.ones(v.shape[0], dtype=bool))
        elif self.mask.shape != (v.shape[0],):
            raise ContractViolation("mask length differs from sequence length")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class EncoderConfig:
    encoder_kind: FeatureKind
    d: int
    max_len: int = DEFAULT_MAX_LEN
    artifact: str | None = None

    def __post_init__(self):
        if self.max_len < 1:
            raise ContractViolation("max_len must be >= 1")
        is_stand_in = (self.artifact or "").startswith("random")
        if self.encoder_kind is FeatureKind.CONTEXTUAL and not is_stand_in and self.d != CONTEXTUAL_DIM:
            raise ContractViolation(f"contextual encoder must have d={CONTEXTUAL_DIM}, got {self.d}")


class _TorchEncoder:
    """Shared batching logic; subclasses provide ``tokenize`` and ``module``."""

    name: str
    dim: int
    module: "object"

    def tokenize(self, texts: Sequence[str], max_len: int):
        raise NotImplementedError

    def encode_batch(self, texts: Sequence[str], max_len: int = DEFAULT_MAX_LEN) -> tuple[np.ndarray, np.ndarray]:
        """Return padded ``(B, n, d)`` float32 vectors and a ``(B, n)`` boolean mask."""
        import torch

        ids, mask = self.tokenize(texts, max_len)
        was_training = self.module.training
        self.module.eval()
        with torch.no_grad():
            out = self.module(ids, mask)
        self.module.train(was_training)
        return out.float().numpy(), mask.bool().numpy()

    def lock(self) -> dict:
        raise NotImplementedError


class ContextualEncoder(_TorchEncoder):
    """Final-layer hidden states of a Hugging Face encoder (BERT-base-uncased by default)."""

    def __init__(self, model, tokenizer, name: str = "bert-base-uncased", revision: str | None = None):
        import torch

        class _Wrap(torch.nn.Module):
            def __init__(self, inner):
                super().__init__()
                self.inner = inner

            def forward(self, ids, mask):
                return self.inner(input_ids=ids, attention_mask=mask.long()).last_hidden_state

        self.model = model
        self.tokenizer = tokenizer
        self.module = _Wrap(model)
        self.module.eval()
        self.name = name
        self.revision = revision
        self.dim = int(model.config.hidden_size)
        self.capacity = int(getattr(model.config, "max_position_embeddings", 512))

    @classmethod
    def from_pretrained(
        cls, name: str = "bert-base-uncased", revision: str | None = None, cache_dir: str | None = None
    ) -> "ContextualEncoder":
        cache_dir = cache_dir or os.environ.get("ABUSEDETECT_CACHE")
        try:
            from transformers import AutoModel, AutoTokenizer

            tok = AutoTokenizer.from_pretrained(name, revision=revision, cache_dir=cache_dir)
            model = AutoModel.from_pretrained(name, revision=revision, cache_dir=cache_dir)
        except (OSError, ValueError, ImportError) as exc:
            raise EncoderUnavailableError(
                f"cannot load encoder {name!r}: {exc}\n"
                f"hint: download it once with network access, e.g. "
                f"`huggingface-cli download {name}`, or point ABUSEDETECT_CACHE at a cache holding it"
            ) from exc
        rev = revision or getattr(model.config, "_commit_hash", None)
        return cls(model, tok, name=name, revision=rev)

    def tokenize(self, texts: Sequence[str], max_len: int):
        if max_len > self.capacity:
            raise ContractViolation(f"max_len {max_len} exceeds encoder capacity {self.capacity}")
        enc = self.tokenizer(
            [normalize_text(t) for t in texts],
            padding=True,
            truncation=True,
            max_length=max_len,
            return_tensors="pt",
        )
        return enc["input_ids"], enc["attention_mask"].bool()

    def lock(self) -> dict:
        return {"type": "transformers", "name": self.name, "revision": self.revision, "dim": self.dim}


class RandomEmbeddingEncoder(_TorchEncoder):
    """Frozen random per-token vectors looked up by hashed token.

    Not contextual: a token's vector ignores its neighbours. Stands in for
    the transformer where a desk-scale run cannot afford one.
    """

    def __init__(self, dim: int = 32, seed: int = 0, n_buckets: int = 1 << 14, table: np.ndarray | None = None):
        import torch

        if table is None:
            table = np.random.default_rng(seed).normal(0.0, 1.0, size=(n_buckets + 1, dim)).astype(np.float32)
            table[0] = 0.0  # padding bucket
        self.table = table
        self.seed = seed
        self.n_buckets = table.shape[0] - 1
        self.dim = table.shape[1]
        self.name = f"random:{self.dim}"
        emb = torch.nn.Embedding.from_pretrained(torch.from_numpy(table), freeze=True, padding_idx=0)

        class _Lookup(torch.nn.Module):
            def __init__(self, emb):
                super().__init__()
                self.emb = emb

            def forward(self, ids, mask):
                return self.emb(ids)

        self.module = _Lookup(emb)

    def token_id(self, token: str) -> int:
        return 1 + zlib.crc32(token.encode("utf-8")) % self.n_buckets

    def tokenize(self, texts: Sequence[str], max_len: int):
        import torch

        seqs = [[self.token_id(t) for t in analyze(x).tokens][:max_len] or [0] for x in texts]
        n = max(len(s) for s in seqs) if seqs else 1
        ids = torch.zeros((len(seqs), n), dtype=torch.long)
        mask = torch.zeros((len(seqs), n), dtype=torch.bool)
        for i, s in enumerate(seqs):
            ids[i, : len(s)] = torch.tensor(s)
            mask[i, : len(s)] = True
        return ids, mask

    def lock(self) -> dict:
        return {"type": "random", "name": self.name, "seed": self.seed, "dim": self.dim, "n_buckets": self.n_buckets}


def encode_contextual(encoder: _TorchEncoder, text: str, max_len: int = DEFAULT_MAX_LEN) -> EmbeddingSequence:
    """Encode one text into its unpadded per-token embedding sequence."""
    vecs, mask = encoder.encode_batch([text], max_len)
    n = int(mask[0].sum())
    return EmbeddingSequence(vecs[0, :n].astype(np.float64))


def make_encoder(spec: str, seed: int = 0) -> _TorchEncoder:
    """Build an encoder from a spec string: ``random:<dim>`` or a Hugging Face model name/path."""
    if spec.startswith("random"):
        _, _, dim = spec.partition(":")
        return RandomEmbeddingEncoder(dim=int(dim or 32), seed=seed)
    name, _, revision = spec.partition("@")
    return ContextualEncoder.from_pretrained(name, revision=revision or None)


def save_encoder(encoder: _TorchEncoder, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "encoder.lock.json").write_text(json.dumps(encoder.lock(), indent=2, sort_keys=True) + "\n")
    if isinstance(encoder, RandomEmbeddingEncoder):
        _write_array(d, "encoder_table", encoder.table, seed=encoder.seed)


def load_encoder(directory) -> _TorchEncoder:
    d = Path(directory)
    lock = json.loads((d / "encoder.lock.json").read_text())
    if lock["type"] == "random":
        table, _ = _read_array(d, "encoder_table")
        return RandomEmbeddingEncoder(seed=lock["seed"], table=table)
    return ContextualEncoder.from_pretrained(lock["name"], revision=lock.get("revision"))
