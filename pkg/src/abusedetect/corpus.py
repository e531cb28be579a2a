"""Corpus ingestion, imbalance statistics and stratified k-fold splitting.

Three heterogeneous sources are supported:

* dark-web posts, CSV with header ``id,text,label`` and labels ``csa``/``non_csa``;
* PAN12 chat conversations (competition XML) with a predator-author list;
* Roman Urdu YouTube comments, CSV with header ``text,label``.

Each loader returns a :class:`LoadResult` carrying the samples together with
the record-level errors and warnings it collected, so one bad row never
aborts a whole file. Unreadable or unparsable files raise
:class:`~abusedetect.errors.CorpusLoadError`.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CorpusLoadError, DuplicateIdError, FoldError

log = logging.getLogger(__name__)

PathLike = str | os.PathLike


class Label(str, Enum):
    ABUSIVE = "ABUSIVE"
    NON_ABUSIVE = "NON_ABUSIVE"


class Source(str, Enum):
    DARKWEB = "DARKWEB"
    PAN12 = "PAN12"
    ROMAN_URDU = "ROMAN_URDU"


_SOURCE_ORDER = {s: i for i, s in enumerate(Source)}

DARKWEB_LABELS: Mapping[str, Label] = {"csa": Label.ABUSIVE, "non_csa": Label.NON_ABUSIVE}

# Default Roman Urdu label dictionary; override with a JSON mapping file.
ROMAN_URDU_LABELS: Mapping[str, Label] = {
    "abusive": Label.ABUSIVE,
    "1": Label.ABUSIVE,
    "non-abusive": Label.NON_ABUSIVE,
    "non_abusive": Label.NON_ABUSIVE,
    "nonabusive": Label.NON_ABUSIVE,
    "0": Label.NON_ABUSIVE,
}


@dataclass(frozen=True)
class TextSample:
    id: str
    text: str
    label: Label
    source: Source

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"sample {self.id!r} has empty text")

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text, "label": self.label.value, "source": self.source.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TextSample":
        return cls(id=str(d["id"]), text=d["text"], label=Label(d["label"]), source=Source(d["source"]))


@dataclass(frozen=True)
class RecordError:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


@dataclass
class LoadResult:
    samples: list[TextSample]
    errors: list[RecordError] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


@dataclass(frozen=True)
class CorpusStats:
    n_abusive: int
    n_non_abusive: int
    per_source_counts: dict[Source, tuple[int, int]]

    @property
    def total(self) -> int:
        return self.n_abusive + self.n_non_abusive

    @property
    def ratio(self) -> float:
        """Non-abusive samples per abusive sample (the ``x`` in ``1:x``)."""
        if self.n_abusive == 0:
            return float("inf")
        return self.n_non_abusive / self.n_abusive

    def to_dict(self) -> dict:
        return {
            "n_abusive": self.n_abusive,
            "n_non_abusive": self.n_non_abusive,
            "total": self.total,
            "ratio": f"1:{self.ratio:.1f}",
            "ratio_value": self.ratio,
            "per_source_counts": {
                s.value: {"abusive": a, "non_abusive": n} for s, (a, n) in self.per_source_counts.items()
            },
        }

    @classmethod
    def from_samples(cls, samples: Iterable[TextSample]) -> "CorpusStats":
        per: dict[Source, list[int]] = {}
        for s in samples:
            counts = per.setdefault(s.source, [0, 0])
            counts[0 if s.label is Label.ABUSIVE else 1] += 1
        per_source = {src: tuple(per[src]) for src in sorted(per, key=_SOURCE_ORDER.get)}
        n_abusive = sum(a for a, _ in per_source.values())
        n_non = sum(n for _, n in per_source.values())
        return cls(n_abusive, n_non, per_source)


@dataclass(frozen=True)
class Corpus:
    samples: tuple[TextSample, ...]
    stats: CorpusStats

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.samples]

    @property
    def labels(self) -> list[Label]:
        return [s.label for s in self.samples]

    def checksum(self) -> str:
        h = hashlib.sha256()
        for s in self.samples:
            h.update(json.dumps(s.to_dict(), ensure_ascii=False, sort_keys=True).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    @classmethod
    def from_samples(cls, samples: Iterable[TextSample]) -> "Corpus":
        samples = tuple(samples)
        seen = set()
        for s in samples:
            if s.id in seen:
                raise DuplicateIdError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)
        return cls(samples, CorpusStats.from_samples(samples))


def _open_text(path: PathLike):
    try:
        return open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise CorpusLoadError(f"cannot read {path}: {exc}") from exc


def _read_csv(path: PathLike, required: Sequence[str]):
    """Yield ``(line_number, row_dict)``; line numbers count the header as line 1."""
    fh = _open_text(path)
    with fh:
        try:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise CorpusLoadError(f"{path}: missing column(s) {', '.join(missing)}")
            for row in reader:
                yield reader.line_num, row
        except (csv.Error, UnicodeDecodeError) as exc:
            raise CorpusLoadError(f"{path}: {exc}") from exc


def load_darkweb(path: PathLike) -> LoadResult:
    """Load the dark-web CSV. ``csa`` rows are abusive, ``non_csa`` rows are not."""
    result = LoadResult([])
    for line, row in _read_csv(path, ("id", "text", "label")):
        if None in row or any(v is None for v in row.values()):
            result.errors.append(RecordError(line, "wrong number of fields"))
            continue
        label = DARKWEB_LABELS.get(row["label"].strip().lower())
        if label is None:
            result.errors.append(RecordError(line, f"unknown label {row['label']!r}"))
            continue
        if not row["text"].strip():
            result.errors.append(RecordError(line, "empty text"))
            continue
        if not row["id"].strip():
            result.errors.append(RecordError(line, "empty id"))
            continue
        result.samples.append(TextSample(row["id"].strip(), row["text"], label, Source.DARKWEB))
    for err in result.errors:
        log.warning("%s: %s", path, err)
    return result


def read_predator_ids(path: PathLike) -> set[str]:
    with _open_text(path) as fh:
        return {ln.strip() for ln in fh if ln.strip()}


def load_pan12(path: PathLike, predators: PathLike | Iterable[str] | None = None) -> LoadResult:
    """Load PAN12 conversations, one sample per conversation.

    Message texts are joined with newlines in document order. A conversation
    is abusive when any of its authors appears in ``predators`` (the
    competition's predator-id list, as a path or an iterable of ids).
    """
    if predators is None:
        predator_ids: set[str] = set()
    elif isinstance(predators, (str, os.PathLike)):
        predator_ids = read_predator_ids(predators)
    else:
        predator_ids = set(predators)

    result = LoadResult([])
    if not predator_ids:
        result.warnings.append("no predator ids supplied; every conversation is labeled NON_ABUSIVE")
    try:
        for _, elem in ET.iterparse(os.fspath(path), events=("end",)):
            if elem.tag != "conversation":
                continue
            conv_id = elem.get("id", "")
            texts, authors = [], set()
            for msg in elem.iter("message"):
                author = msg.findtext("author")
                if author:
                    authors.add(author.strip())
                texts.append(msg.findtext("text") or "")
            elem.clear()
            if not texts:
                result.warnings.append(f"conversation {conv_id!r} has no messages; skipped")
                continue
            text = "\n".join(texts)
            if not text.strip():
                result.warnings.append(f"conversation {conv_id!r} has only empty messages; skipped")
                continue
            label = Label.ABUSIVE if authors & predator_ids else Label.NON_ABUSIVE
            result.samples.append(TextSample(conv_id, text, label, Source.PAN12))
    except ET.ParseError as exc:
        raise CorpusLoadError(f"{path}: XML parse error: {exc}") from exc
    except OSError as exc:
        raise CorpusLoadError(f"cannot read {path}: {exc}") from exc
    for w in result.warnings:
        log.warning("%s: %s", path, w)
    return result


def read_label_mapping(path: PathLike) -> dict[str, Label]:
    """Read a JSON object mapping raw label tokens to ``ABUSIVE``/``NON_ABUSIVE``."""
    with _open_text(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusLoadError(f"{path}: {exc}") from exc
    return {str(k).strip().lower(): Label(v) for k, v in raw.items()}


def load_roman_urdu(path: PathLike, label_map: Mapping[str, Label] | PathLike | None = None) -> LoadResult:
    if label_map is None:
        mapping = dict(ROMAN_URDU_LABELS)
    elif isinstance(label_map, (str, os.PathLike)):
        mapping = read_label_mapping(label_map)
    else:
        mapping = {k.strip().lower(): Label(v) for k, v in label_map.items()}

    result = LoadResult([])
    for line, row in _read_csv(path, ("text", "label")):
        if None in row or any(v is None for v in row.values()):
            result.errors.append(RecordError(line, "wrong number of fields"))
            continue
        label = mapping.get(row["label"].strip().lower())
        if label is None:
            result.errors.append(RecordError(line, f"unknown label {row['label']!r}"))
            continue
        if not row["text"].strip():
            result.errors.append(RecordError(line, "empty text"))
            continue
        result.samples.append(TextSample(str(line), row["text"], label, Source.ROMAN_URDU))
    for err in result.errors:
        log.warning("%s: %s", path, err)
    return result


def merge_corpora(parts: Iterable[Iterable[TextSample]]) -> Corpus:
    """Concatenate loaded parts, namespacing ids as ``<source>:<local-id>``.

    Order is by source (dark web, PAN12, Roman Urdu), then original order.
    Ids that are already namespaced are left alone.
    """
    flat = [s for part in parts for s in part]
    order = sorted(range(len(flat)), key=lambda i: (_SOURCE_ORDER[flat[i].source], i))
    merged = []
    for i in order:
        s = flat[i]
        prefix = s.source.value.lower() + ":"
        sid = s.id if s.id.startswith(prefix) else prefix + s.id
        merged.append(TextSample(sid, s.text, s.label, s.source))
    return Corpus.from_samples(merged)


def save_corpus(corpus: Corpus | Iterable[TextSample], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in corpus:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def load_corpus(path: PathLike) -> Corpus:
    samples = []
    with _open_text(path) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                samples.append(TextSample.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CorpusLoadError(f"{path}: line {n}: {exc}") from exc
    return Corpus.from_samples(samples)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: dict[str, int]

    def folds(self, corpus: Corpus) -> np.ndarray:
        """Fold index per corpus position."""
        return np.array([self.assignment[s.id] for s in corpus], dtype=np.int64)

    def split(self, corpus: Corpus, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(train_positions, test_positions)`` for one fold."""
        f = self.folds(corpus)
        return np.flatnonzero(f != fold), np.flatnonzero(f == fold)

    def fold_sizes(self) -> list[int]:
        c = Counter(self.assignment.values())
        return [c.get(i, 0) for i in range(self.k)]

    def max_share_deviation(self, corpus: Corpus) -> float:
        """Largest gap between a fold's abusive share and the global share."""
        f = self.folds(corpus)
        y = np.array([s.label is Label.ABUSIVE for s in corpus])
        glob = y.mean()
        return max(abs(y[f == i].mean() - glob) for i in range(self.k))


def stratified_kfold(
    corpus: Corpus | Sequence[TextSample],
    k: int = 5,
    seed: int = 0,
    tolerance: float = 0.01,
) -> FoldAssignment:
    """Assign every sample to one of ``k`` folds preserving the class ratio.

    Each class is shuffled independently, then the classes are concatenated
    and dealt round-robin with one running counter. This keeps both the
    overall fold sizes and the per-class fold counts within 1 of each other.
    """
    if k < 2:
        raise FoldError(f"k must be >= 2, got {k}")
    samples = list(corpus)
    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    pos = 0
    for label in Label:
        members = [s.id for s in samples if s.label is label]
        if len(members) < k:
            raise FoldError(f"class {label.value} has {len(members)} samples, fewer than k={k}")
        for j in rng.permutation(len(members)):
            assignment[members[j]] = pos % k
            pos += 1
    if len(assignment) != len(samples):
        raise DuplicateIdError("sample ids are not unique")
    folds = FoldAssignment(k, assignment)
    if isinstance(corpus, Corpus):
        dev = folds.max_share_deviation(corpus)
        if dev > tolerance:
            log.warning("fold abusive share deviates %.4f from global share (tolerance %.4f)", dev, tolerance)
    return folds


def make_synthetic_corpus(
    n: int = 500,
    ratio: float = 3.5,
    seed: int = 0,
    vocab_per_class: int = 40,
    min_len: int = 6,
    max_len: int = 16,
) -> Corpus:
    """Build a separable toy corpus with disjoint vocabularies per class.

    ``ratio`` is the number of non-abusive samples per abusive sample.
    Words are random lowercase strings, so the corpus carries no real content.
    """
    rng = np.random.default_rng(seed)
    letters = np.array(list("abcdefghijklmnopqrstuvwxyz"))

    def words(count):
        out: list[str] = []
        taken = set()
        while len(out) < count:
            w = "".join(rng.choice(letters, size=int(rng.integers(3, 8))))
            if w not in taken:
                taken.add(w)
                out.append(w)
        return out

    vocab = words(2 * vocab_per_class)
    abusive_vocab, clean_vocab = vocab[:vocab_per_class], vocab[vocab_per_class:]
    n_abusive = int(round(n / (1 + ratio)))
    labels = [Label.ABUSIVE] * n_abusive + [Label.NON_ABUSIVE] * (n - n_abusive)
    labels = [labels[i] for i in rng.permutation(n)]
    sources = list(Source)
    samples = []
    for i, label in enumerate(labels):
        pool = abusive_vocab if label is Label.ABUSIVE else clean_vocab
        length = int(rng.integers(min_len, max_len + 1))
        text = " ".join(pool[j] for j in rng.integers(0, len(pool), size=length))
        source = sources[int(rng.integers(0, len(sources)))]
        samples.append(TextSample(f"{source.value.lower()}:{i}", text, label, source))
    return Corpus.from_samples(samples)
