"""Corpus ingestion: tokens, vocabulary, tf-idf, sparse files and splits.

Sparse file format (one sample per line)::

    #d 5000
    +1 3:0.25 17:0.5
    -1
    12:1.0

The ``#d`` header is mandatory.  A line may start with a label (``+1``,
``-1``, ``1`` or ``0``; ``0`` means negative), followed by ``index:value``
pairs with strictly ascending 1-based indices.  A blank line is an unlabeled
all-zero sample.  Values are written with 17 significant digits, which
round-trips every float64 exactly.
"""

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import LabeledSet
from .errors import InvalidInputError, ParseError
from .moments import as_data_matrix

log = logging.getLogger(__name__)

_TOKEN = re.compile(r"[^\W_]+")

POSITIVE_LABELS = {"+1", "1", "pos", "positive", "spam"}
NEGATIVE_LABELS = {"-1", "0", "neg", "negative", "ham", "nonspam", "non-spam"}
UNLABELED = {"unlabeled", "unlabelled", "?"}


def tokenize(text):
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple
    index: dict = field(compare=False, repr=False)
    truncated: bool = False

    @classmethod
    def from_terms(cls, terms, truncated=False):
        terms = tuple(terms)
        index = {t: i for i, t in enumerate(terms)}
        if len(index) != len(terms):
            raise InvalidInputError("vocabulary contains duplicate terms")
        return cls(terms, index, truncated)

    @property
    def size(self):
        return len(self.terms)

    def __len__(self):
        return len(self.terms)


def document_frequencies(docs):
    counts = Counter()
    for tokens in docs:
        counts.update(set(tokens))
    return counts


def build_vocabulary(docs, d):
    """Top-``d`` terms by document frequency, ties broken lexicographically.

    When fewer than ``d`` distinct terms exist the vocabulary is shorter and
    ``truncated`` is set.
    """
    d = int(d)
    if d < 1:
        raise InvalidInputError(f"vocabulary size must be >= 1, got {d}")
    docs = list(docs)
    if not docs:
        raise InvalidInputError("cannot build a vocabulary from an empty corpus")
    df = document_frequencies(docs)
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
    truncated = len(ranked) < d
    if truncated:
        log.warning("only %d distinct terms available, requested %d", len(ranked), d)
    return Vocabulary.from_terms((t for t, _ in ranked[:d]), truncated=truncated)


def idf_weights(docs, vocab):
    """Smoothed inverse document frequency ``ln((1 + N) / (1 + df)) + 1``."""
    docs = list(docs)
    N = len(docs)
    df = np.zeros(len(vocab))
    for tokens in docs:
        for term in set(tokens):
            i = vocab.index.get(term)
            if i is not None:
                df[i] += 1
    return np.log((1.0 + N) / (1.0 + df)) + 1.0


def term_counts(docs, vocab):
    docs = list(docs)
    X = np.zeros((len(vocab), len(docs)))
    for j, tokens in enumerate(docs):
        for term, count in Counter(tokens).items():
            i = vocab.index.get(term)
            if i is not None:
                X[i, j] = count
    return X


@dataclass(frozen=True)
class TfidfResult:
    X: np.ndarray
    idf: np.ndarray
    empty: np.ndarray


def tfidf_vectorize(docs, vocab, unit_normalize=True, idf_docs=None):
    """Raw-count tf times smoothed idf, one column per document.

    ``idf_docs`` selects the documents the idf is fitted on (default: ``docs``).
    Documents with no vocabulary term stay zero and are listed in ``empty``.
    """
    docs = list(docs)
    idf = idf_weights(docs if idf_docs is None else idf_docs, vocab)
    X = term_counts(docs, vocab) * idf[:, None]
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    empty = np.flatnonzero(norms == 0)
    if unit_normalize:
        nz = norms > 0
        X[:, nz] /= norms[nz]
    return TfidfResult(X=X, idf=idf, empty=empty)


def _parse_label(token, lineno, path):
    if token in ("+1", "1"):
        return 1.0
    if token in ("-1", "0"):
        return -1.0
    raise ParseError(f"bad label {token!r}", lineno, path)


def read_sparse(path):
    """Read a sparse sample file.

    Returns
    -------
    X : ndarray of shape (d, n)
    labels : ndarray of shape (n,) or None
        Present only when every sample line carries a label.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror or exc}", None, path) from None
    d = None
    columns, labels, linenos = [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if d is None:
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0] != "#d":
                raise ParseError("missing '#d <dimension>' header", lineno, path)
            try:
                d = int(parts[1])
            except ValueError:
                raise ParseError(f"bad dimension {parts[1]!r}", lineno, path) from None
            if d < 1:
                raise ParseError(f"dimension must be >= 1, got {d}", lineno, path)
            continue
        if line.startswith("#"):
            continue
        tokens = line.split()
        label = None
        if tokens and ":" not in tokens[0]:
            label = _parse_label(tokens[0], lineno, path)
            tokens = tokens[1:]
        entries = {}
        last = 0
        for tok in tokens:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {tok!r}", lineno, path)
            try:
                i = int(idx)
                v = float(val)
            except ValueError:
                raise ParseError(f"malformed pair {tok!r}", lineno, path) from None
            if not 1 <= i <= d:
                raise ParseError(f"index {i} outside 1..{d}", lineno, path)
            if i <= last:
                raise ParseError(f"indices must be strictly ascending at {i}", lineno, path)
            if not math.isfinite(v):
                raise ParseError(f"non-finite value at index {i}", lineno, path)
            entries[i - 1] = v
            last = i
        columns.append(entries)
        labels.append(label)
        linenos.append(lineno)
    if d is None:
        raise ParseError("missing '#d <dimension>' header", None, path)
    X = np.zeros((d, len(columns)))
    for j, entries in enumerate(columns):
        for i, v in entries.items():
            X[i, j] = v
    have = [lab is not None for lab in labels]
    if columns and all(have):
        return X, np.asarray(labels, dtype=np.float64)
    if any(have):
        raise ParseError("labels must be given on every line or none",
                         linenos[have.index(False)], path)
    return X, None


def format_sparse(X, labels=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError("expected a 2-D matrix")
    if labels is not None:
        labels = np.asarray(labels).ravel()
        if labels.shape[0] != X.shape[1]:
            raise InvalidInputError("label count does not match column count")
    out = [f"#d {X.shape[0]}"]
    for j in range(X.shape[1]):
        parts = []
        if labels is not None:
            parts.append("+1" if labels[j] > 0 else "-1")
        for i in np.flatnonzero(X[:, j]):
            parts.append(f"{i + 1}:{X[i, j]:.17g}")
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def write_sparse(path, X, labels=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_sparse(X, labels))


def read_labeled(path):
    X, y = read_sparse(path)
    if y is None:
        raise InvalidInputError(f"{path}: file has no labels")
    return LabeledSet(X, y)


def split_indices(n, size, seed):
    """Indices of a seeded uniform subset and of its complement, both sorted."""
    size = int(size)
    if size < 0 or size > n:
        raise InvalidInputError(f"cannot draw {size} samples from a pool of {n}")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.permutation(n)[:size])
    mask = np.ones(n, dtype=bool)
    mask[chosen] = False
    return chosen, np.flatnonzero(mask)


def sample_validation(pool, size, seed):
    """Draw a validation subset from a labeled pool.

    Returns ``(validation, remainder)``; the remainder keeps pool order.
    """
    val_idx, rest_idx = split_indices(pool.n, size, seed)
    return pool.subset(val_idx), pool.subset(rest_idx)


@dataclass(frozen=True)
class CorpusSplit:
    source_labeled: LabeledSet
    target_unlabeled: np.ndarray
    target_labeled_pool: LabeledSet
    seed: int = 0

    def __post_init__(self):
        d = self.source_labeled.X.shape[0]
        for name, X in (("target_unlabeled", self.target_unlabeled),
                        ("target_labeled_pool", self.target_labeled_pool.X)):
            if np.asarray(X).shape[0] != d:
                raise InvalidInputError(f"{name} has {np.asarray(X).shape[0]} features, "
                                        f"expected {d}")


def _label_from_name(name):
    key = name.strip().lower()
    if key in POSITIVE_LABELS:
        return 1.0
    if key in NEGATIVE_LABELS:
        return -1.0
    if key in UNLABELED:
        return None
    raise InvalidInputError(f"unrecognized label {name!r}")


@dataclass
class RawDocument:
    split: str
    label: object
    doc_id: str
    tokens: list


def scan_corpus_dir(root):
    """Collect ``<split>/<label>/<docid>.txt`` documents under ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise InvalidInputError(f"{root} is not a directory")
    docs = []
    for split_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for label_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
            label = _label_from_name(label_dir.name)
            for f in sorted(label_dir.glob("*.txt")):
                text = f.read_text(encoding="utf-8", errors="replace")
                docs.append(RawDocument(split_dir.name, label, f.stem, tokenize(text)))
    if not docs:
        raise InvalidInputError(f"no <split>/<label>/*.txt documents under {root}")
    return docs


def scan_manifest(path):
    """Collect documents listed as ``<split> <label> <path>`` lines.

    Relative paths resolve against the manifest's directory; ``#`` starts a
    comment line.
    """
    path = Path(path)
    base = path.parent
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 2)
            if len(parts) != 3:
                raise ParseError("expected '<split> <label> <path>'", lineno, path)
            split, label_name, doc_path = parts
            try:
                label = _label_from_name(label_name)
            except InvalidInputError as exc:
                raise ParseError(str(exc), lineno, path) from None
            p = Path(doc_path)
            if not p.is_absolute():
                p = base / p
            if not p.is_file():
                raise ParseError(f"document {p} not found", lineno, path)
            text = p.read_text(encoding="utf-8", errors="replace")
            docs.append(RawDocument(split, label, p.stem, tokenize(text)))
    if not docs:
        raise InvalidInputError(f"manifest {path} lists no documents")
    return docs


def ingest(docs, out_dir, vocab_size=5000, idf_splits=None, unit_normalize=True):
    """Vectorize raw documents and write one sparse file per split.

    Labeled documents of split ``s`` go to ``s.svm``; unlabeled ones to
    ``s_unlabeled.svm``.  The vocabulary and the IDs of documents with no
    vocabulary term are written next to them.  Returns a summary dict.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab = build_vocabulary((doc.tokens for doc in docs), vocab_size)
    idf_docs = None
    if idf_splits:
        idf_docs = [doc.tokens for doc in docs if doc.split in idf_splits]
        if not idf_docs:
            raise InvalidInputError(f"no documents in idf splits {sorted(idf_splits)}")
    result = tfidf_vectorize([doc.tokens for doc in docs], vocab,
                             unit_normalize=unit_normalize, idf_docs=idf_docs)
    empty = set(result.empty.tolist())
    dropped = []
    groups = {}
    for j, doc in enumerate(docs):
        if j in empty:
            dropped.append(f"{doc.split}/{doc.doc_id}")
            continue
        name = doc.split if doc.label is not None else f"{doc.split}_unlabeled"
        groups.setdefault(name, []).append(j)
    files = {}
    for name, cols in sorted(groups.items()):
        labels = [docs[j].label for j in cols]
        path = out_dir / f"{name}.svm"
        write_sparse(path, result.X[:, cols], None if labels[0] is None else labels)
        files[name] = {"path": str(path), "n": len(cols)}
    (out_dir / "vocab.txt").write_text("\n".join(vocab.terms) + "\n", encoding="utf-8")
    (out_dir / "dropped.txt").write_text("".join(f"{x}\n" for x in dropped), encoding="utf-8")
    for doc_id in dropped:
        log.info("dropped document with no vocabulary term: %s", doc_id)
    return {"vocab_size": len(vocab), "vocab_truncated": vocab.truncated,
            "files": files, "dropped": dropped}


def append_constant_row(X, value=1.0):
    """Append a constant feature row (optional bias feature for the learners)."""
    X = as_data_matrix(X)
    return np.vstack([X, np.full((1, X.shape[1]), float(value))])


def drop_empty_columns(X):
    """Return ``X`` without all-zero columns and the indices that were kept."""
    X = as_data_matrix(X)
    keep = np.flatnonzero(np.any(X != 0, axis=0))
    return X[:, keep], keep
