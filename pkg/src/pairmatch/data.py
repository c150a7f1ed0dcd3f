"""Vocabulary, embedding tables, dataset files, and batching.

Text handling is deliberately plain: lowercase whitespace tokenization,
right-padding/truncation to a fixed length m, PAD id 0, UNK id 1.
Dataset files are UTF-8 TSV with columns
``query_id<TAB>s1<TAB>s2<TAB>label<TAB>domain`` (query_id may be empty).
Embedding files use the GloVe text layout: ``token v1 ... vl`` per line.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError
from .tensor import Tensor

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

SOURCE = "source"
TARGET = "target"


def tokenize(text: str) -> list[str]:
    return text.lower().split()


class Vocabulary:
    """Bijective token <-> id map with reserved PAD (0) and UNK (1)."""

    def __init__(self, tokens=()):
        self.id_to_token: list[str] = [PAD_TOKEN, UNK_TOKEN]
        self.token_to_id: dict[str, int] = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        tid = self.token_to_id.get(token)
        if tid is None:
            tid = len(self.id_to_token)
            self.token_to_id[token] = tid
            self.id_to_token.append(token)
        return tid

    def encode_token(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def decode(self, tid: int) -> str:
        return self.id_to_token[tid]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @classmethod
    def from_corpus(cls, texts) -> "Vocabulary":
        """Deterministic vocabulary: tokens ordered by (-count, token)."""
        counts: dict[str, int] = {}
        for text in texts:
            for tok in tokenize(text):
                counts[tok] = counts.get(tok, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls(ordered)


def _hash_random_vector(token: str, l: int, seed: int, scale: float = 0.25) -> np.ndarray:
    """Seeded per-token vector in +-scale, stable across runs and processes."""
    token_hash = zlib.crc32(token.encode("utf-8"))
    rng = np.random.default_rng(np.random.SeedSequence([seed, token_hash]))
    return rng.uniform(-scale, scale, size=l)


@dataclass
class EmbeddingTable:
    """Token lookup matrix of shape (l, |V|); the PAD column is pinned at zero."""

    vocab: Vocabulary
    matrix: Tensor
    l: int
    trainable: bool = True

    def __post_init__(self):
        if self.matrix.data.shape != (self.l, len(self.vocab)):
            raise ShapeError(
                f"embedding matrix shape {self.matrix.data.shape} != ({self.l}, {len(self.vocab)})")
        self.matrix.requires_grad = self.trainable
        self.matrix.name = "embedding"

    @classmethod
    def random(cls, vocab: Vocabulary, l: int, seed: int = 0,
               trainable: bool = True, dtype=np.float64) -> "EmbeddingTable":
        mat = np.zeros((l, len(vocab)), dtype=dtype)
        for tid in range(1, len(vocab)):
            mat[:, tid] = _hash_random_vector(vocab.decode(tid), l, seed)
        return cls(vocab=vocab, matrix=Tensor(mat.astype(dtype), requires_grad=trainable),
                   l=l, trainable=trainable)


def load_embeddings(path, expected_l: int, vocab: Vocabulary | None = None,
                    seed: int = 0, trainable: bool = True) -> EmbeddingTable:
    """Read a GloVe-layout text file into an EmbeddingTable.

    With no vocabulary given, the vocabulary is PAD/UNK plus the file's
    tokens in file order.  Tokens missing from the file (always UNK, and
    any corpus token when ``vocab`` is supplied) get seeded hash-based
    random vectors in +-0.25.  Any line whose vector length differs from
    ``expected_l`` is rejected with its line number.
    """
    if expected_l <= 0:
        raise DataError(f"load_embeddings: embedding dim must be positive, got {expected_l}")
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) == 1 and parts[0] == "":
                continue
            token, values = parts[0], parts[1:]
            if len(values) != expected_l:
                raise DataError(
                    f"load_embeddings: line {lineno}: expected {expected_l} values, "
                    f"got {len(values)}")
            try:
                vectors[token] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise DataError(f"load_embeddings: line {lineno}: {exc}") from None
    if not vectors:
        warnings.warn(f"embedding file {path} contained no vectors", stacklevel=2)
    if vocab is None:
        vocab = Vocabulary(vectors.keys())
    mat = np.zeros((expected_l, len(vocab)))
    for tid in range(1, len(vocab)):
        token = vocab.decode(tid)
        vec = vectors.get(token)
        mat[:, tid] = vec if vec is not None else _hash_random_vector(token, expected_l, seed)
    return EmbeddingTable(vocab=vocab, matrix=Tensor(mat, requires_grad=trainable),
                          l=expected_l, trainable=trainable)


def encode_text(text: str, vocab: Vocabulary, m: int) -> np.ndarray:
    if m <= 0:
        raise DataError(f"encode: pad length m must be positive, got {m}")
    ids = [vocab.encode_token(tok) for tok in tokenize(text)[:m]]
    ids.extend([PAD_ID] * (m - len(ids)))
    return np.array(ids, dtype=np.int64)


def encode_pair(s1: str, s2: str, m: int,
                vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    """Both sentences right-padded/truncated to the same length m."""
    return encode_text(s1, vocab, m), encode_text(s2, vocab, m)


@dataclass
class Example:
    """One encoded sentence pair."""

    s1: np.ndarray
    s2: np.ndarray
    label: int
    domain: str
    query_id: str = ""


@dataclass
class Batch:
    """A padded batch of examples from a single domain."""

    x1: np.ndarray  # (B, m) token ids
    x2: np.ndarray
    labels: np.ndarray  # (B,)
    domain: str
    query_ids: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.x1.shape[0]


@dataclass
class PairRow:
    """One raw (pre-encoding) dataset row, exactly as stored in TSV."""

    query_id: str
    s1: str
    s2: str
    label: int
    domain: str


def write_rows(path, rows: list[PairRow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(f"{r.query_id}\t{r.s1}\t{r.s2}\t{r.label}\t{r.domain}\n")


def read_rows(path) -> list[PairRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(f"{path}: line {lineno}: expected 5 tab-separated "
                                f"columns, got {len(parts)}")
            query_id, s1, s2, label, domain = parts
            if not s1.strip() or not s2.strip():
                raise DataError(f"{path}: line {lineno}: empty sentence")
            try:
                label_int = int(label)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: label {label!r} is not an "
                                f"integer") from None
            if domain not in (SOURCE, TARGET):
                raise DataError(f"{path}: line {lineno}: domain must be "
                                f"'{SOURCE}' or '{TARGET}', got {domain!r}")
            rows.append(PairRow(query_id, s1, s2, label_int, domain))
    return rows


def encode_rows(rows: list[PairRow], vocab: Vocabulary, m: int,
                num_classes: int | None = None) -> list[Example]:
    examples = []
    for r in rows:
        if num_classes is not None and not 0 <= r.label < num_classes:
            raise DataError(f"label {r.label} out of range [0, {num_classes})")
        s1, s2 = encode_pair(r.s1, r.s2, m, vocab)
        examples.append(Example(s1=s1, s2=s2, label=r.label, domain=r.domain,
                                query_id=r.query_id))
    return examples


def load_dataset(path, vocab: Vocabulary, m: int,
                 num_classes: int | None = None) -> list[Example]:
    return encode_rows(read_rows(path), vocab, m, num_classes)


def num_batches(n_examples: int, batch_size: int) -> int:
    return -(-n_examples // batch_size)


def batch_iter(examples: list[Example], batch_size: int, shuffle: bool = False,
               seed: int = 0) -> list[Batch]:
    """Partition a dataset into batches; the final short batch is kept.

    The order is deterministic for a fixed seed, and corpus order when
    shuffle is off.
    """
    if batch_size < 1:
        raise DataError(f"batch_iter: batch size must be >= 1, got {batch_size}")
    order = np.arange(len(examples))
    if shuffle:
        np.random.default_rng(seed).shuffle(order)
    batches = []
    for start in range(0, len(examples), batch_size):
        chunk = [examples[i] for i in order[start:start + batch_size]]
        domains = {e.domain for e in chunk}
        batches.append(Batch(
            x1=np.stack([e.s1 for e in chunk]),
            x2=np.stack([e.s2 for e in chunk]),
            labels=np.array([e.label for e in chunk], dtype=np.int64),
            domain=chunk[0].domain if len(domains) == 1 else "mixed",
            query_ids=[e.query_id for e in chunk],
        ))
    return batches
