"""Vocabularies, pretrained word-vector loading, and embedding tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, FormatError

PAD, UNK, NULL = "<PAD>", "<UNK>", "<NULL>"
RESERVED = (PAD, UNK, NULL)
PAD_INDEX, UNK_INDEX, NULL_INDEX = 0, 1, 2


class Vocabulary:
    """Dense token<->index bijection with three fixed reserved entries."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._tokens: list[str] = list(RESERVED)
        self._index: dict[str, int] = {t: i for i, t in enumerate(self._tokens)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        idx = self._index.get(token)
        if idx is None:
            idx = len(self._tokens)
            self._tokens.append(token)
            self._index[token] = idx
        return idx

    def index(self, token: str) -> int:
        """Index of ``token``, or the <UNK> index for unseen tokens."""
        return self._index.get(token, UNK_INDEX)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self._tokens)

    def token(self, index: int) -> str:
        return self._tokens[index]

    def tokens(self) -> list[str]:
        """All tokens in index order, reserved entries first."""
        return list(self._tokens)

    def non_reserved(self) -> list[str]:
        return self._tokens[len(RESERVED):]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index(t) for t in tokens]


@dataclass
class EmbeddingTable:
    vocabulary: Vocabulary
    matrix: Tensor  # [len(vocabulary), dim]
    dim: int
    trainable: bool = True

    def __post_init__(self):
        if self.matrix.shape != (len(self.vocabulary), self.dim):
            raise ConfigError(
                f"embedding matrix shape {self.matrix.shape} does not match "
                f"vocabulary size {len(self.vocabulary)} x dim {self.dim}")
        self.matrix.requires_grad = self.trainable


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Tokens with frequency >= min_count, most frequent first; ties keep
    first-occurrence order."""
    if min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    pos = 0
    for sentence in corpus:
        for tok in sentence:
            counts[tok] = counts.get(tok, 0) + 1
            if tok not in first_seen:
                first_seen[tok] = pos
            pos += 1
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(kept)


def build_char_alphabet(corpus: Iterable[Sequence[str]]) -> Vocabulary:
    """Character inventory of a token corpus, in first-occurrence order."""
    vocab = Vocabulary()
    for sentence in corpus:
        for tok in sentence:
            for ch in tok:
                vocab.add(ch)
    return vocab


def load_word_vectors(stream: TextIO, expected_dim: int | None = None,
                      trainable: bool = True) -> EmbeddingTable:
    """Parse word2vec/fastText text format (optional "count dim" header,
    then one "token v1 .. vd" line each).

    The three reserved rows are prepended: <PAD> and <NULL> are zero,
    <UNK> is the mean of all loaded vectors.
    """
    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    dim: int | None = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split(" ")
        if lineno == 1 and len(parts) == 2:
            try:
                int(parts[0]), int(parts[1])
            except ValueError:
                pass
            else:
                dim = int(parts[1])  # header line
                continue
        if dim is None:
            dim = len(parts) - 1
            if dim < 1:
                raise FormatError(f"line {lineno}: no vector components")
        if len(parts) - 1 != dim:
            raise FormatError(
                f"line {lineno}: expected {dim} components, "
                f"got {len(parts) - 1}")
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        tokens.append(parts[0])
        vectors.append(vec)
    if dim is None:
        raise FormatError("empty word-vector stream")
    if expected_dim is not None and dim != expected_dim:
        raise ConfigError(
            f"vectors have dim {dim}, expected {expected_dim}")
    vocab = Vocabulary(tokens)
    matrix = np.zeros((len(vocab), dim))
    if vectors:
        loaded = np.stack(vectors)
        matrix[len(RESERVED):] = loaded
        matrix[UNK_INDEX] = loaded.mean(axis=0)
    return EmbeddingTable(vocab, ad.parameter(matrix), dim, trainable)


def init_word_embeddings(vocab: Vocabulary, dim: int,
                         rng: np.random.Generator, scale: float = 0.1,
                         trainable: bool = True) -> EmbeddingTable:
    """Uniform(-scale, scale) table for training without pretrained vectors;
    the <PAD> and <NULL> rows stay zero."""
    matrix = rng.uniform(-scale, scale, (len(vocab), dim))
    matrix[PAD_INDEX] = 0.0
    matrix[NULL_INDEX] = 0.0
    return EmbeddingTable(vocab, ad.parameter(matrix), dim, trainable)


def init_char_embeddings(alphabet: Vocabulary, dim: int = 25,
                         rng: np.random.Generator | None = None
                         ) -> EmbeddingTable:
    """Character table drawn uniformly from [-b, b] with b = sqrt(3/dim)."""
    if rng is None:
        raise ConfigError("init_char_embeddings needs an rng")
    bound = math.sqrt(3.0 / dim)
    matrix = rng.uniform(-bound, bound, (len(alphabet), dim))
    return EmbeddingTable(alphabet, ad.parameter(matrix), dim, trainable=True)


def lookup(table: EmbeddingTable, token: str) -> Tensor:
    """Row for the token, or the <UNK> row when unseen; total function."""
    return ad.take_row(table.matrix, table.vocabulary.index(token))


def lookup_sequence(table: EmbeddingTable, tokens: Sequence[str]) -> Tensor:
    """Rows for a whole token sequence as a [len(tokens), dim] tensor."""
    return ad.take_rows(table.matrix, table.vocabulary.encode(tokens))
