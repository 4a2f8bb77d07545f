"""Character-level word encoder: embed, convolve, max-pool.

Words are padded symmetrically with <PAD> characters so every real
character can sit at a window center; the per-filter max over positions
makes the output width independent of word length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import backends
from .autodiff import Tensor
from .embeddings import PAD_INDEX, EmbeddingTable, init_char_embeddings


@dataclass
class CharCnnParams:
    char_table: EmbeddingTable
    filters: Tensor  # [num_filters, window, char_dim]
    bias: Tensor  # [num_filters]
    num_filters: int
    window: int

    @classmethod
    def init(cls, alphabet, char_dim: int = 25, num_filters: int = 30,
             window: int = 3, rng: np.random.Generator | None = None,
             scale: float = 0.1) -> "CharCnnParams":
        table = init_char_embeddings(alphabet, char_dim, rng)
        filters = ad.parameter(
            rng.uniform(-scale, scale, (num_filters, window, char_dim)))
        bias = ad.parameter(np.zeros(num_filters))
        return cls(table, filters, bias, num_filters, window)

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.table": self.char_table.matrix,
                f"{prefix}.filters": self.filters,
                f"{prefix}.bias": self.bias}


def _padded_indices(p: CharCnnParams, word: str) -> list[int]:
    vocab = p.char_table.vocabulary
    side = (p.window - 1) // 2
    idxs = [PAD_INDEX] * side + [vocab.index(ch) for ch in word] \
        + [PAD_INDEX] * side
    while len(idxs) < p.window:
        idxs.append(PAD_INDEX)
    return idxs


def char_cnn_encode(p: CharCnnParams, word: str, training: bool = False,
                    rng: np.random.Generator | None = None,
                    dropout_rate: float = 0.5) -> Tensor:
    """Fixed-width feature vector [num_filters] for one word."""
    emb = ad.take_rows(p.char_table.matrix, _padded_indices(p, word))
    emb = ad.dropout(emb, dropout_rate, training, rng)

    k = backends.active()
    out, argmax = k.conv_maxpool_forward(emb.data, p.filters.data,
                                         p.bias.data)
    emb_data, filt_data = emb.data, p.filters.data

    def vjp(g):
        return k.conv_maxpool_backward(emb_data, filt_data, argmax, g)

    return ad.apply_kernel_op(out, (emb, p.filters, p.bias), vjp)
