"""Opinion-target extractor: word embedding + char-CNN features feeding a
BGRU, projected to per-token emission scores and decoded by a CRF."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .charcnn import CharCnnParams, char_cnn_encode
from .crf import CrfParams, crf_nll, viterbi_decode
from .data import IOB_LABELS, AnnotatedSentence, encode_iob, tags_to_spans
from .embeddings import (EmbeddingTable, Vocabulary, build_char_alphabet,
                         build_vocab, init_word_embeddings)
from .errors import ContractError, TrainingError
from .metrics import History, early_stopping_update, span_f1
from .optim import SgdMomentum
from .recurrent import BgruParams, bgru_forward


@dataclass
class OteConfig:
    """Training configuration; defaults are the published values for this
    model family (SGD momentum 0.9, batch 16, eta0 0.01 with 0.04 decay,
    clip 5.0, dropout 0.5)."""

    word_dim: int = 100
    char_dim: int = 25
    char_filters: int = 30
    char_window: int = 3
    hidden_dim: int = 100  # per direction
    lr0: float = 0.01
    decay: float = 0.04
    momentum: float = 0.9
    batch_size: int = 16
    clip_norm: float = 5.0
    dropout: float = 0.5
    max_epochs: int = 100
    patience: int = 10
    min_count: int = 1
    freeze_embeddings: bool = False
    constrain_iob: bool = False
    seed: int = 0


@dataclass
class OteModel:
    word_table: EmbeddingTable
    char_cnn: CharCnnParams
    bgru: BgruParams
    proj_w: Tensor  # [num_labels, 2 * hidden_dim]
    proj_b: Tensor  # [num_labels]
    crf: CrfParams
    dropout_rate: float = 0.5
    label_set: list[str] = field(default_factory=lambda: list(IOB_LABELS))

    @classmethod
    def init(cls, config: OteConfig, word_table: EmbeddingTable,
             char_alphabet: Vocabulary,
             rng: np.random.Generator) -> "OteModel":
        char_cnn = CharCnnParams.init(
            char_alphabet, config.char_dim, config.char_filters,
            config.char_window, rng)
        input_dim = word_table.dim + config.char_filters
        bgru = BgruParams.init(input_dim, config.hidden_dim, rng)
        L = len(IOB_LABELS)
        proj_w = ad.parameter(
            rng.uniform(-0.1, 0.1, (L, 2 * config.hidden_dim)))
        proj_b = ad.parameter(np.zeros(L))
        crf = CrfParams.init(IOB_LABELS, config.constrain_iob)
        return cls(word_table, char_cnn, bgru, proj_w, proj_b, crf,
                   config.dropout)

    def named_parameters(self) -> dict[str, Tensor]:
        out = {"word.matrix": self.word_table.matrix}
        out.update(self.char_cnn.named("char"))
        out.update(self.bgru.named("bgru"))
        out["proj.w"] = self.proj_w
        out["proj.b"] = self.proj_b
        out.update(self.crf.named("crf"))
        return out


def ote_forward(m: OteModel, tokens: Sequence[str], training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
    """Per-token emission scores, shape [len(tokens), num_labels]."""
    if not tokens:
        raise ContractError("ote_forward needs at least one token")
    word_vecs = ad.take_rows(m.word_table.matrix,
                             m.word_table.vocabulary.encode(tokens))
    char_vecs = ad.stack_rows([
        char_cnn_encode(m.char_cnn, w, training, rng, m.dropout_rate)
        for w in tokens])
    x = ad.concat([word_vecs, char_vecs], axis=1)
    x = ad.dropout(x, m.dropout_rate, training, rng)
    h = bgru_forward(m.bgru, x)
    h = ad.dropout(h, m.dropout_rate, training, rng)
    return ad.add(ad.matmul(h, ad.transpose(m.proj_w)), m.proj_b)


def predict_tags(m: OteModel, tokens: Sequence[str]) -> list[str]:
    emissions = ote_forward(m, tokens, training=False)
    indices, _ = viterbi_decode(emissions, m.crf)
    return [m.label_set[i] for i in indices]


def predict_ote(m: OteModel,
                sentence: AnnotatedSentence) -> list[tuple[int, int]]:
    """Character spans of predicted opinion targets."""
    if not sentence.tokens:
        return []
    tags = predict_tags(m, [t.surface for t in sentence.tokens])
    return tags_to_spans(tags, sentence.tokens)


def validation_f1(m: OteModel,
                  sentences: Sequence[AnnotatedSentence]) -> float:
    gold = [s.explicit_spans() for s in sentences]
    pred = [predict_ote(m, s) for s in sentences]
    return span_f1(gold, pred).f1


def _snapshot(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: v.data.copy() for k, v in params.items()}


def _restore(params: dict[str, Tensor], snap: dict[str, np.ndarray]) -> None:
    for k, v in params.items():
        v.data[...] = snap[k]


def train_ote(config: OteConfig,
              train_set: Sequence[AnnotatedSentence],
              val_set: Sequence[AnnotatedSentence],
              rng: np.random.Generator,
              word_table: EmbeddingTable | None = None
              ) -> tuple[OteModel, History]:
    """Mini-batch SGD with momentum, per-epoch learning-rate decay, global
    gradient clipping, and early stopping on validation span F1."""
    train_set = [s for s in train_set if s.tokens]
    if not train_set:
        raise ContractError("empty training set")
    token_seqs = [[t.surface for t in s.tokens] for s in train_set]
    if word_table is None:
        vocab = build_vocab(token_seqs, config.min_count)
        word_table = init_word_embeddings(vocab, config.word_dim, rng)
    word_table.matrix.requires_grad = not config.freeze_embeddings
    word_table.trainable = not config.freeze_embeddings
    alphabet = build_char_alphabet(token_seqs)
    model = OteModel.init(config, word_table, alphabet, rng)
    params = model.named_parameters()
    gold_tags = [[model.crf.label_index(t) for t in encode_iob(s)]
                 for s in train_set]

    opt = SgdMomentum(config.lr0, config.decay, config.momentum)
    history = History()
    best = _snapshot(params)
    n = len(train_set)
    for epoch in range(config.max_epochs):
        opt.set_epoch(epoch)
        order = rng.permutation(n)
        total_loss = 0.0
        for b0 in range(0, n, config.batch_size):
            batch = order[b0:b0 + config.batch_size]
            for p in params.values():
                p.zero_grad()
            with ad.GradTape() as tape:
                losses = [crf_nll(
                    ote_forward(model, token_seqs[i], True, rng),
                    model.crf, gold_tags[i]) for i in batch]
                loss = ad.scale(ad.add_n(losses), 1.0 / len(batch))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, "
                    f"batch starting {b0}")
            tape.backward(loss)
            grads = {k: p.grad for k, p in params.items()
                     if p.grad is not None}
            ad.clip_global_norm(grads, config.clip_norm)
            opt.step(params, grads)
            total_loss += value * len(batch)
        f1 = validation_f1(model, val_set) if val_set else 0.0
        improved = f1 > history.best_metric
        stop = early_stopping_update(history, epoch, total_loss / n, f1,
                                     config.patience)
        if improved:
            best = _snapshot(params)
        if stop:
            break
    _restore(params, best)
    return model, history
