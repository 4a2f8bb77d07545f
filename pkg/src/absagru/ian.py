"""Interactive attention classifier: context and target run through separate
BGRUs, each pooled under attention queried by the other side's mean state,
then concatenated into a softmax over polarities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import AnnotatedSentence
from .embeddings import (NULL, EmbeddingTable, Vocabulary, build_vocab,
                         init_word_embeddings)
from .errors import ConfigError, ContractError, TrainingError
from .metrics import History, accuracy, early_stopping_update
from .optim import Adam
from .recurrent import BgruParams, bgru_forward

CLASSES = ["positive", "negative", "neutral"]


@dataclass
class IanConfig:
    """Defaults follow the published polarity setup: Adam at 3e-5 with L2
    2e-5, dropout 0.3, batch 64, 12 epochs, 300-wide embeddings and hidden
    states. ``hidden_dim`` is the combined width of the two directions."""

    word_dim: int = 300
    hidden_dim: int = 300
    lr: float = 3e-5
    l2: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.3
    batch_size: int = 64
    epochs: int = 12
    min_count: int = 1
    freeze_embeddings: bool = False
    seed: int = 0

    def per_direction(self) -> int:
        if self.hidden_dim % 2:
            raise ConfigError(
                f"hidden_dim must be even (two directions), "
                f"got {self.hidden_dim}")
        return self.hidden_dim // 2


@dataclass
class AttnParams:
    w: Tensor  # [d_states, d_query]
    b: Tensor  # scalar

    @classmethod
    def init(cls, d_states: int, d_query: int,
             rng: np.random.Generator) -> "AttnParams":
        return cls(ad.parameter(rng.uniform(-0.1, 0.1, (d_states, d_query))),
                   ad.parameter(0.0))

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


@dataclass
class IanModel:
    word_table: EmbeddingTable
    context_bgru: BgruParams
    target_bgru: BgruParams
    context_attn: AttnParams
    target_attn: AttnParams
    cls_w: Tensor  # [num_classes, 2 * hidden_dim]
    cls_b: Tensor  # [num_classes]
    dropout_rate: float = 0.3
    classes: list[str] = field(default_factory=lambda: list(CLASSES))

    @classmethod
    def init(cls, config: IanConfig, word_table: EmbeddingTable,
             rng: np.random.Generator) -> "IanModel":
        half = config.per_direction()
        width = 2 * half
        context_bgru = BgruParams.init(word_table.dim, half, rng)
        target_bgru = BgruParams.init(word_table.dim, half, rng)
        context_attn = AttnParams.init(width, width, rng)
        target_attn = AttnParams.init(width, width, rng)
        cls_w = ad.parameter(rng.uniform(-0.1, 0.1, (len(CLASSES), 2 * width)))
        cls_b = ad.parameter(np.zeros(len(CLASSES)))
        return cls(word_table, context_bgru, target_bgru, context_attn,
                   target_attn, cls_w, cls_b, config.dropout)

    def named_parameters(self) -> dict[str, Tensor]:
        out = {"word.matrix": self.word_table.matrix}
        out.update(self.context_bgru.named("ctx_bgru"))
        out.update(self.target_bgru.named("tgt_bgru"))
        out.update(self.context_attn.named("ctx_attn"))
        out.update(self.target_attn.named("tgt_attn"))
        out["cls.w"] = self.cls_w
        out["cls.b"] = self.cls_b
        return out


def attention_pool(states: Tensor, query: Tensor,
                   p: AttnParams) -> tuple[Tensor, Tensor]:
    """Weights softmax(tanh(states . W . query + b)) and the weighted sum of
    states under them."""
    if states.data.ndim != 2 or states.shape[0] == 0:
        raise ContractError(f"attention needs a non-empty [n, d] state "
                            f"matrix, got shape {states.shape}")
    scores = ad.tanh_act(ad.add(ad.matmul(states, ad.matmul(p.w, query)),
                                p.b))
    weights = ad.softmax(scores, axis=0)
    pooled = ad.matmul(weights, states)
    return weights, pooled


def _mean_rows(x: Tensor) -> Tensor:
    n = x.shape[0]
    return ad.matmul(ad.constant(np.full(n, 1.0 / n)), x)


def _encode_side(table: EmbeddingTable, bgru: BgruParams,
                 tokens: Sequence[str], rate: float, training: bool,
                 rng) -> Tensor:
    emb = ad.take_rows(table.matrix, table.vocabulary.encode(tokens))
    emb = ad.dropout(emb, rate, training, rng)
    return bgru_forward(bgru, emb)


def ian_logits(m: IanModel, context: Sequence[str], target: Sequence[str],
               training: bool = False,
               rng: np.random.Generator | None = None) -> Tensor:
    if not context or not target:
        raise ContractError("context and target token lists must be "
                            "non-empty (<NULL> stands in for implicit "
                            "targets)")
    ctx_states = _encode_side(m.word_table, m.context_bgru, context,
                              m.dropout_rate, training, rng)
    tgt_states = _encode_side(m.word_table, m.target_bgru, target,
                              m.dropout_rate, training, rng)
    ctx_mean = _mean_rows(ctx_states)
    tgt_mean = _mean_rows(tgt_states)
    _, ctx_rep = attention_pool(ctx_states, tgt_mean, m.context_attn)
    _, tgt_rep = attention_pool(tgt_states, ctx_mean, m.target_attn)
    rep = ad.concat([ctx_rep, tgt_rep])
    return ad.add(ad.matmul(m.cls_w, rep), m.cls_b)


def ian_forward(m: IanModel, context: Sequence[str], target: Sequence[str],
                training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
    """Class probabilities [num_classes]; they sum to 1."""
    return ad.softmax(ian_logits(m, context, target, training, rng), axis=0)


def target_tokens_for_span(sentence: AnnotatedSentence,
                           span: tuple[int, int]) -> list[str]:
    """Surfaces of tokens overlapping the span; [<NULL>] when none do."""
    a, b = span
    toks = [t.surface for t in sentence.tokens if t.start < b and t.end > a]
    return toks or [NULL]


def predict_polarity(m: IanModel, sentence: AnnotatedSentence,
                     span: tuple[int, int]) -> tuple[str, np.ndarray]:
    """Polarity label (ties go to the lowest class index) and the class
    probabilities."""
    context = [t.surface for t in sentence.tokens]
    if not context:
        context = [NULL]
    target = target_tokens_for_span(sentence, span)
    probs = ian_forward(m, context, target).data
    return m.classes[int(np.argmax(probs))], probs


@dataclass
class PolarityInstance:
    context: list[str]
    target: list[str]
    label: int


def polarity_instances(sentences: Sequence[AnnotatedSentence],
                       stopwords: set[str] | None = None
                       ) -> list[PolarityInstance]:
    """One instance per opinion tuple. Implicit (NULL) targets keep the
    sentence and use a single <NULL> target token. Stopword filtering only
    touches the context, and is skipped when it would empty it."""
    out: list[PolarityInstance] = []
    for s in sentences:
        context = [t.surface for t in s.tokens]
        if not context:
            continue
        if stopwords:
            kept = [w for w in context if w not in stopwords]
            context = kept or context
        for op in s.opinions:
            if op.polarity not in CLASSES:
                continue
            target = ([NULL] if op.implicit
                      else target_tokens_for_span(s, op.span))
            out.append(PolarityInstance(context, target,
                                        CLASSES.index(op.polarity)))
    return out


def _instance_loss(m: IanModel, inst: PolarityInstance, training: bool,
                   rng) -> Tensor:
    logp = ad.log_softmax(
        ian_logits(m, inst.context, inst.target, training, rng), axis=0)
    return ad.neg(ad.select(logp, inst.label))


def train_accuracy(m: IanModel,
                   instances: Sequence[PolarityInstance]) -> float:
    preds = [int(np.argmax(ian_forward(m, i.context, i.target).data))
             for i in instances]
    return accuracy([i.label for i in instances], preds)


def train_ian(config: IanConfig,
              train_set: Sequence[PolarityInstance],
              val_set: Sequence[PolarityInstance],
              rng: np.random.Generator,
              word_table: EmbeddingTable | None = None
              ) -> tuple[IanModel, History]:
    """Adam over mean cross-entropy for a fixed number of epochs; keeps the
    best-validation-accuracy snapshot. L2 regularization is applied through
    the optimizer to every non-embedding parameter."""
    if not train_set:
        raise ContractError("empty training set")
    if word_table is None:
        corpus = [i.context + i.target for i in train_set]
        vocab = build_vocab(corpus, config.min_count)
        word_table = init_word_embeddings(vocab, config.word_dim, rng)
    word_table.matrix.requires_grad = not config.freeze_embeddings
    word_table.trainable = not config.freeze_embeddings
    model = IanModel.init(config, word_table, rng)
    params = model.named_parameters()
    opt = Adam(config.lr, config.beta1, config.beta2, config.eps,
               weight_decay=config.l2, no_decay={"word.matrix"})
    history = History()
    best = {k: v.data.copy() for k, v in params.items()}
    n = len(train_set)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for b0 in range(0, n, config.batch_size):
            batch = order[b0:b0 + config.batch_size]
            for p in params.values():
                p.zero_grad()
            with ad.GradTape() as tape:
                losses = [_instance_loss(model, train_set[i], True, rng)
                          for i in batch]
                loss = ad.scale(ad.add_n(losses), 1.0 / len(batch))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch starting {b0}")
            tape.backward(loss)
            grads = {k: p.grad for k, p in params.items()
                     if p.grad is not None}
            opt.step(params, grads)
            total += value * len(batch)
        acc = train_accuracy(model, val_set) if val_set else 0.0
        improved = acc > history.best_metric
        early_stopping_update(history, epoch, total / n, acc,
                              patience=config.epochs + 1)
        if improved:
            best = {k: v.data.copy() for k, v in params.items()}
    for k, v in params.items():
        v.data[...] = best[k]
    return model, history
