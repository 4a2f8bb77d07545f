"""Span-level precision/recall/F1, classification accuracy, and the training
history bookkeeping used for early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import ContractError


@dataclass
class SpanMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "f1": self.f1, "tp": self.tp, "fp": self.fp, "fn": self.fn}


def span_f1(gold: Sequence[Sequence[tuple[int, int]]],
            predicted: Sequence[Sequence[tuple[int, int]]]) -> SpanMetrics:
    """Exact-offset span matching, sentence by sentence; each gold span can
    match at most one prediction.

    The all-empty case (no gold and no predicted spans anywhere) scores
    f1 = 1.0: the system made no errors.
    """
    if len(gold) != len(predicted):
        raise ContractError(
            f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    tp = fp = fn = 0
    for g_spans, p_spans in zip(gold, predicted):
        remaining = list(g_spans)
        for span in p_spans:
            if span in remaining:
                remaining.remove(span)
                tp += 1
            else:
                fp += 1
        fn += len(remaining)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if tp + fp + fn == 0:
        return SpanMetrics(precision, recall, 1.0, tp, fp, fn)
    f1 = (2.0 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return SpanMetrics(precision, recall, f1, tp, fp, fn)


def accuracy(gold: Sequence, predicted: Sequence) -> float:
    """Exact-match fraction over paired labels."""
    if len(gold) != len(predicted):
        raise ContractError(f"{len(gold)} gold labels vs {len(predicted)} "
                            "predictions")
    if not gold:
        raise ContractError("accuracy needs at least one sample")
    correct = sum(1 for g, p in zip(gold, predicted) if g == p)
    return correct / len(gold)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_metric: float


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_metric: float = float("-inf")
    stale_epochs: int = 0

    def as_dict(self) -> dict:
        return {
            "epochs": [{"epoch": r.epoch, "train_loss": r.train_loss,
                        "val_metric": r.val_metric} for r in self.records],
            "best_epoch": self.best_epoch,
            "best_metric": self.best_metric,
        }


def early_stopping_update(history: History, epoch: int, train_loss: float,
                          metric: float, patience: int) -> bool:
    """Record one epoch; returns True when training should stop.

    Only a strictly greater metric counts as an improvement; equal-to-best
    resets nothing.
    """
    history.records.append(EpochRecord(epoch, train_loss, metric))
    if metric > history.best_metric:
        history.best_metric = metric
        history.best_epoch = epoch
        history.stale_epochs = 0
        return False
    history.stale_epochs += 1
    return history.stale_epochs >= patience
