"""Linear-chain CRF output layer.

Scores a tag sequence as emissions plus transition weights, normalizes with
the exact forward algorithm (O(T L^2)), and decodes with Viterbi. Two
synthetic states, START and STOP, occupy the last two rows/columns of the
transition matrix; transitions into START and out of STOP are pinned to a
large negative constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import backends
from .autodiff import Tensor
from .errors import ContractError

IMPOSSIBLE = -1e4


@dataclass
class CrfParams:
    transitions: Tensor  # [(L+2) x (L+2)], START = L, STOP = L + 1
    label_set: list[str]
    _label_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._label_index = {lab: i for i, lab in enumerate(self.label_set)}

    @classmethod
    def init(cls, label_set: Sequence[str],
             constrain_iob: bool = False) -> "CrfParams":
        L = len(label_set)
        trans = np.zeros((L + 2, L + 2))
        trans[:, L] = IMPOSSIBLE  # nothing may enter START
        trans[L + 1, :] = IMPOSSIBLE  # nothing may leave STOP
        if constrain_iob:
            for j, lab in enumerate(label_set):
                if not lab.startswith("I-"):
                    continue
                inside = lab[2:]
                for i, prev in enumerate(label_set):
                    if prev not in (f"B-{inside}", f"I-{inside}"):
                        trans[i, j] = IMPOSSIBLE
                trans[L, j] = IMPOSSIBLE  # no I- at sentence start
        return cls(ad.parameter(trans), list(label_set))

    @property
    def num_labels(self) -> int:
        return len(self.label_set)

    @property
    def start_index(self) -> int:
        return len(self.label_set)

    @property
    def stop_index(self) -> int:
        return len(self.label_set) + 1

    def label_index(self, label: str) -> int:
        return self._label_index[label]

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.transitions": self.transitions}


def _check_instance(emissions: Tensor, p: CrfParams,
                    tags: Sequence[int] | None = None) -> None:
    if emissions.data.ndim != 2 or emissions.shape[1] != p.num_labels:
        raise ContractError(
            f"emissions shape {emissions.shape} does not match "
            f"{p.num_labels} labels")
    if emissions.shape[0] < 1:
        raise ContractError("need at least one time step")
    if tags is not None:
        if len(tags) != emissions.shape[0]:
            raise ContractError(
                f"{len(tags)} tags for {emissions.shape[0]} steps")
        if any(not 0 <= t < p.num_labels for t in tags):
            raise ContractError(f"tag out of range in {list(tags)}")


def crf_score(emissions: Tensor, p: CrfParams,
              tags: Sequence[int]) -> Tensor:
    """Unnormalized score of one tag sequence."""
    _check_instance(emissions, p, tags)
    T = emissions.shape[0]
    start, stop = p.start_index, p.stop_index
    em, tr = emissions.data, p.transitions.data
    tags = [int(t) for t in tags]
    value = tr[start, tags[0]] + tr[tags[-1], stop]
    for t in range(T):
        value += em[t, tags[t]]
        if t + 1 < T:
            value += tr[tags[t], tags[t + 1]]

    def vjp(g):
        gf = float(g)
        d_em = np.zeros_like(em)
        d_tr = np.zeros_like(tr)
        d_tr[start, tags[0]] += gf
        d_tr[tags[-1], stop] += gf
        for t in range(T):
            d_em[t, tags[t]] += gf
            if t + 1 < T:
                d_tr[tags[t], tags[t + 1]] += gf
        return d_em, d_tr

    return ad.apply_kernel_op(np.asarray(value),
                              (emissions, p.transitions), vjp)


def crf_log_partition(emissions: Tensor, p: CrfParams) -> Tensor:
    """log of the summed exponentiated scores of all label sequences."""
    _check_instance(emissions, p)
    k = backends.active()
    em, tr = emissions.data, p.transitions.data
    logz, alpha = k.crf_partition_forward(em, tr)

    def vjp(g):
        return k.crf_partition_backward(em, tr, alpha, logz, float(g))

    return ad.apply_kernel_op(np.asarray(logz),
                              (emissions, p.transitions), vjp)


def crf_nll(emissions: Tensor, p: CrfParams,
            gold_tags: Sequence[int]) -> Tensor:
    """Negative log-likelihood of the gold sequence; always >= 0."""
    return ad.sub(crf_log_partition(emissions, p),
                  crf_score(emissions, p, gold_tags))


def viterbi_decode(emissions: Tensor | np.ndarray,
                   p: CrfParams) -> tuple[list[int], float]:
    """Best tag sequence and its score. Ties resolve to the lowest label
    index at the earliest differing position."""
    em = emissions.data if isinstance(emissions, Tensor) else emissions
    _check_instance(ad.constant(em), p)
    tags, score = backends.active().crf_viterbi(em, p.transitions.data)
    return [int(t) for t in tags], float(score)
