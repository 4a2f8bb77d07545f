"""Finite-difference verification for every differentiable component.

Each suite builds a small fixed-seed instance, compares analytic gradients
against central differences, and reports the worst relative error together
with the parameter it occurred in. Losses are probed through a random
weighting so sign errors cannot cancel.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import GradTape, Tensor
from .charcnn import CharCnnParams, char_cnn_encode
from .crf import CrfParams, crf_nll
from .embeddings import Vocabulary, init_word_embeddings
from .errors import ConfigError
from .ian import (AttnParams, IanConfig, IanModel, PolarityInstance,
                  _instance_loss, attention_pool)
from .ote import OteConfig, OteModel, ote_forward
from .recurrent import BgruParams, GruParams, bgru_forward, gru_cell_step

COMPONENT_THRESHOLDS = {
    "gru": 1e-4,
    "bgru": 1e-4,
    "charcnn": 1e-4,
    "crf": 1e-4,
    "attention": 1e-4,
    "ote": 1e-3,
    "ian": 1e-3,
}


def finite_difference_error(loss_fn: Callable[[], Tensor],
                            params: dict[str, Tensor],
                            eps: float = 1e-5) -> tuple[float, str]:
    """Worst relative error between analytic and central-difference
    gradients over every coordinate of every parameter."""
    for p in params.values():
        p.zero_grad()
    with GradTape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = {k: (p.grad.copy() if p.grad is not None
                    else np.zeros_like(p.data))
                for k, p in params.items()}
    worst, worst_name = 0.0, ""
    for name, p in params.items():
        flat = p.data.reshape(-1)
        aflat = analytic[name].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            up = loss_fn().item()
            flat[i] = saved - eps
            down = loss_fn().item()
            flat[i] = saved
            numeric = (up - down) / (2.0 * eps)
            err = abs(aflat[i] - numeric) / max(abs(aflat[i]),
                                                abs(numeric), 1e-6)
            if err > worst:
                worst, worst_name = err, f"{name}[{i}]"
    for p in params.values():
        p.zero_grad()
    return worst, worst_name


def _probe(out: Tensor, rng: np.random.Generator) -> Tensor:
    weights = ad.constant(rng.uniform(-1.0, 1.0, out.shape))
    return ad.sum_all(ad.mul(out, weights))


def check_gru(seed: int = 0) -> tuple[float, str]:
    rng = np.random.default_rng(seed)
    p = GruParams.init(3, 4, rng)
    x = ad.parameter(rng.uniform(-2, 2, 3))
    h = ad.parameter(rng.uniform(-0.9, 0.9, 4))
    params = p.named("gru") | {"x": x, "h_prev": h}
    probe_rng = np.random.default_rng(seed + 1)
    probe = ad.constant(probe_rng.uniform(-1, 1, 4))
    return finite_difference_error(
        lambda: ad.sum_all(ad.mul(gru_cell_step(p, x, h), probe)), params)


def check_bgru(seed: int = 0) -> tuple[float, str]:
    rng = np.random.default_rng(seed)
    p = BgruParams.init(3, 4, rng)
    xs = ad.parameter(rng.uniform(-2, 2, (5, 3)))
    params = p.named("bgru") | {"xs": xs}
    probe = ad.constant(np.random.default_rng(seed + 1).uniform(-1, 1, (5, 8)))
    return finite_difference_error(
        lambda: ad.sum_all(ad.mul(bgru_forward(p, xs), probe)), params)


def check_charcnn(seed: int = 0) -> tuple[float, str]:
    rng = np.random.default_rng(seed)
    alphabet = Vocabulary("abcdef")
    p = CharCnnParams.init(alphabet, char_dim=5, num_filters=4, window=3,
                           rng=rng)
    params = p.named("charcnn")
    probe = ad.constant(np.random.default_rng(seed + 1).uniform(-1, 1, 4))
    return finite_difference_error(
        lambda: ad.sum_all(ad.mul(char_cnn_encode(p, "fadec"), probe)),
        params)


def check_crf(seed: int = 0) -> tuple[float, str]:
    rng = np.random.default_rng(seed)
    p = CrfParams.init(["B-Aspect", "I-Aspect", "O"])
    p.transitions.data[:3, :3] = rng.uniform(-1, 1, (3, 3))
    emissions = ad.parameter(rng.uniform(-1, 1, (4, 3)))
    gold = [int(g) for g in rng.integers(0, 3, 4)]
    params = {"emissions": emissions, "transitions": p.transitions}
    return finite_difference_error(
        lambda: crf_nll(emissions, p, gold), params)


def check_attention(seed: int = 0) -> tuple[float, str]:
    rng = np.random.default_rng(seed)
    p = AttnParams.init(4, 4, rng)
    states = ad.parameter(rng.uniform(-1, 1, (3, 4)))
    query = ad.parameter(rng.uniform(-1, 1, 4))
    params = {"states": states, "query": query} | p.named("attn")
    probe = ad.constant(np.random.default_rng(seed + 1).uniform(-1, 1, 4))

    def loss():
        _, pooled = attention_pool(states, query, p)
        return ad.sum_all(ad.mul(pooled, probe))

    return finite_difference_error(loss, params)


def _toy_ote(seed: int) -> tuple[OteModel, list[str], list[int]]:
    rng = np.random.default_rng(seed)
    tokens = ["غرفة", "نظيفة", "جدا"]
    vocab = Vocabulary(tokens)
    table = init_word_embeddings(vocab, 5, rng)
    alphabet = Vocabulary(sorted({c for t in tokens for c in t}))
    cfg = OteConfig(word_dim=5, char_dim=4, char_filters=3, char_window=3,
                    hidden_dim=3)
    model = OteModel.init(cfg, table, alphabet, rng)
    model.crf.transitions.data[:3, :3] = rng.uniform(-0.5, 0.5, (3, 3))
    return model, tokens, [0, 2, 1]


def check_ote(seed: int = 0) -> tuple[float, str]:
    model, tokens, gold = _toy_ote(seed)
    params = model.named_parameters()
    return finite_difference_error(
        lambda: crf_nll(ote_forward(model, tokens), model.crf, gold), params)


def _toy_ian(seed: int) -> tuple[IanModel, PolarityInstance]:
    rng = np.random.default_rng(seed)
    context = ["الفندق", "كان", "رائعا"]
    target = ["الفندق"]
    vocab = Vocabulary(context)
    table = init_word_embeddings(vocab, 5, rng)
    cfg = IanConfig(word_dim=5, hidden_dim=4)
    model = IanModel.init(cfg, table, rng)
    return model, PolarityInstance(context, target, 1)


def check_ian(seed: int = 0) -> tuple[float, str]:
    model, inst = _toy_ian(seed)
    params = model.named_parameters()
    return finite_difference_error(
        lambda: _instance_loss(model, inst, False, None), params)


CHECKS = {
    "gru": check_gru,
    "bgru": check_bgru,
    "charcnn": check_charcnn,
    "crf": check_crf,
    "attention": check_attention,
    "ote": check_ote,
    "ian": check_ian,
}


def run_check(component: str, seed: int = 0) -> tuple[float, str, float]:
    """(max relative error, offending parameter, threshold)."""
    if component not in CHECKS:
        raise ConfigError(f"unknown component {component!r}; "
                          f"have {sorted(CHECKS)}")
    err, name = CHECKS[component](seed)
    return err, name, COMPONENT_THRESHOLDS[component]
