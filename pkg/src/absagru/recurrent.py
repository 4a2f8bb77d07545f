"""GRU cell, sequence unrolling, and the bidirectional wrapper.

The single-step cell is composed from generic tape ops and doubles as the
slow-but-obvious oracle; ``gru_forward`` runs the whole sequence through one
fused backend kernel recorded as a single tape node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import backends
from .autodiff import Tensor
from .errors import ShapeError


@dataclass
class GruParams:
    """Gate weights: w_* act on the input, u_* on the previous hidden state.

    Biases are zero-initialized, so freshly initialized cells follow the
    bias-free gate equations exactly.
    """

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor
    input_dim: int
    hidden_dim: int

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int,
             rng: np.random.Generator, scale: float = 0.1) -> "GruParams":
        def w():
            return ad.parameter(rng.uniform(-scale, scale,
                                            (hidden_dim, input_dim)))

        def u():
            return ad.parameter(rng.uniform(-scale, scale,
                                            (hidden_dim, hidden_dim)))

        def b():
            return ad.parameter(np.zeros(hidden_dim))

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b(),
                   input_dim, hidden_dim)

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.{k}": getattr(self, k)
                for k in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r",
                          "w_h", "u_h", "b_h")}


@dataclass
class BgruParams:
    forward: GruParams
    backward: GruParams

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int,
             rng: np.random.Generator, scale: float = 0.1) -> "BgruParams":
        return cls(GruParams.init(input_dim, hidden_dim, rng, scale),
                   GruParams.init(input_dim, hidden_dim, rng, scale))

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = self.forward.named(f"{prefix}.fwd")
        out.update(self.backward.named(f"{prefix}.bwd"))
        return out


def gru_cell_step(p: GruParams, x_t: Tensor, h_prev: Tensor) -> Tensor:
    """One update: h_t = (1 - z_t) * h_{t-1} + z_t * tanh-candidate."""
    if x_t.shape != (p.input_dim,) or h_prev.shape != (p.hidden_dim,):
        raise ShapeError(
            f"expected x {(p.input_dim,)} and h {(p.hidden_dim,)}, "
            f"got {x_t.shape} and {h_prev.shape}")
    z = ad.sigmoid(ad.add(ad.add(ad.matmul(p.w_z, x_t),
                                 ad.matmul(p.u_z, h_prev)), p.b_z))
    r = ad.sigmoid(ad.add(ad.add(ad.matmul(p.w_r, x_t),
                                 ad.matmul(p.u_r, h_prev)), p.b_r))
    cand = ad.tanh_act(ad.add(ad.add(ad.matmul(p.w_h, x_t),
                                     ad.mul(r, ad.matmul(p.u_h, h_prev))),
                              p.b_h))
    return ad.add(ad.mul(ad.sub(1.0, z), h_prev), ad.mul(z, cand))


def _as_matrix(xs) -> Tensor:
    if isinstance(xs, Tensor):
        return xs
    return ad.stack_rows(list(xs))


def gru_forward(p: GruParams, xs, h0: Tensor | None = None) -> Tensor:
    """Run the cell left to right over a sequence.

    ``xs`` is a [T, input_dim] tensor or a sequence of vectors; the result
    holds one hidden state per row. The recurrence itself runs in the active
    kernel backend as a single fused tape op.
    """
    if not isinstance(xs, Tensor) and len(xs) == 0:
        return ad.constant(np.zeros((0, p.hidden_dim)))
    x = _as_matrix(xs)
    if x.shape[0] == 0:
        return ad.constant(np.zeros((0, p.hidden_dim)))
    if x.shape[1] != p.input_dim:
        raise ShapeError(f"inputs have dim {x.shape[1]}, cell expects "
                         f"{p.input_dim}")
    if h0 is None:
        h0 = ad.constant(np.zeros(p.hidden_dim))
    xz = ad.add(ad.matmul(x, ad.transpose(p.w_z)), p.b_z)
    xr = ad.add(ad.matmul(x, ad.transpose(p.w_r)), p.b_r)
    xh = ad.add(ad.matmul(x, ad.transpose(p.w_h)), p.b_h)

    k = backends.active()
    h, z, r, c, u = k.gru_recurrence_forward(
        xz.data, xr.data, xh.data, p.u_z.data, p.u_r.data, p.u_h.data,
        h0.data)
    uz_data, ur_data, uh_data, h0_data = (p.u_z.data, p.u_r.data,
                                          p.u_h.data, h0.data)

    def vjp(grad_h):
        return k.gru_recurrence_backward(grad_h, h, z, r, c, u,
                                         uz_data, ur_data, uh_data, h0_data)

    return ad.apply_kernel_op(h, (xz, xr, xh, p.u_z, p.u_r, p.u_h, h0), vjp)


def bgru_forward(p: BgruParams, xs) -> Tensor:
    """Concatenate forward-time and reverse-time GRU states per position."""
    if not isinstance(xs, Tensor) and len(xs) == 0:
        return ad.constant(
            np.zeros((0, p.forward.hidden_dim + p.backward.hidden_dim)))
    x = _as_matrix(xs)
    if x.shape[0] == 0:
        return ad.constant(
            np.zeros((0, p.forward.hidden_dim + p.backward.hidden_dim)))
    fwd = gru_forward(p.forward, x)
    bwd = ad.flip_rows(gru_forward(p.backward, ad.flip_rows(x)))
    return ad.concat([fwd, bwd], axis=1)
