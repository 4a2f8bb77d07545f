"""Pure-numpy kernels: the fallback backend and the reference the compiled
core is checked against.

All functions take and return float64 C-contiguous arrays. Forward kernels
return whatever intermediate state their matching backward kernel needs.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

# Synthetic boundary states sit after the real labels in the transition
# matrix: START = L, STOP = L + 1 for L labels.


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


# ---------------------------------------------------------------------------
# GRU sequence recurrence
#
# Inputs are the input-to-hidden projections for the whole sequence
# (xz/xr/xh = X @ W*.T + b*, computed outside so BLAS handles them) plus the
# three recurrent matrices. Per step:
#   z_t = sigmoid(xz_t + Uz h_{t-1})
#   r_t = sigmoid(xr_t + Ur h_{t-1})
#   u_t = Uh h_{t-1}
#   c_t = tanh(xh_t + r_t * u_t)
#   h_t = (1 - z_t) * h_{t-1} + z_t * c_t


def gru_recurrence_forward(xz, xr, xh, uz, ur, uh, h0):
    T, H = xz.shape
    h = np.empty((T, H))
    z = np.empty((T, H))
    r = np.empty((T, H))
    c = np.empty((T, H))
    u = np.empty((T, H))
    h_prev = h0
    for t in range(T):
        z[t] = _sigmoid(xz[t] + uz @ h_prev)
        r[t] = _sigmoid(xr[t] + ur @ h_prev)
        u[t] = uh @ h_prev
        c[t] = np.tanh(xh[t] + r[t] * u[t])
        h[t] = (1.0 - z[t]) * h_prev + z[t] * c[t]
        h_prev = h[t]
    return h, z, r, c, u


def gru_recurrence_backward(grad_h, h, z, r, c, u, uz, ur, uh, h0):
    """Backpropagation through time for the recurrence above.

    grad_h carries dLoss/dh_t for every step; returns gradients for
    (xz, xr, xh, uz, ur, uh, h0).
    """
    T, H = grad_h.shape
    dxz = np.empty((T, H))
    dxr = np.empty((T, H))
    dxh = np.empty((T, H))
    du_all = np.empty((T, H))
    dh_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        h_prev = h[t - 1] if t > 0 else h0
        dh = grad_h[t] + dh_next
        dz = dh * (c[t] - h_prev)
        daz = dz * z[t] * (1.0 - z[t])
        dc = dh * z[t]
        dac = dc * (1.0 - c[t] * c[t])
        dar = dac * u[t] * r[t] * (1.0 - r[t])
        du = dac * r[t]
        dxz[t] = daz
        dxr[t] = dar
        dxh[t] = dac
        du_all[t] = du
        dh_next = dh * (1.0 - z[t]) + uz.T @ daz + ur.T @ dar + uh.T @ du
    if T:
        h_prev_all = np.vstack([h0[None, :], h[:-1]])
        duz = dxz.T @ h_prev_all
        dur = dxr.T @ h_prev_all
        duh = du_all.T @ h_prev_all
    else:
        duz = np.zeros_like(uz)
        dur = np.zeros_like(ur)
        duh = np.zeros_like(uh)
    return dxz, dxr, dxh, duz, dur, duh, dh_next


# ---------------------------------------------------------------------------
# linear-chain CRF


def _lse(v: np.ndarray) -> float:
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def crf_partition_forward(em, trans):
    """Forward algorithm. Returns (log-partition, alpha[T, L]) where
    alpha[t, j] is the log-sum of scores of all prefixes ending in tag j."""
    T, L = em.shape
    start, stop = L, L + 1
    alpha = np.empty((T, L))
    alpha[0] = em[0] + trans[start, :L]
    for t in range(1, T):
        m = alpha[t - 1][:, None] + trans[:L, :L]
        mx = m.max(axis=0)
        alpha[t] = em[t] + mx + np.log(np.exp(m - mx).sum(axis=0))
    return _lse(alpha[T - 1] + trans[:L, stop]), alpha


def crf_partition_backward(em, trans, alpha, logz, gscale):
    """d logZ / d emissions are the tag marginals; d logZ / d transitions are
    expected edge counts. Both computed from the forward/backward lattices."""
    T, L = em.shape
    start, stop = L, L + 1
    beta = np.empty((T, L))
    beta[T - 1] = trans[:L, stop]
    for t in range(T - 2, -1, -1):
        m = trans[:L, :L] + (em[t + 1] + beta[t + 1])[None, :]
        mx = m.max(axis=1)
        beta[t] = mx + np.log(np.exp(m - mx[:, None]).sum(axis=1))
    marginal = np.exp(alpha + beta - logz)
    d_em = gscale * marginal
    d_trans = np.zeros_like(trans)
    for t in range(T - 1):
        pair = np.exp(alpha[t][:, None] + trans[:L, :L]
                      + (em[t + 1] + beta[t + 1])[None, :] - logz)
        d_trans[:L, :L] += pair
    d_trans[start, :L] = marginal[0]
    d_trans[:L, stop] = marginal[T - 1]
    d_trans *= gscale
    return d_em, d_trans


def crf_viterbi(em, trans):
    """Highest-scoring tag sequence and its score.

    Runs the DP backwards (suffix-optimal scores) and picks tags greedily
    left to right, so ties resolve to the lexicographically smallest optimal
    sequence (lowest tag index at the earliest differing position).
    """
    T, L = em.shape
    start, stop = L, L + 1
    omega = np.empty((T, L))  # omega[t, j]: best completion score from (t, j)
    omega[T - 1] = em[T - 1] + trans[:L, stop]
    for t in range(T - 2, -1, -1):
        omega[t] = em[t] + (trans[:L, :L] + omega[t + 1][None, :]).max(axis=1)
    tags = np.empty(T, dtype=np.int64)
    head = trans[start, :L] + omega[0]
    tags[0] = int(np.argmax(head))
    score = float(head[tags[0]])
    for t in range(1, T):
        tags[t] = int(np.argmax(trans[tags[t - 1], :L] + omega[t]))
    return tags, score


# ---------------------------------------------------------------------------
# character convolution + max-over-positions pooling


def conv_maxpool_forward(emb, filters, bias):
    """Valid cross-correlation of [P, D] embeddings with [F, W, D] filters
    plus bias, then a per-filter max over window positions. Caller pads so
    that P >= W. Returns (out[F], argmax[F])."""
    P, D = emb.shape
    F, W, _ = filters.shape
    n_pos = P - W + 1
    windows = np.empty((n_pos, W, D))
    for p in range(n_pos):
        windows[p] = emb[p:p + W]
    scores = np.tensordot(windows, filters, axes=([1, 2], [1, 2])) + bias
    argmax = scores.argmax(axis=0)  # first maximal position on ties
    out = scores[argmax, np.arange(F)]
    return np.ascontiguousarray(out), argmax.astype(np.int64)


def conv_maxpool_backward(emb, filters, argmax, grad_out):
    F, W, _ = filters.shape
    d_emb = np.zeros_like(emb)
    d_filters = np.zeros_like(filters)
    for f in range(F):
        p = int(argmax[f])
        g = grad_out[f]
        d_emb[p:p + W] += g * filters[f]
        d_filters[f] = g * emb[p:p + W]
    return d_emb, d_filters, grad_out.copy()
