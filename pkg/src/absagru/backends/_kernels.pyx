# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core. Same contract as backends.reference, loop for loop;
the reference module stays the behavioral oracle."""

import numpy as np

from libc.math cimport exp, log, tanh

NAME = "compiled"


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# GRU sequence recurrence


def gru_recurrence_forward(xz_, xr_, xh_, uz_, ur_, uh_, h0_):
    cdef double[:, ::1] xz = np.ascontiguousarray(xz_)
    cdef double[:, ::1] xr = np.ascontiguousarray(xr_)
    cdef double[:, ::1] xh = np.ascontiguousarray(xh_)
    cdef double[:, ::1] uz = np.ascontiguousarray(uz_)
    cdef double[:, ::1] ur = np.ascontiguousarray(ur_)
    cdef double[:, ::1] uh = np.ascontiguousarray(uh_)
    cdef Py_ssize_t T = xz.shape[0], H = xz.shape[1]
    h_arr = np.empty((T, H))
    z_arr = np.empty((T, H))
    r_arr = np.empty((T, H))
    c_arr = np.empty((T, H))
    u_arr = np.empty((T, H))
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] u = u_arr
    cdef double[::1] hp = np.array(h0_, dtype=np.float64)
    cdef Py_ssize_t t, i, j
    cdef double az, ar, au
    with nogil:
        for t in range(T):
            for i in range(H):
                az = xz[t, i]
                ar = xr[t, i]
                au = 0.0
                for j in range(H):
                    az += uz[i, j] * hp[j]
                    ar += ur[i, j] * hp[j]
                    au += uh[i, j] * hp[j]
                z[t, i] = _sig(az)
                r[t, i] = _sig(ar)
                u[t, i] = au
                c[t, i] = tanh(xh[t, i] + r[t, i] * au)
                h[t, i] = (1.0 - z[t, i]) * hp[i] + z[t, i] * c[t, i]
            for i in range(H):
                hp[i] = h[t, i]
    return h_arr, z_arr, r_arr, c_arr, u_arr


def gru_recurrence_backward(grad_h_, h_, z_, r_, c_, u_, uz_, ur_, uh_, h0_):
    cdef double[:, ::1] gh = np.ascontiguousarray(grad_h_)
    cdef double[:, ::1] h = np.ascontiguousarray(h_)
    cdef double[:, ::1] z = np.ascontiguousarray(z_)
    cdef double[:, ::1] r = np.ascontiguousarray(r_)
    cdef double[:, ::1] c = np.ascontiguousarray(c_)
    cdef double[:, ::1] u = np.ascontiguousarray(u_)
    cdef double[:, ::1] uz = np.ascontiguousarray(uz_)
    cdef double[:, ::1] ur = np.ascontiguousarray(ur_)
    cdef double[:, ::1] uh = np.ascontiguousarray(uh_)
    cdef double[::1] h0 = np.ascontiguousarray(h0_)
    cdef Py_ssize_t T = gh.shape[0], H = gh.shape[1]
    dxz_arr = np.empty((T, H))
    dxr_arr = np.empty((T, H))
    dxh_arr = np.empty((T, H))
    du_arr = np.empty((T, H))
    duz_arr = np.zeros((H, H))
    dur_arr = np.zeros((H, H))
    duh_arr = np.zeros((H, H))
    dh0_arr = np.zeros(H)
    cdef double[:, ::1] dxz = dxz_arr
    cdef double[:, ::1] dxr = dxr_arr
    cdef double[:, ::1] dxh = dxh_arr
    cdef double[:, ::1] duv = du_arr
    cdef double[:, ::1] duz = duz_arr
    cdef double[:, ::1] dur = dur_arr
    cdef double[:, ::1] duh = duh_arr
    cdef double[::1] dh_next = dh0_arr
    cdef double[::1] cur = np.empty(H)
    cdef double[::1] hp
    cdef Py_ssize_t t, i, j
    cdef double dh, dz, dc, dac
    cdef double gz, gr, gu
    with nogil:
        for t in range(T - 1, -1, -1):
            hp = h[t - 1] if t > 0 else h0
            for i in range(H):
                dh = gh[t, i] + dh_next[i]
                cur[i] = dh
                dz = dh * (c[t, i] - hp[i])
                dxz[t, i] = dz * z[t, i] * (1.0 - z[t, i])
                dc = dh * z[t, i]
                dac = dc * (1.0 - c[t, i] * c[t, i])
                dxh[t, i] = dac
                dxr[t, i] = dac * u[t, i] * r[t, i] * (1.0 - r[t, i])
                duv[t, i] = dac * r[t, i]
            for j in range(H):
                dh_next[j] = cur[j] * (1.0 - z[t, j])
            for i in range(H):
                gz = dxz[t, i]
                gr = dxr[t, i]
                gu = duv[t, i]
                for j in range(H):
                    dh_next[j] += uz[i, j] * gz + ur[i, j] * gr \
                        + uh[i, j] * gu
                    duz[i, j] += gz * hp[j]
                    dur[i, j] += gr * hp[j]
                    duh[i, j] += gu * hp[j]
    return dxz_arr, dxr_arr, dxh_arr, duz_arr, dur_arr, duh_arr, dh0_arr


# ---------------------------------------------------------------------------
# linear-chain CRF (START = L, STOP = L + 1)


def crf_partition_forward(em_, trans_):
    cdef double[:, ::1] em = np.ascontiguousarray(em_)
    cdef double[:, ::1] tr = np.ascontiguousarray(trans_)
    cdef Py_ssize_t T = em.shape[0], L = em.shape[1]
    cdef Py_ssize_t start = L, stop = L + 1
    alpha_arr = np.empty((T, L))
    cdef double[:, ::1] alpha = alpha_arr
    cdef Py_ssize_t t, i, j
    cdef double m, s, v, logz
    with nogil:
        for j in range(L):
            alpha[0, j] = em[0, j] + tr[start, j]
        for t in range(1, T):
            for j in range(L):
                m = alpha[t - 1, 0] + tr[0, j]
                for i in range(1, L):
                    v = alpha[t - 1, i] + tr[i, j]
                    if v > m:
                        m = v
                s = 0.0
                for i in range(L):
                    s += exp(alpha[t - 1, i] + tr[i, j] - m)
                alpha[t, j] = em[t, j] + m + log(s)
        m = alpha[T - 1, 0] + tr[0, stop]
        for j in range(1, L):
            v = alpha[T - 1, j] + tr[j, stop]
            if v > m:
                m = v
        s = 0.0
        for j in range(L):
            s += exp(alpha[T - 1, j] + tr[j, stop] - m)
        logz = m + log(s)
    return float(logz), alpha_arr


def crf_partition_backward(em_, trans_, alpha_, double logz, double gscale):
    cdef double[:, ::1] em = np.ascontiguousarray(em_)
    cdef double[:, ::1] tr = np.ascontiguousarray(trans_)
    cdef double[:, ::1] alpha = np.ascontiguousarray(alpha_)
    cdef Py_ssize_t T = em.shape[0], L = em.shape[1]
    cdef Py_ssize_t start = L, stop = L + 1
    beta_arr = np.empty((T, L))
    d_em_arr = np.empty((T, L))
    d_tr_arr = np.zeros((L + 2, L + 2))
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] d_em = d_em_arr
    cdef double[:, ::1] d_tr = d_tr_arr
    cdef Py_ssize_t t, i, j
    cdef double m, s, v
    with nogil:
        for j in range(L):
            beta[T - 1, j] = tr[j, stop]
        for t in range(T - 2, -1, -1):
            for i in range(L):
                m = tr[i, 0] + em[t + 1, 0] + beta[t + 1, 0]
                for j in range(1, L):
                    v = tr[i, j] + em[t + 1, j] + beta[t + 1, j]
                    if v > m:
                        m = v
                s = 0.0
                for j in range(L):
                    s += exp(tr[i, j] + em[t + 1, j] + beta[t + 1, j] - m)
                beta[t, i] = m + log(s)
        for t in range(T):
            for j in range(L):
                d_em[t, j] = gscale * exp(alpha[t, j] + beta[t, j] - logz)
        for t in range(T - 1):
            for i in range(L):
                for j in range(L):
                    d_tr[i, j] += exp(alpha[t, i] + tr[i, j] + em[t + 1, j]
                                      + beta[t + 1, j] - logz)
        for j in range(L):
            d_tr[start, j] = exp(alpha[0, j] + beta[0, j] - logz)
            d_tr[j, stop] = exp(alpha[T - 1, j] + beta[T - 1, j] - logz)
        for i in range(L + 2):
            for j in range(L + 2):
                d_tr[i, j] *= gscale
    return d_em_arr, d_tr_arr


def crf_viterbi(em_, trans_):
    cdef double[:, ::1] em = np.ascontiguousarray(em_)
    cdef double[:, ::1] tr = np.ascontiguousarray(trans_)
    cdef Py_ssize_t T = em.shape[0], L = em.shape[1]
    cdef Py_ssize_t start = L, stop = L + 1
    omega_arr = np.empty((T, L))
    tags_arr = np.empty(T, dtype=np.int64)
    cdef double[:, ::1] omega = omega_arr
    cdef long long[::1] tags = tags_arr
    cdef Py_ssize_t t, i, j, best_j
    cdef double m, v, score
    with nogil:
        for j in range(L):
            omega[T - 1, j] = em[T - 1, j] + tr[j, stop]
        for t in range(T - 2, -1, -1):
            for j in range(L):
                m = tr[j, 0] + omega[t + 1, 0]
                for i in range(1, L):
                    v = tr[j, i] + omega[t + 1, i]
                    if v > m:
                        m = v
                omega[t, j] = em[t, j] + m
        best_j = 0
        score = tr[start, 0] + omega[0, 0]
        for j in range(1, L):
            v = tr[start, j] + omega[0, j]
            if v > score:
                score = v
                best_j = j
        tags[0] = best_j
        for t in range(1, T):
            best_j = 0
            m = tr[tags[t - 1], 0] + omega[t, 0]
            for j in range(1, L):
                v = tr[tags[t - 1], j] + omega[t, j]
                if v > m:
                    m = v
                    best_j = j
            tags[t] = best_j
    return tags_arr, float(score)


# ---------------------------------------------------------------------------
# character convolution + max pooling


def conv_maxpool_forward(emb_, filters_, bias_):
    cdef double[:, ::1] emb = np.ascontiguousarray(emb_)
    cdef double[:, :, ::1] filt = np.ascontiguousarray(filters_)
    cdef double[::1] bias = np.ascontiguousarray(bias_)
    cdef Py_ssize_t P = emb.shape[0], D = emb.shape[1]
    cdef Py_ssize_t F = filt.shape[0], W = filt.shape[1]
    cdef Py_ssize_t n_pos = P - W + 1
    out_arr = np.empty(F)
    arg_arr = np.empty(F, dtype=np.int64)
    cdef double[::1] out = out_arr
    cdef long long[::1] arg = arg_arr
    cdef Py_ssize_t f, p, k, d, best_p
    cdef double s, best
    with nogil:
        for f in range(F):
            best = 0.0
            best_p = 0
            for p in range(n_pos):
                s = bias[f]
                for k in range(W):
                    for d in range(D):
                        s += emb[p + k, d] * filt[f, k, d]
                if p == 0 or s > best:
                    best = s
                    best_p = p
            out[f] = best
            arg[f] = best_p
    return out_arr, arg_arr


def conv_maxpool_backward(emb_, filters_, argmax_, grad_out_):
    cdef double[:, ::1] emb = np.ascontiguousarray(emb_)
    cdef double[:, :, ::1] filt = np.ascontiguousarray(filters_)
    cdef long long[::1] arg = np.ascontiguousarray(argmax_, dtype=np.int64)
    cdef double[::1] g = np.ascontiguousarray(grad_out_)
    cdef Py_ssize_t P = emb.shape[0], D = emb.shape[1]
    cdef Py_ssize_t F = filt.shape[0], W = filt.shape[1]
    d_emb_arr = np.zeros((P, D))
    d_filt_arr = np.zeros((F, W, D))
    d_bias_arr = np.array(grad_out_, dtype=np.float64, copy=True)
    cdef double[:, ::1] d_emb = d_emb_arr
    cdef double[:, :, ::1] d_filt = d_filt_arr
    cdef Py_ssize_t f, p, k, d
    with nogil:
        for f in range(F):
            p = <Py_ssize_t> arg[f]
            for k in range(W):
                for d in range(D):
                    d_emb[p + k, d] += g[f] * filt[f, k, d]
                    d_filt[f, k, d] = g[f] * emb[p + k, d]
    return d_emb_arr, d_filt_arr, d_bias_arr
