"""GRU cell analytic cases, a straight-line scalar oracle, sequence/fused
parity, and the bidirectional wrapper."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from absagru import autodiff as ad
from absagru.errors import ShapeError
from absagru.gradcheck import check_bgru, check_gru
from absagru.recurrent import (BgruParams, GruParams, bgru_forward,
                               gru_cell_step, gru_forward)


def zero_params(input_dim=1, hidden_dim=1):
    def mat(r, c):
        return ad.parameter(np.zeros((r, c)))

    return GruParams(
        mat(hidden_dim, input_dim), mat(hidden_dim, hidden_dim),
        ad.parameter(np.zeros(hidden_dim)),
        mat(hidden_dim, input_dim), mat(hidden_dim, hidden_dim),
        ad.parameter(np.zeros(hidden_dim)),
        mat(hidden_dim, input_dim), mat(hidden_dim, hidden_dim),
        ad.parameter(np.zeros(hidden_dim)),
        input_dim, hidden_dim)


def scalar_gru_oracle(p: GruParams, x, h_prev):
    """Straight-line elementwise evaluation of the gate equations."""
    H, I = p.hidden_dim, p.input_dim
    h_new = np.zeros(H)
    for i in range(H):
        az = ar = ah = 0.0
        for j in range(I):
            az += p.w_z.data[i, j] * x[j]
            ar += p.w_r.data[i, j] * x[j]
            ah += p.w_h.data[i, j] * x[j]
        uz = ur = uh = 0.0
        for j in range(H):
            uz += p.u_z.data[i, j] * h_prev[j]
            ur += p.u_r.data[i, j] * h_prev[j]
            uh += p.u_h.data[i, j] * h_prev[j]
        z = 1.0 / (1.0 + math.exp(-(az + uz + p.b_z.data[i])))
        r = 1.0 / (1.0 + math.exp(-(ar + ur + p.b_r.data[i])))
        cand = math.tanh(ah + r * uh + p.b_h.data[i])
        h_new[i] = (1.0 - z) * h_prev[i] + z * cand
    return h_new


class TestGruCell:
    def test_zero_weights_halve_hidden_state(self):
        p = zero_params()
        h = gru_cell_step(p, ad.constant([0.0]), ad.constant([0.8]))
        assert_array_equal(h.data, [0.4])

    def test_hand_computed_scalar_case(self):
        # W_z=U_z=0 -> z=0.5; W_r=U_r=-50 -> r~0; W=U=1 -> cand=tanh(1)
        p = zero_params()
        p.w_r.data[:] = -50.0
        p.u_r.data[:] = -50.0
        p.w_h.data[:] = 1.0
        p.u_h.data[:] = 1.0
        h = gru_cell_step(p, ad.constant([1.0]), ad.constant([1.0]))
        assert h.data[0] == pytest.approx(0.88080, abs=1e-4)
        # full expression: 0.5 * 1 + 0.5 * tanh(1)
        assert h.data[0] == pytest.approx(0.5 + 0.5 * math.tanh(1.0),
                                          abs=1e-6)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(8)
        p = GruParams.init(3, 4, rng)
        x = rng.uniform(-2, 2, 3)
        h_prev = rng.uniform(-0.9, 0.9, 4)
        out = gru_cell_step(p, ad.constant(x), ad.constant(h_prev))
        assert_allclose(out.data, scalar_gru_oracle(p, x, h_prev),
                        atol=1e-10, rtol=0)

    def test_gate_ranges(self):
        rng = np.random.default_rng(9)
        p = GruParams.init(2, 3, rng, scale=2.0)
        h = ad.constant(rng.uniform(-0.99, 0.99, 3))
        out = gru_cell_step(p, ad.constant(rng.uniform(-2, 2, 2)), h)
        assert np.all(np.abs(out.data) < 1.0)

    def test_shape_error(self):
        p = GruParams.init(3, 4, np.random.default_rng(0))
        with pytest.raises(ShapeError):
            gru_cell_step(p, ad.constant([1.0]), ad.constant(np.zeros(4)))

    def test_gradcheck(self):
        err, _ = check_gru(seed=1)
        assert err < 1e-4


class TestGruForward:
    def test_single_step_equals_cell(self):
        rng = np.random.default_rng(10)
        p = GruParams.init(2, 3, rng)
        x = rng.uniform(-1, 1, 2)
        seq = gru_forward(p, ad.constant(x[None, :]))
        cell = gru_cell_step(p, ad.constant(x), ad.constant(np.zeros(3)))
        assert_allclose(seq.data[0], cell.data, atol=1e-12)

    def test_zero_weights_halving_chain(self):
        p = zero_params()
        out = gru_forward(p, ad.constant(np.zeros((3, 1))),
                          h0=ad.constant([1.0]))
        assert_allclose(out.data, [[0.5], [0.25], [0.125]], atol=0)

    def test_prefix_property(self):
        rng = np.random.default_rng(11)
        p = GruParams.init(3, 4, rng)
        xs = rng.uniform(-1, 1, (6, 3))
        full = gru_forward(p, ad.constant(xs)).data
        for k in (1, 3, 5):
            prefix = gru_forward(p, ad.constant(xs[:k])).data
            # BLAS may round the input projections differently per shape
            assert_allclose(prefix, full[:k], atol=1e-14, rtol=0)

    def test_fused_matches_unrolled_cells(self):
        rng = np.random.default_rng(12)
        p = GruParams.init(3, 5, rng)
        xs = rng.uniform(-2, 2, (7, 3))
        fused = gru_forward(p, ad.constant(xs)).data
        h = ad.constant(np.zeros(5))
        for t in range(7):
            h = gru_cell_step(p, ad.constant(xs[t]), h)
            assert_allclose(fused[t], h.data, atol=1e-12)

    def test_empty_sequence(self):
        p = GruParams.init(3, 4, np.random.default_rng(0))
        assert gru_forward(p, []).shape == (0, 4)

    def test_accepts_list_of_vectors(self):
        rng = np.random.default_rng(13)
        p = GruParams.init(2, 2, rng)
        vecs = [ad.constant(rng.uniform(-1, 1, 2)) for _ in range(3)]
        stacked = ad.constant(np.stack([v.data for v in vecs]))
        assert_array_equal(gru_forward(p, vecs).data,
                           gru_forward(p, stacked).data)


class TestBgru:
    def test_output_width_is_twice_hidden(self):
        rng = np.random.default_rng(14)
        p = BgruParams.init(3, 5, rng)
        out = bgru_forward(p, ad.constant(rng.uniform(-1, 1, (4, 3))))
        assert out.shape == (4, 10)

    def test_halves_reproduce_unidirectional_runs(self):
        rng = np.random.default_rng(15)
        p = BgruParams.init(3, 4, rng)
        xs = rng.uniform(-1, 1, (5, 3))
        out = bgru_forward(p, ad.constant(xs)).data
        fwd = gru_forward(p.forward, ad.constant(xs)).data
        bwd = gru_forward(p.backward, ad.constant(xs[::-1].copy())).data
        assert_array_equal(out[:, :4], fwd)
        assert_array_equal(out[:, 4:], bwd[::-1])

    def test_palindrome_symmetry_with_tied_directions(self):
        rng = np.random.default_rng(16)
        p = BgruParams.init(2, 3, rng)
        p_tied = BgruParams(p.forward, p.forward)
        xs = rng.uniform(-1, 1, (2, 2))
        palindrome = np.vstack([xs, xs[::-1]])
        out = bgru_forward(p_tied, ad.constant(palindrome)).data
        T = len(palindrome)
        for t in range(T):
            assert_allclose(out[t, :3], out[T - 1 - t, 3:], atol=1e-12)

    def test_length_one(self):
        rng = np.random.default_rng(17)
        p = BgruParams.init(2, 3, rng)
        x = rng.uniform(-1, 1, (1, 2))
        out = bgru_forward(p, ad.constant(x)).data
        f = gru_cell_step(p.forward, ad.constant(x[0]),
                          ad.constant(np.zeros(3))).data
        b = gru_cell_step(p.backward, ad.constant(x[0]),
                          ad.constant(np.zeros(3))).data
        assert_allclose(out[0], np.concatenate([f, b]), atol=1e-12)

    def test_five_step_gradcheck(self):
        err, _ = check_bgru(seed=2)
        assert err < 1e-4
