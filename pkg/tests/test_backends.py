"""Compiled and numpy kernel backends must agree on every operation."""

import numpy as np
import pytest

from hiernoise import kernels
from hiernoise.rng import Rng

try:
    cython_impl, _ = kernels.get_backend("cython")
except ImportError:
    cython_impl = None

numpy_impl, _ = kernels.get_backend("numpy")

needs_ext = pytest.mark.skipif(cython_impl is None,
                               reason="compiled extension not built")


def rand(shape, seed):
    r = Rng(seed)
    return r.normals(int(np.prod(shape))).reshape(shape)


@needs_ext
class TestBackendParity:
    TOL = dict(rtol=1e-12, atol=1e-13)

    def test_matmul_variants(self):
        a, b = rand((7, 5), 1), rand((5, 9), 2)
        np.testing.assert_allclose(cython_impl.matmul(a, b),
                                   numpy_impl.matmul(a, b), **self.TOL)
        tn_a, tn_b = rand((6, 4), 3), rand((6, 5), 15)   # -> (4, 5)
        np.testing.assert_allclose(cython_impl.matmul_tn(tn_a, tn_b),
                                   numpy_impl.matmul_tn(tn_a, tn_b), **self.TOL)
        nt_a, nt_b = rand((4, 6), 16), rand((5, 6), 17)  # -> (4, 5)
        np.testing.assert_allclose(cython_impl.matmul_nt(nt_a, nt_b),
                                   numpy_impl.matmul_nt(nt_a, nt_b), **self.TOL)

    def test_linear_and_colsum(self):
        x, w = rand((6, 4), 4), rand((4, 3), 5)
        bias = rand((3,), 6).ravel()
        np.testing.assert_allclose(cython_impl.linear(x, w, bias),
                                   numpy_impl.linear(x, w, bias), **self.TOL)
        np.testing.assert_allclose(cython_impl.colsum(x),
                                   numpy_impl.colsum(x), **self.TOL)

    def test_relu_pair(self):
        x = rand((6, 8), 7)
        dy = rand((6, 8), 8)
        assert np.array_equal(cython_impl.relu(x), numpy_impl.relu(x))
        assert np.array_equal(cython_impl.relu_backward(dy, x),
                              numpy_impl.relu_backward(dy, x))

    def test_softmax_and_ce(self):
        logits = rand((9, 5), 9) * 10
        pc = cython_impl.softmax_rows(logits)
        pn = numpy_impl.softmax_rows(logits)
        np.testing.assert_allclose(pc, pn, **self.TOL)
        onehot = np.zeros((9, 5))
        onehot[np.arange(9), np.arange(9) % 5] = 1.0
        assert cython_impl.cross_entropy(pc, onehot) == pytest.approx(
            numpy_impl.cross_entropy(pn, onehot), rel=1e-12)

    def test_group_sum(self):
        probs = numpy_impl.softmax_rows(rand((6, 8), 10))
        groups = np.array([0, 0, 1, 1, 2, 2, 3, 3], dtype=np.int64)
        np.testing.assert_allclose(cython_impl.group_sum_cols(probs, groups, 4),
                                   numpy_impl.group_sum_cols(probs, groups, 4),
                                   **self.TOL)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
    def test_weighted_ce_dlogits(self, alpha):
        probs = numpy_impl.softmax_rows(rand((6, 8), 11))
        groups = np.array([0, 0, 1, 1, 2, 2, 3, 3], dtype=np.int64)
        fine_onehot = np.zeros((6, 8))
        fine_onehot[np.arange(6), np.arange(6)] = 1.0
        coarse = numpy_impl.group_sum_cols(probs, groups, 4)
        coarse_onehot = np.zeros((6, 4))
        coarse_onehot[np.arange(6), groups[np.arange(6)]] = 1.0
        got_c = cython_impl.weighted_ce_dlogits(probs, fine_onehot, coarse,
                                                coarse_onehot, groups, alpha)
        got_n = numpy_impl.weighted_ce_dlogits(probs, fine_onehot, coarse,
                                               coarse_onehot, groups, alpha)
        np.testing.assert_allclose(got_c, got_n, **self.TOL)

    def test_adam_update(self):
        p_c, p_n = rand((20,), 12).copy(), rand((20,), 12).copy()
        g = rand((20,), 13)
        m_c, v_c = np.zeros(20), np.zeros(20)
        m_n, v_n = np.zeros(20), np.zeros(20)
        for t in range(1, 6):
            cython_impl.adam_update(p_c, g, m_c, v_c, t, 1e-3, 0.9, 0.999, 1e-8)
            numpy_impl.adam_update(p_n, g, m_n, v_n, t, 1e-3, 0.9, 0.999, 1e-8)
        np.testing.assert_allclose(p_c, p_n, **self.TOL)

    def test_training_run_agrees_across_backends(self):
        # a short end-to-end run must give near-identical trajectories
        from hiernoise.data import SyntheticSpec, generate_synthetic
        from hiernoise.trainer import TrainConfig, train
        import hiernoise.kernels as k

        ds, hierarchy = generate_synthetic(SyntheticSpec(n_train=400, n_test=100,
                                                         seed=14))
        cfg = TrainConfig(alpha=0.5, epochs=3, hierarchy=hierarchy, seed=1,
                          hidden_dims=(16,))
        original = k._impl
        try:
            k._impl = cython_impl
            rec_c = train(ds, cfg)
            k._impl = numpy_impl
            rec_n = train(ds, cfg)
        finally:
            k._impl = original
        np.testing.assert_allclose(rec_c.train_loss, rec_n.train_loss,
                                   rtol=1e-9, atol=1e-12)
