"""Training-loop tests: weighted loss arithmetic, ADAM against a scalar
oracle, the alpha=1 reduction to the flat path, and end-to-end gradient
checks through the coarse aggregation."""

import math

import numpy as np
import pytest

from hiernoise import kernels
from hiernoise.data import SyntheticSpec, generate_synthetic, one_hot
from hiernoise.hierarchy import Hierarchy, map_labels, map_probs
from hiernoise.mlp import init_model, mlp_backward, mlp_forward
from hiernoise.rng import Rng
from hiernoise.trainer import (AdamState, TrainConfig, TrainingDivergedError,
                               adam_step, train, train_flat, weighted_loss)

HIER = Hierarchy(np.array([0, 0, 1, 1, 2, 2]), 3)


def random_probs(n, k, seed):
    return kernels.softmax_rows(Rng(seed).normals(n * k).reshape(n, k))


class TestWeightedLoss:
    def setup_method(self):
        self.fine = random_probs(5, 6, 1)
        self.fine_onehot = one_hot(np.array([0, 2, 4, 1, 5]), 6)
        self.coarse = map_probs(HIER, self.fine)
        self.coarse_onehot = one_hot(np.array([0, 1, 2, 0, 2]), 3)

    def test_alpha_one_is_exactly_fine(self):
        total, fine, _ = weighted_loss(self.fine, self.fine_onehot,
                                       self.coarse, self.coarse_onehot, 1.0)
        assert total == fine == kernels.cross_entropy(self.fine, self.fine_onehot)

    def test_alpha_zero_is_exactly_coarse(self):
        total, _, coarse = weighted_loss(self.fine, self.fine_onehot,
                                         self.coarse, self.coarse_onehot, 0.0)
        assert total == coarse == kernels.cross_entropy(self.coarse, self.coarse_onehot)

    def test_convex_combination(self):
        total, fine, coarse = weighted_loss(self.fine, self.fine_onehot,
                                            self.coarse, self.coarse_onehot, 0.5)
        assert total == pytest.approx(0.5 * fine + 0.5 * coarse, abs=1e-15)
        # the stated spot check: fine CE 2, coarse CE 1 at alpha .5 gives 1.5
        assert 0.5 * 2.0 + 0.5 * 1.0 == 1.5

    def test_alpha_out_of_range(self):
        with pytest.raises(ValueError):
            weighted_loss(self.fine, self.fine_onehot,
                          self.coarse, self.coarse_onehot, 1.5)


def scalar_adam_oracle(grads, lr=0.1, b1=0.9, b2=0.999, eps=1e-8):
    """Straight-line single-parameter reimplementation."""
    theta, m, v = 0.0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        theta -= lr * mhat / (math.sqrt(vhat) + eps)
    return theta


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = [np.array([1.0, -2.0, 3.0])]
        state = AdamState.for_params(p)
        adam_step(p, [np.zeros(3)], state, lr=0.1)
        assert np.array_equal(p[0], [1.0, -2.0, 3.0])

    def test_single_step_matches_scalar_oracle(self):
        p = [np.array([0.0])]
        state = AdamState.for_params(p)
        adam_step(p, [np.array([1.0])], state, lr=0.1)
        assert p[0][0] == pytest.approx(scalar_adam_oracle([1.0]), abs=1e-15)

    def test_many_steps_match_scalar_oracle(self):
        grads = list(Rng(3).normals(50))
        p = [np.array([0.0])]
        state = AdamState.for_params(p)
        for g in grads:
            adam_step(p, [np.array([g])], state, lr=0.1)
        assert p[0][0] == pytest.approx(scalar_adam_oracle(grads), rel=1e-12)

    def test_constant_gradient_step_approaches_lr(self):
        # with a constant gradient, mhat/sqrt(vhat) -> 1, so each step
        # moves by about lr regardless of the gradient's magnitude
        p = [np.array([0.0])]
        state = AdamState.for_params(p)
        lr = 0.01
        for _ in range(200):
            adam_step(p, [np.array([3.7])], state, lr=lr)
        before = p[0][0]
        adam_step(p, [np.array([3.7])], state, lr=lr)
        assert abs((before - p[0][0]) - lr) < 1e-6

    def test_nonfinite_gradient_aborts(self):
        p = [np.array([0.0])]
        state = AdamState.for_params(p)
        with pytest.raises(TrainingDivergedError):
            adam_step(p, [np.array([np.nan])], state, lr=0.1)


def hc_loss_value(model, x, fine_onehot, coarse_onehot, hierarchy, alpha):
    logits, _ = mlp_forward(model, x)
    probs = kernels.softmax_rows(logits)
    coarse = map_probs(hierarchy, probs)
    total, _, _ = weighted_loss(probs, fine_onehot, coarse, coarse_onehot, alpha)
    return total


class TestHcGradient:
    @pytest.mark.parametrize("alpha", [0.0, 0.4, 0.5, 1.0])
    def test_full_loss_gradient_vs_finite_differences(self, alpha):
        model = init_model((5, 9, 8, 6), seed=41)
        n = 10
        x = Rng(42).normals(n * 5).reshape(n, 5)
        fine_labels = (Rng(43).uniforms(n) * 6).astype(np.int64)
        fine_onehot = one_hot(fine_labels, 6)
        coarse_onehot = one_hot(map_labels(HIER, fine_labels), 3)

        logits, cache = mlp_forward(model, x)
        probs = kernels.softmax_rows(logits)
        coarse = map_probs(HIER, probs)
        dlogits = kernels.weighted_ce_dlogits(
            probs, fine_onehot, coarse, coarse_onehot, HIER.fine_to_coarse, alpha
        )
        grads = mlp_backward(model, cache, dlogits)

        h = 1e-5
        rng = Rng(44)
        for arr, grad in zip(list(model.weights) + list(model.biases),
                             grads.dweights + grads.dbiases):
            flat = arr.ravel()
            for idx in (rng.uniforms(3) * flat.size).astype(int):
                orig = flat[idx]
                flat[idx] = orig + h
                up = hc_loss_value(model, x, fine_onehot, coarse_onehot, HIER, alpha)
                flat[idx] = orig - h
                down = hc_loss_value(model, x, fine_onehot, coarse_onehot, HIER, alpha)
                flat[idx] = orig
                fd = (up - down) / (2 * h)
                a = grad.ravel()[idx]
                assert abs(a - fd) / max(abs(a), abs(fd), 1e-8) < 1e-4


@pytest.fixture(scope="module")
def small_setup():
    ds, hierarchy = generate_synthetic(
        SyntheticSpec(n_train=600, n_test=200, seed=31)
    )
    return ds, hierarchy


class TestTrainLoop:
    def test_alpha_one_equals_hierarchy_free_path(self, small_setup):
        ds, hierarchy = small_setup
        cfg_hc = TrainConfig(alpha=1.0, epochs=4, hierarchy=hierarchy, seed=3,
                             hidden_dims=(16,))
        cfg_flat = TrainConfig(alpha=1.0, epochs=4, hierarchy=None, seed=3,
                               hidden_dims=(16,))
        rec_a = train(ds, cfg_hc)
        rec_b = train_flat(ds, cfg_flat)
        assert np.abs(rec_a.train_loss - rec_b.train_loss).max() <= 1e-9
        assert np.array_equal(rec_a.test_acc, rec_b.test_acc)
        assert np.array_equal(rec_a.bitmaps, rec_b.bitmaps)

    def test_zero_epochs(self, small_setup):
        ds, hierarchy = small_setup
        rec = train(ds, TrainConfig(alpha=0.5, epochs=0, hierarchy=hierarchy, seed=1))
        assert rec.epochs == 0
        assert rec.test_acc.size == 0

    def test_deterministic(self, small_setup):
        ds, hierarchy = small_setup
        cfg = TrainConfig(alpha=0.5, epochs=3, hierarchy=hierarchy, seed=7,
                          hidden_dims=(16,))
        a = train(ds, cfg)
        b = train(ds, cfg)
        assert np.array_equal(a.train_loss, b.train_loss)
        assert np.array_equal(a.bitmaps, b.bitmaps)

    def test_loss_decreases_on_clean_data(self, small_setup):
        ds, hierarchy = small_setup
        cfg = TrainConfig(alpha=0.5, epochs=12, hierarchy=hierarchy, seed=5,
                          hidden_dims=(32,), learning_rate=1e-3)
        rec = train(ds, cfg)
        assert rec.train_loss[-1] < rec.train_loss[0]

    def test_hierarchy_k_mismatch(self, small_setup):
        ds, _ = small_setup
        wrong = Hierarchy(np.array([0, 0, 1, 1]), 2)
        with pytest.raises(ValueError, match="classes"):
            train(ds, TrainConfig(alpha=0.5, epochs=1, hierarchy=wrong, seed=1))

    def test_alpha_below_one_requires_hierarchy(self):
        with pytest.raises(ValueError, match="hierarchy"):
            TrainConfig(alpha=0.5, hierarchy=None)

    def test_lr_schedule_decays(self, small_setup):
        from hiernoise.trainer import _epoch_lr
        cfg = TrainConfig(alpha=1.0, learning_rate=1e-4, lr_decay_factor=0.5,
                          lr_decay_every=50)
        assert _epoch_lr(cfg, 0) == 1e-4
        assert _epoch_lr(cfg, 49) == 1e-4
        assert _epoch_lr(cfg, 50) == 5e-5
        assert _epoch_lr(cfg, 99) == 5e-5
        assert _epoch_lr(cfg, 100) == 2.5e-5

    def test_test_eval_ignores_noisy_test_labels(self, small_setup):
        # scrambling the test-split noisy labels must not change anything
        ds, hierarchy = small_setup
        corrupted = ds.noisy_labels.copy()
        corrupted[ds.test_indices] = (corrupted[ds.test_indices] + 1) % ds.num_classes
        ds2 = ds.with_noisy_labels(corrupted)
        cfg = TrainConfig(alpha=0.5, epochs=2, hierarchy=hierarchy, seed=2,
                          hidden_dims=(16,))
        assert np.array_equal(train(ds, cfg).test_acc, train(ds2, cfg).test_acc)

    def test_run_record_csv(self, small_setup, tmp_path):
        ds, hierarchy = small_setup
        rec = train(ds, TrainConfig(alpha=0.5, epochs=2, hierarchy=hierarchy,
                                    seed=1, hidden_dims=(16,)))
        rec.save_csv(tmp_path / "run.csv")
        lines = (tmp_path / "run.csv").read_text().splitlines()
        assert lines[0] == "epoch,train_loss,fine_loss,coarse_loss,test_acc"
        assert len(lines) == 3
        rec.save_bitmaps(tmp_path / "bm.csv")
        rows = (tmp_path / "bm.csv").read_text().splitlines()
        assert len(rows) == 2
        assert set(rows[0].split(",")) <= {"0", "1"}
