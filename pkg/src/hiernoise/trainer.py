"""Mini-batch training of FLAT and hierarchical (HC) classifiers.

One loop implements both: the loss is
``(1 - alpha) * ce(coarse) + alpha * ce(fine)`` where the coarse
prediction sums fine softmax mass per group.  ``alpha = 1`` short-circuits
to the plain fine cross-entropy path, so a FLAT model is the exact special
case of the HC model.

Coarse targets are derived from the observed (noisy) fine labels, since
the clean ones are unobservable by assumption; test accuracy is always
measured against clean labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import kernels
from .data import LabeledDataset, one_hot
from .hierarchy import Hierarchy, map_labels, map_probs
from .mlp import MlpClassifier, init_model, mlp_backward, mlp_forward
from .rng import Rng, derive_seed


class TrainingDivergedError(RuntimeError):
    """Loss or gradients went non-finite during training."""


@dataclass
class TrainConfig:
    alpha: float = 0.5
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-4
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    # wide enough to enter the noise-memorization regime on the reference
    # synthetic data within 100 epochs; MNIST runs override with (256,)
    hidden_dims: tuple[int, ...] = (512, 256)
    hierarchy: Hierarchy | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0 or self.lr_decay_every < 1:
            raise ValueError("learning_rate must be > 0 and lr_decay_every >= 1")
        if self.alpha < 1.0:
            if self.hierarchy is None:
                raise ValueError("alpha < 1 requires a hierarchy")
            if self.hierarchy.num_coarse < 2:
                raise ValueError("an HC run needs at least 2 coarse groups")

    def snapshot(self) -> dict:
        out = asdict(self)
        h = self.hierarchy
        out["hierarchy"] = None if h is None else {
            "num_coarse": h.num_coarse,
            "fine_to_coarse": h.fine_to_coarse.tolist(),
        }
        out["hidden_dims"] = list(self.hidden_dims)
        return out


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params],
                   t=0, beta1=beta1, beta2=beta2, eps=eps)


@dataclass
class RunRecord:
    """Per-epoch trajectories of one (config, seed) training run."""

    config: dict
    seed: int
    train_loss: np.ndarray
    fine_loss: np.ndarray
    coarse_loss: np.ndarray
    test_acc: np.ndarray
    bitmaps: np.ndarray  # epochs x n_test, uint8, 1 where prediction correct

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,fine_loss,coarse_loss,test_acc\n")
            for e in range(self.epochs):
                fh.write(
                    f"{e + 1},{float(self.train_loss[e])!r},"
                    f"{float(self.fine_loss[e])!r},"
                    f"{float(self.coarse_loss[e])!r},{float(self.test_acc[e])!r}\n"
                )

    def save_bitmaps(self, path) -> None:
        with open(path, "w") as fh:
            for e in range(self.epochs):
                fh.write(",".join(str(int(b)) for b in self.bitmaps[e]) + "\n")

    def save_config(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"seed": self.seed, **self.config}, fh, indent=2)
            fh.write("\n")


def weighted_loss(fine_probs, fine_onehot, coarse_probs, coarse_onehot,
                  alpha: float) -> tuple[float, float, float]:
    """Total, fine, and coarse cross-entropy parts of the weighted loss."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    fine = kernels.cross_entropy(fine_probs, fine_onehot)
    coarse = kernels.cross_entropy(coarse_probs, coarse_onehot)
    return (1.0 - alpha) * coarse + alpha * fine, fine, coarse


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, lr: float) -> None:
    """Standard bias-corrected ADAM update, in place on params and state."""
    state.t += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape}")
        if not np.isfinite(g).all():
            raise TrainingDivergedError(
                f"non-finite gradient in a parameter of shape {g.shape} at step {state.t}"
            )
        kernels.adam_update(p.ravel(), g.ravel(), m.ravel(), v.ravel(),
                            state.t, lr, state.beta1, state.beta2, state.eps)


def _model_params(model: MlpClassifier) -> list[np.ndarray]:
    return list(model.weights) + list(model.biases)


def _epoch_lr(config: TrainConfig, epoch_index: int) -> float:
    # epoch_index is 0-based: decay kicks in at epochs 50, 100, ...
    return config.learning_rate * config.lr_decay_factor ** (
        epoch_index // config.lr_decay_every
    )


def _evaluate(model, test_x, test_labels) -> tuple[float, np.ndarray]:
    logits, _ = mlp_forward(model, test_x)
    pred = np.argmax(logits, axis=1)
    bitmap = (pred == test_labels).astype(np.uint8)
    return float(bitmap.mean()), bitmap


def train(dataset: LabeledDataset, config: TrainConfig,
          model: MlpClassifier | None = None) -> RunRecord:
    """Run the full training loop and record per-epoch telemetry.

    The model trains on ``dataset.noisy_labels`` of the train split and is
    evaluated each epoch on the clean labels of the test split.  Everything
    is deterministic in (dataset, config): the model init, the per-epoch
    shuffles, and the update order.
    """
    k = dataset.num_classes
    hierarchy = config.hierarchy
    if hierarchy is not None and hierarchy.num_fine != k:
        raise ValueError(
            f"hierarchy covers {hierarchy.num_fine} classes, dataset has {k}"
        )
    if model is None:
        model = init_model(
            (dataset.dim, *config.hidden_dims, k), derive_seed(config.seed, "init")
        )

    train_x = np.ascontiguousarray(dataset.train_features())
    noisy = dataset.noisy_labels[dataset.train_indices]
    fine_onehot_all = one_hot(noisy, k)
    if hierarchy is not None:
        coarse_onehot_all = one_hot(map_labels(hierarchy, noisy), hierarchy.num_coarse)
    test_x = np.ascontiguousarray(dataset.test_features())
    test_labels = dataset.clean_labels[dataset.test_indices]

    params = _model_params(model)
    state = AdamState.for_params(params, config.adam_beta1,
                                 config.adam_beta2, config.adam_eps)
    shuffle_rng = Rng(derive_seed(config.seed, "shuffle"))

    n = train_x.shape[0]
    n_test = test_x.shape[0]
    rec_train, rec_fine, rec_coarse, rec_acc = [], [], [], []
    bitmaps = np.zeros((config.epochs, n_test), dtype=np.uint8)

    for epoch in range(config.epochs):
        lr = _epoch_lr(config, epoch)
        perm = shuffle_rng.permutation(n)
        loss_sum = fine_sum = coarse_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb = np.ascontiguousarray(train_x[idx])
            yb = np.ascontiguousarray(fine_onehot_all[idx])
            logits, cache = mlp_forward(model, xb)
            fine_probs = kernels.softmax_rows(logits)

            if hierarchy is None:
                fine = kernels.cross_entropy(fine_probs, yb)
                total, coarse = fine, math.nan
                dlogits = kernels.weighted_ce_dlogits(
                    fine_probs, yb, None, None, None, 1.0
                )
            else:
                cb = np.ascontiguousarray(coarse_onehot_all[idx])
                coarse_probs = map_probs(hierarchy, fine_probs)
                total, fine, coarse = weighted_loss(
                    fine_probs, yb, coarse_probs, cb, config.alpha
                )
                dlogits = kernels.weighted_ce_dlogits(
                    fine_probs, yb, coarse_probs, cb,
                    hierarchy.fine_to_coarse, config.alpha,
                )
            if not math.isfinite(total):
                raise TrainingDivergedError(
                    f"non-finite loss {total} at epoch {epoch + 1}, batch offset {start}"
                )
            loss_sum += total * len(idx)
            fine_sum += fine * len(idx)
            coarse_sum += coarse * len(idx)

            grads = mlp_backward(model, cache, dlogits)
            adam_step(params, grads.dweights + grads.dbiases, state, lr)

        acc, bitmap = _evaluate(model, test_x, test_labels)
        rec_train.append(loss_sum / n)
        rec_fine.append(fine_sum / n)
        rec_coarse.append(coarse_sum / n)
        rec_acc.append(acc)
        bitmaps[epoch] = bitmap

    return RunRecord(
        config=config.snapshot(),
        seed=config.seed,
        train_loss=np.asarray(rec_train),
        fine_loss=np.asarray(rec_fine),
        coarse_loss=np.asarray(rec_coarse),
        test_acc=np.asarray(rec_acc),
        bitmaps=bitmaps,
    )


def train_flat(dataset: LabeledDataset, config: TrainConfig,
               model: MlpClassifier | None = None) -> RunRecord:
    """Hierarchy-free reference loop: plain fine cross-entropy only.

    Exists so the alpha = 1 reduction can be checked against a code path
    that never touches a hierarchy at all.
    """
    flat_config = TrainConfig(**{**config.snapshot(), "alpha": 1.0,
                                 "hierarchy": None,
                                 "hidden_dims": tuple(config.hidden_dims)})
    return train(dataset, flat_config, model=model)
