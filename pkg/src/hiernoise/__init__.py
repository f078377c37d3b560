"""Label-noise-robust training with a fine/coarse label hierarchy.

The hierarchical (HC) scheme trains an ordinary softmax classifier with a
weighted two-level loss: the fine cross-entropy plus a coarse one computed
by summing predicted probability mass inside each coarse group of classes.
Flipping a label usually lands it somewhere nearby, so coarse targets are
cleaner than fine ones and damp noise memorization without any change to
the model architecture.
"""

from .data import (LabeledDataset, SyntheticSpec, REFERENCE_SPEC,
                   generate_synthetic, load_mnist_idx, one_hot)
from .evaluation import (ComparisonReport, PairedOutcome, aggregate_runs,
                         mcnemar_test, window_accuracy)
from .hierarchy import (Hierarchy, builtin_hierarchy, identity_hierarchy,
                        learn_hierarchy, map_labels, map_probs)
from .kernels import BACKEND, cross_entropy, matmul, softmax_rows
from .mlp import LayerGrads, MlpClassifier, init_model, mlp_backward, mlp_forward
from .noise import (NoiseModel, TwoGaussianProblem, breakdown_experiment,
                    class_dependent_noise, corrupt_labels, noisy_posterior,
                    uniform_noise)
from .rng import Rng, derive_seed
from .trainer import (AdamState, RunRecord, TrainConfig, TrainingDivergedError,
                      adam_step, train, train_flat, weighted_loss)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BACKEND", "ComparisonReport", "Hierarchy", "LabeledDataset",
    "LayerGrads", "MlpClassifier", "NoiseModel", "PairedOutcome",
    "REFERENCE_SPEC", "Rng", "RunRecord", "SyntheticSpec", "TrainConfig",
    "TrainingDivergedError", "TwoGaussianProblem", "aggregate_runs",
    "adam_step", "breakdown_experiment", "builtin_hierarchy",
    "class_dependent_noise", "corrupt_labels", "cross_entropy", "derive_seed",
    "generate_synthetic", "identity_hierarchy", "init_model", "learn_hierarchy",
    "load_mnist_idx", "map_labels", "map_probs", "matmul", "mcnemar_test",
    "mlp_backward", "mlp_forward", "noisy_posterior", "one_hot",
    "softmax_rows", "train", "train_flat", "uniform_noise", "weighted_loss",
    "window_accuracy",
]
