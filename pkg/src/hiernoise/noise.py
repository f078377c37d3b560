"""Label-noise models: transition matrices, corruption, and the binary
breakdown-point study.

A noise model is a row-stochastic K x K transition matrix ``T`` where
``T[i, j]`` is the probability a true class-``i`` example is observed with
label ``j``, plus the scalar overall noise ratio ``p``.  Corruption only
ever touches the train split; the test split stays clean because that is
what evaluation is defined on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .rng import Rng, derive_seed


@dataclass(frozen=True)
class NoiseModel:
    transition: np.ndarray
    ratio: float

    def __post_init__(self):
        t = np.ascontiguousarray(self.transition, dtype=np.float64)
        object.__setattr__(self, "transition", t)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 2:
            raise ValueError(f"transition must be K x K with K >= 2, got {t.shape}")
        if t.min() < 0:
            raise ValueError("transition entries must be >= 0")
        rowsums = t.sum(axis=1)
        if np.abs(rowsums - 1.0).max() > 1e-9:
            raise ValueError("transition rows must sum to 1 within 1e-9")
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError(f"noise ratio must be in [0, 1), got {self.ratio}")

    @property
    def num_classes(self) -> int:
        return self.transition.shape[0]

    def off_diagonal_ratio(self, class_weights=None) -> float:
        """Off-diagonal mass averaged over rows (class-frequency weighted)."""
        off = 1.0 - np.diag(self.transition)
        if class_weights is None:
            return float(off.mean())
        w = np.asarray(class_weights, dtype=np.float64)
        return float((off * w).sum() / w.sum())


def uniform_noise(num_classes: int, p: float) -> NoiseModel:
    """Flip to any other class with equal probability p/(K-1)."""
    if num_classes < 2:
        raise ValueError(f"need >= 2 classes, got {num_classes}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"noise ratio must be in [0, 1), got {p}")
    t = np.full((num_classes, num_classes), p / (num_classes - 1))
    np.fill_diagonal(t, 1.0 - p)
    return NoiseModel(t, p)


def confusion_matrix(true_labels, pred_labels, num_classes: int) -> np.ndarray:
    """Counts[i, j] = examples with true class i predicted as j."""
    out = np.zeros((num_classes, num_classes), dtype=np.float64)
    np.add.at(out, (np.asarray(true_labels), np.asarray(pred_labels)), 1.0)
    return out


def offdiag_confusion_profile(confusion) -> np.ndarray:
    """Row-normalized confusion with the diagonal removed.

    Rows without any off-diagonal mass fall back to uniform over the other
    classes, so the result is always row-stochastic.
    """
    c = np.array(confusion, dtype=np.float64)
    k = c.shape[0]
    np.fill_diagonal(c, 0.0)
    sums = c.sum(axis=1)
    uniform = (np.ones((k, k)) - np.eye(k)) / (k - 1)
    out = np.where(sums[:, None] > 0, c / np.where(sums == 0, 1.0, sums)[:, None],
                   uniform)
    return out


def class_dependent_noise(dataset: LabeledDataset, target_ratio: float,
                          proxy_config=None, confusion=None) -> NoiseModel:
    """Noise whose off-diagonal structure follows a trained classifier.

    A proxy classifier is trained on the clean train split; its confusion
    matrix on the test split, diagonal dropped and row-renormalized, gives
    where each class's flips go.  The blend ``T = (1-p) I + p C_off`` keeps
    every diagonal at exactly ``1-p`` so the scalar ratio means the same
    thing as in the uniform model.

    Pass ``confusion`` to skip the proxy training (e.g. to reuse one
    confusion matrix for several ratios).
    """
    k = dataset.num_classes
    if k < 2:
        raise ValueError("dataset must have at least 2 classes")
    if not 0.0 < target_ratio < 1.0:
        raise ValueError(f"noise ratio must be in (0, 1), got {target_ratio}")
    if confusion is None:
        confusion = proxy_confusion(dataset, proxy_config)
    c = np.asarray(confusion, dtype=np.float64)
    if c.shape != (k, k):
        raise ValueError(f"confusion shape {c.shape} does not match {k} classes")
    profile = offdiag_confusion_profile(c)
    t = (1.0 - target_ratio) * np.eye(k) + target_ratio * profile
    return NoiseModel(t, target_ratio)


def proxy_confusion(dataset: LabeledDataset, proxy_config=None) -> np.ndarray:
    """Confusion matrix of a small classifier trained on the clean split."""
    # local imports: trainer imports this module's siblings, not vice versa
    from .mlp import init_model, predict_labels
    from .trainer import TrainConfig, train

    if len(dataset.test_indices) == 0:
        raise ValueError("class-dependent noise needs a test split for the confusion")
    if proxy_config is None:
        proxy_config = TrainConfig(alpha=1.0, epochs=30, seed=0)
    clean = dataset.with_noisy_labels(dataset.clean_labels.copy())
    model = init_model(
        (dataset.dim, *proxy_config.hidden_dims, dataset.num_classes),
        derive_seed(proxy_config.seed, "proxy-init"),
    )
    train(clean, proxy_config, model=model)  # updates the model in place
    pred = predict_labels(model, dataset.test_features())
    true = dataset.clean_labels[dataset.test_indices]
    return confusion_matrix(true, pred, dataset.num_classes)


def corrupt_labels(dataset: LabeledDataset, model: NoiseModel, seed: int) -> LabeledDataset:
    """Resample the train split's observed labels from ``T[y, :]``.

    Draws are independent per example, vectorized per class in ascending
    class order so the result depends only on (dataset, model, seed).  Test
    labels are left clean.
    """
    if dataset.num_classes != model.num_classes:
        raise ValueError(
            f"dataset has {dataset.num_classes} classes, noise model "
            f"{model.num_classes}"
        )
    rng = Rng(derive_seed(seed, "corrupt"))
    noisy = dataset.clean_labels.copy()
    train_idx = dataset.train_indices
    train_clean = dataset.clean_labels[train_idx]
    for k in range(model.num_classes):
        member_idx = train_idx[train_clean == k]
        if member_idx.size == 0:
            continue
        cdf = np.cumsum(model.transition[k])
        cdf[-1] = 1.0  # absorb float accumulation drift
        noisy[member_idx] = rng.categorical(cdf, member_idx.size)
    return dataset.with_noisy_labels(noisy)


def noisy_posterior(eta_tilde, p: float):
    """(1 - 2p) * eta_tilde + p: posterior seen through a symmetric binary
    flip channel of rate ``p``.  At p = 1/2 the output is constant 1/2 ---
    the labels carry no information."""
    eta_arr = np.asarray(eta_tilde, dtype=np.float64)
    if eta_arr.size and (eta_arr.min() < 0.0 or eta_arr.max() > 1.0):
        raise ValueError("posterior values must lie in [0, 1]")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    out = (1.0 - 2.0 * p) * eta_arr + p
    return float(out) if np.isscalar(eta_tilde) else out


def save_transition_csv(model: NoiseModel, path) -> None:
    with open(path, "w") as fh:
        for row in model.transition:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_transition_csv(path) -> NoiseModel:
    t = np.loadtxt(path, delimiter=",", ndmin=2)
    ratio = float(1.0 - np.diag(t).mean())
    return NoiseModel(t, ratio)  # constructor re-validates row-stochasticity


# ---------------------------------------------------------------------------
# Breakdown-point study on a 1-D two-Gaussian binary task
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoGaussianProblem:
    """Observed-label problem: X | Z=0 ~ N(-mu, s^2), X | Z=1 ~ N(+mu, s^2),
    equal priors.  The clean-label posterior is eta(x) = (1-2p) eta~(x) + p,
    i.e. clean labels relate to the observed ones through a symmetric flip
    channel of rate p."""

    mu: float = 1.0
    sigma: float = 1.0
    threshold_lo: float = -3.0
    threshold_hi: float = 3.0
    num_thresholds: int = 121
    n_fit: int = 200_000
    seed: int = 0
    quad_nodes: int = 96

    def thresholds(self) -> np.ndarray:
        return np.linspace(self.threshold_lo, self.threshold_hi, self.num_thresholds)


@dataclass(frozen=True)
class BreakdownRow:
    p: float
    excess_clean_risk: float
    excess_noisy_risk: float
    identity_residual: float
    fitted_threshold: float
    noisy_min_threshold: float
    clean_risk: float
    noisy_risk: float


def _noisy_posterior_of_x(problem: TwoGaussianProblem, x: np.ndarray) -> np.ndarray:
    # equal priors: eta~(x) = phi(x-mu) / (phi(x-mu) + phi(x+mu))
    a = -0.5 * ((x - problem.mu) / problem.sigma) ** 2
    b = -0.5 * ((x + problem.mu) / problem.sigma) ** 2
    m = np.maximum(a, b)
    ea, eb = np.exp(a - m), np.exp(b - m)
    return ea / (ea + eb)


def _density_of_x(problem: TwoGaussianProblem, x: np.ndarray) -> np.ndarray:
    z = 1.0 / (problem.sigma * np.sqrt(2.0 * np.pi))
    a = np.exp(-0.5 * ((x - problem.mu) / problem.sigma) ** 2)
    b = np.exp(-0.5 * ((x + problem.mu) / problem.sigma) ** 2)
    return 0.5 * z * (a + b)


def _quad_pieces(problem: TwoGaussianProblem, breakpoints) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights over [-R, R] split at the breakpoints
    (the integrands are only piecewise smooth: indicator steps and the
    Bayes-rule kink)."""
    r = abs(problem.mu) + 12.0 * problem.sigma
    pts = sorted({-r, r, *(float(b) for b in breakpoints if -r < float(b) < r)})
    base_x, base_w = np.polynomial.legendre.leggauss(problem.quad_nodes)
    xs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        half = 0.5 * (hi - lo)
        xs.append(half * base_x + 0.5 * (hi + lo))
        ws.append(half * base_w)
    return np.concatenate(xs), np.concatenate(ws)


def threshold_risks(problem: TwoGaussianProblem, p: float, threshold: float
                    ) -> tuple[float, float]:
    """(clean_risk, noisy_risk) of the classifier 1{x > threshold}."""
    x, w = _quad_pieces(problem, [threshold, 0.0])
    eta_noisy = _noisy_posterior_of_x(problem, x)
    eta_clean = noisy_posterior(eta_noisy, p)
    dens = _density_of_x(problem, x)
    predict_one = x > threshold
    noisy_err = np.where(predict_one, 1.0 - eta_noisy, eta_noisy)
    clean_err = np.where(predict_one, 1.0 - eta_clean, eta_clean)
    return float(np.sum(clean_err * dens * w)), float(np.sum(noisy_err * dens * w))


def bayes_risks(problem: TwoGaussianProblem, p: float) -> tuple[float, float, float]:
    """(clean Bayes risk, noisy Bayes risk, noisy margin mass E|2eta~-1|)."""
    x, w = _quad_pieces(problem, [0.0])
    eta_noisy = _noisy_posterior_of_x(problem, x)
    eta_clean = noisy_posterior(eta_noisy, p)
    dens = _density_of_x(problem, x)
    clean_bayes = float(np.sum(np.minimum(eta_clean, 1.0 - eta_clean) * dens * w))
    noisy_bayes = float(np.sum(np.minimum(eta_noisy, 1.0 - eta_noisy) * dens * w))
    margin_mass = float(np.sum(np.abs(2.0 * eta_noisy - 1.0) * dens * w))
    return clean_bayes, noisy_bayes, margin_mass


def excess_risk_identity_residual(problem: TwoGaussianProblem, p: float,
                                  threshold: float) -> float:
    """Residual of the exact clean/noisy excess-risk relation.

    For any classifier f and flip rate p the excess risks satisfy

        excess_clean(f) = (1-2p) * excess_noisy(f) + max(0, 2p-1) * M

    with M = E|2 eta~ - 1| (the largest possible noisy excess).  For
    p < 1/2 the correction term vanishes and the clean excess is just the
    noisy excess scaled by (1-2p); past p = 1/2 the sign flip means the
    noisy-risk minimizer maximizes the clean risk.
    """
    clean_risk, noisy_risk = threshold_risks(problem, p, threshold)
    clean_bayes, noisy_bayes, margin_mass = bayes_risks(problem, p)
    excess_clean = clean_risk - clean_bayes
    excess_noisy = noisy_risk - noisy_bayes
    predicted = (1.0 - 2.0 * p) * excess_noisy + max(0.0, 2.0 * p - 1.0) * margin_mass
    return abs(excess_clean - predicted)


def _fit_threshold_empirical(problem: TwoGaussianProblem, p: float) -> float:
    """Grid threshold minimizing the empirical observed-label risk.

    The fitting data are draws of (x, z) from the observed problem; p does
    not enter the sampling (the observed problem is the same for every p)
    but is folded into the substream tag so each grid entry is an
    independent experiment.
    """
    rng = Rng(derive_seed(problem.seed, "breakdown-fit", repr(p)))
    u = rng.uniforms(problem.n_fit)
    z = (u < 0.5).astype(np.float64)
    x = problem.mu * (2.0 * z - 1.0) + problem.sigma * rng.normals(problem.n_fit)
    best_t, best_err = 0.0, np.inf
    for t in problem.thresholds():
        err = float(np.mean((x > t) != (z > 0.5)))
        if err < best_err:
            best_err, best_t = err, float(t)
    return best_t


def breakdown_experiment(p_grid, problem: TwoGaussianProblem | None = None
                         ) -> list[BreakdownRow]:
    """Fit a threshold on observed labels at each p and report how its
    clean/noisy excess risks relate."""
    if problem is None:
        problem = TwoGaussianProblem()
    rows = []
    for p in p_grid:
        p = float(p)
        if not 0.0 <= p < 1.0:
            raise ValueError(f"p grid values must be in [0, 1), got {p}")
        t_hat = _fit_threshold_empirical(problem, p)
        clean_risk, noisy_risk = threshold_risks(problem, p, t_hat)
        clean_bayes, noisy_bayes, margin_mass = bayes_risks(problem, p)
        excess_clean = clean_risk - clean_bayes
        excess_noisy = noisy_risk - noisy_bayes
        predicted = ((1.0 - 2.0 * p) * excess_noisy
                     + max(0.0, 2.0 * p - 1.0) * margin_mass)
        noisy_min_t = min(
            problem.thresholds(),
            key=lambda t: threshold_risks(problem, p, float(t))[1],
        )
        rows.append(BreakdownRow(
            p=p,
            excess_clean_risk=excess_clean,
            excess_noisy_risk=excess_noisy,
            identity_residual=abs(excess_clean - predicted),
            fitted_threshold=t_hat,
            noisy_min_threshold=float(noisy_min_t),
            clean_risk=clean_risk,
            noisy_risk=noisy_risk,
        ))
    return rows


def save_breakdown_csv(rows: list[BreakdownRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("p,excess_clean,excess_noisy,residual\n")
        for row in rows:
            fh.write(
                f"{row.p!r},{row.excess_clean_risk!r},"
                f"{row.excess_noisy_risk!r},{row.identity_residual!r}\n"
            )
