"""Statistical comparison of paired classifier runs.

McNemar's test on per-example correctness bitmaps, window accuracies, and
multi-seed aggregation into per-epoch mean/stderr curves with a median
p-value track.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .trainer import RunRecord

# below this many discordant pairs the chi-square approximation is poor;
# fall back to the exact binomial test
EXACT_TEST_CUTOFF = 25


@dataclass(frozen=True)
class PairedOutcome:
    """2x2 agreement counts of two classifiers on one test set."""

    b: int      # A correct, B wrong
    c: int      # A wrong, B correct
    n11: int    # both correct
    n00: int    # both wrong

    @property
    def total(self) -> int:
        return self.b + self.c + self.n11 + self.n00


def paired_outcome(bitmap_a, bitmap_b) -> PairedOutcome:
    a = np.asarray(bitmap_a).astype(bool)
    b = np.asarray(bitmap_b).astype(bool)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"bitmaps must be equal-length vectors, got {a.shape} vs {b.shape}")
    return PairedOutcome(
        b=int(np.sum(a & ~b)),
        c=int(np.sum(~a & b)),
        n11=int(np.sum(a & b)),
        n00=int(np.sum(~a & ~b)),
    )


def _chi2_sf_1df(stat: float) -> float:
    # survival of chi-square with 1 dof: P(Z^2 > s) = erfc(sqrt(s/2))
    return math.erfc(math.sqrt(stat / 2.0))


def _binom_cdf_half(k: int, n: int) -> float:
    # P(Bin(n, 1/2) <= k), exact in rationals
    total = sum(math.comb(n, i) for i in range(k + 1))
    return total / 2.0 ** n


def mcnemar_test(bitmap_a, bitmap_b) -> tuple[float, float, PairedOutcome]:
    """McNemar's paired test on two correctness bitmaps.

    With at least 25 discordant pairs: continuity-corrected chi-square
    statistic ``max(|b-c|-1, 0)^2 / (b+c)`` against chi-square(1).  The
    ``max(.., 0)`` guard keeps the b == c case at p = 1, where the raw
    corrected formula would overshoot the exact test by far more than its
    usual accuracy.  With fewer discordant pairs: exact two-sided binomial
    test at q = 1/2.  No disagreements at all gives p = 1.
    """
    outcome = paired_outcome(bitmap_a, bitmap_b)
    b, c = outcome.b, outcome.c
    n_disc = b + c
    if n_disc == 0:
        return 0.0, 1.0, outcome
    stat = max(abs(b - c) - 1, 0) ** 2 / n_disc
    if n_disc >= EXACT_TEST_CUTOFF:
        return stat, _chi2_sf_1df(stat), outcome
    p = min(1.0, 2.0 * _binom_cdf_half(min(b, c), n_disc))
    return stat, p, outcome


def window_accuracy(record: RunRecord, lo_epoch: int, hi_epoch: int) -> float:
    """Mean test accuracy over the inclusive 1-based epoch window."""
    if not 1 <= lo_epoch <= hi_epoch <= record.epochs:
        raise ValueError(
            f"window [{lo_epoch}, {hi_epoch}] outside recorded epochs "
            f"[1, {record.epochs}]"
        )
    return float(record.test_acc[lo_epoch - 1:hi_epoch].mean())


def mean_stderr(values) -> tuple[float, float]:
    """Mean and stderr (sample std over sqrt(n)) of a sequence of runs."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


@dataclass
class WindowSummary:
    method: str
    window: tuple[int, int]
    mean: float
    stderr: float

    def to_dict(self) -> dict:
        return {"method": self.method, "window": list(self.window),
                "mean": self.mean, "stderr": self.stderr}


@dataclass
class ComparisonReport:
    epochs: int
    flat_mean: np.ndarray
    flat_stderr: np.ndarray
    hc_mean: np.ndarray
    hc_stderr: np.ndarray
    p_median: np.ndarray
    windows: list[WindowSummary]

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,flat_mean,flat_stderr,hc_mean,hc_stderr,p_median\n")
            for e in range(self.epochs):
                fh.write(
                    f"{e + 1},{float(self.flat_mean[e])!r},"
                    f"{float(self.flat_stderr[e])!r},{float(self.hc_mean[e])!r},"
                    f"{float(self.hc_stderr[e])!r},{float(self.p_median[e])!r}\n"
                )

    def windows_json(self) -> list[dict]:
        return [w.to_dict() for w in self.windows]


def aggregate_runs(flat_records: list[RunRecord], hc_records: list[RunRecord],
                   early_window: tuple[int, int] = (21, 30)) -> ComparisonReport:
    """Aggregate seed-paired FLAT/HC runs into one comparison report.

    Run i of each method is paired with run i of the other for the
    per-epoch McNemar tests; the reported p is the median across seeds.
    Window summaries cover the final stage (last 10 epochs) and the
    early-stopping window.
    """
    if len(flat_records) < 2 or len(hc_records) != len(flat_records):
        raise ValueError("need >= 2 runs per method, seed-paired")
    epochs = flat_records[0].epochs
    for rec in (*flat_records, *hc_records):
        if rec.epochs != epochs:
            raise ValueError("all runs must record the same number of epochs")

    flat_acc = np.stack([r.test_acc for r in flat_records])
    hc_acc = np.stack([r.test_acc for r in hc_records])
    n_runs = flat_acc.shape[0]

    p_median = np.empty(epochs)
    for e in range(epochs):
        ps = [
            mcnemar_test(flat_records[i].bitmaps[e], hc_records[i].bitmaps[e])[1]
            for i in range(n_runs)
        ]
        p_median[e] = float(np.median(ps))

    windows: list[WindowSummary] = []
    final_window = (max(1, epochs - 9), epochs)
    for name, records in (("flat", flat_records), ("hc", hc_records)):
        for window in (final_window, early_window):
            lo, hi = window
            if not 1 <= lo <= hi <= epochs:
                continue
            mean, stderr = mean_stderr(
                [window_accuracy(r, lo, hi) for r in records]
            )
            windows.append(WindowSummary(name, (lo, hi), mean, stderr))

    return ComparisonReport(
        epochs=epochs,
        flat_mean=flat_acc.mean(axis=0),
        flat_stderr=flat_acc.std(axis=0, ddof=1) / np.sqrt(n_runs),
        hc_mean=hc_acc.mean(axis=0),
        hc_stderr=hc_acc.std(axis=0, ddof=1) / np.sqrt(n_runs),
        p_median=p_median,
        windows=windows,
    )


def save_windows_json(windows: list[WindowSummary], path) -> None:
    with open(path, "w") as fh:
        json.dump([w.to_dict() for w in windows], fh, indent=2)
        fh.write("\n")
