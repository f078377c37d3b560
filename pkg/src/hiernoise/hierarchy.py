"""Fine-to-coarse label mappings.

A hierarchy is a surjective partition of K fine classes into K_c coarse
groups.  It acts on labels by table lookup and on predicted probability
rows by summing each group's mass, so no model architecture change is ever
needed to produce coarse predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels

# ANIMAL-10N class order: (cat, lynx), (jaguar, cheetah), (wolf, coyote),
# (chimpanzee, orangutan), (hamster, guinea pig)
ANIMAL10N_CLASSES = (
    "cat", "lynx", "jaguar", "cheetah", "wolf",
    "coyote", "chimpanzee", "orangutan", "hamster", "guinea pig",
)


@dataclass(frozen=True)
class Hierarchy:
    fine_to_coarse: np.ndarray
    num_coarse: int

    def __post_init__(self):
        mapping = np.ascontiguousarray(self.fine_to_coarse, dtype=np.int64)
        object.__setattr__(self, "fine_to_coarse", mapping)
        if mapping.ndim != 1 or mapping.size == 0:
            raise ValueError("fine_to_coarse must be a non-empty 1-D array")
        if self.num_coarse < 1 or self.num_coarse > mapping.size:
            raise ValueError(f"num_coarse={self.num_coarse} invalid for {mapping.size} classes")
        hit = np.zeros(self.num_coarse, dtype=bool)
        if mapping.min() < 0 or mapping.max() >= self.num_coarse:
            raise ValueError("coarse indices outside [0, num_coarse)")
        hit[mapping] = True
        if not hit.all():
            missing = int(np.flatnonzero(~hit)[0])
            raise ValueError(f"coarse group {missing} has no fine classes")

    @property
    def num_fine(self) -> int:
        return self.fine_to_coarse.size

    def groups(self) -> list[frozenset[int]]:
        """The partition as a list of fine-class sets, indexed by group."""
        out = [set() for _ in range(self.num_coarse)]
        for fine, coarse in enumerate(self.fine_to_coarse):
            out[coarse].add(fine)
        return [frozenset(s) for s in out]

    def to_json(self) -> str:
        return json.dumps(
            {"num_coarse": self.num_coarse,
             "fine_to_coarse": self.fine_to_coarse.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "Hierarchy":
        obj = json.loads(text)
        return cls(np.asarray(obj["fine_to_coarse"], dtype=np.int64),
                   int(obj["num_coarse"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Hierarchy":
        with open(path) as fh:
            return cls.from_json(fh.read())


def identity_hierarchy(num_classes: int) -> Hierarchy:
    return Hierarchy(np.arange(num_classes, dtype=np.int64), num_classes)


def builtin_hierarchy(name: str) -> Hierarchy:
    """Published mappings: "mnist", "animal10n", or "identity(K)"."""
    key = name.strip().lower()
    if key == "mnist":
        # digit pairs (0,6) (1,7) (2,8) (3,5) (4,9)
        return Hierarchy(np.array([0, 1, 2, 3, 4, 3, 0, 1, 2, 4], dtype=np.int64), 5)
    if key == "animal10n":
        return Hierarchy(np.array([0, 0, 1, 1, 2, 2, 3, 3, 4, 4], dtype=np.int64), 5)
    if key.startswith("identity(") and key.endswith(")"):
        return identity_hierarchy(int(key[len("identity("):-1]))
    raise ValueError(f"unknown builtin hierarchy {name!r}")


def map_labels(h: Hierarchy, fine_labels) -> np.ndarray:
    fine_labels = np.asarray(fine_labels, dtype=np.int64)
    if fine_labels.size and (fine_labels.min() < 0 or fine_labels.max() >= h.num_fine):
        raise ValueError(f"fine label outside [0, {h.num_fine})")
    return h.fine_to_coarse[fine_labels]


def map_probs(h: Hierarchy, fine_probs) -> np.ndarray:
    """Sum each group's probability mass; conserves row mass exactly."""
    fine_probs = kernels.as_matrix(fine_probs)
    if fine_probs.shape[1] != h.num_fine:
        raise kernels.ShapeMismatchError(
            f"probs have {fine_probs.shape[1]} columns, hierarchy has {h.num_fine}"
        )
    return kernels.group_sum_cols(fine_probs, h.fine_to_coarse, h.num_coarse)


def learn_hierarchy(confusion, num_coarse: int) -> Hierarchy:
    """Group the most-confused classes by average-linkage agglomeration.

    The confusion matrix is symmetrized and its diagonal dropped; clusters
    with the highest average cross-confusion merge first, until
    ``num_coarse`` remain.  Ties break toward the lowest class indices, so
    the result is deterministic.  Coarse ids are assigned by each group's
    smallest fine class.
    """
    c = kernels.as_matrix(confusion)
    k = c.shape[0]
    if c.shape != (k, k):
        raise kernels.ShapeMismatchError(f"confusion must be square, got {c.shape}")
    if c.min() < 0:
        raise ValueError("confusion entries must be nonnegative")
    if not 2 <= num_coarse < k:
        raise ValueError(f"num_coarse must be in [2, {k}), got {num_coarse}")

    sim = (c + c.T) / 2.0
    np.fill_diagonal(sim, 0.0)

    clusters: list[list[int]] = [[i] for i in range(k)]
    while len(clusters) > num_coarse:
        best = None
        best_score = -1.0
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                score = float(
                    np.mean(sim[np.ix_(clusters[i], clusters[j])])
                )
                if score > best_score:
                    best_score = score
                    best = (i, j)
        i, j = best
        clusters[i] = sorted(clusters[i] + clusters[j])
        del clusters[j]
        # keep cluster list ordered by smallest member so the i<j scan
        # breaks ties lexicographically
        clusters.sort(key=lambda members: members[0])

    mapping = np.empty(k, dtype=np.int64)
    for coarse, members in enumerate(sorted(clusters, key=lambda m: m[0])):
        for fine in members:
            mapping[fine] = coarse
    return Hierarchy(mapping, num_coarse)
