"""1-NN classification under arbitrary measures, and matrix export.

A measure is any pure callable ``measure(a, b) -> float`` over two
series. Its ``semantics`` say how scores rank neighbors:

* ``"distance"``: smaller is closer; matrix entries are the raw scores.
* ``"similarity"``: larger is closer. Similarity measures in this
  package return log-domain scores (``log s <= 0``); exported matrix
  entries are the dissimilarity ``1 - exp(score)``, which lies in [0, 1].

Predictions depend only on the ranking, so any strictly monotone
transform of a measure's scores classifies identically.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset

SEMANTICS = ("distance", "similarity")


@dataclass(frozen=True)
class DistanceMatrix:
    """Square dissimilarity matrix over an ordered instance list."""

    values: np.ndarray
    semantics: str


def _check_semantics(semantics: str) -> None:
    if semantics not in SEMANTICS:
        raise ValueError(f"semantics must be one of {SEMANTICS}, got {semantics!r}")


def _map_rows(fn, count: int, jobs: int):
    if jobs <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(count)))


def nn_classify(
    train: Dataset, test: Dataset, measure, semantics: str, jobs: int = 1
) -> tuple[float, list[int]]:
    """Label each test instance by its closest training neighbor.

    Ties break toward the lowest training index. Results are independent
    of ``jobs``: parallelism only distributes whole test instances.
    """
    _check_semantics(semantics)
    if train.channels != test.channels:
        raise ValueError(f"channel mismatch: train {train.channels}, test {test.channels}")
    want_max = semantics == "similarity"

    def classify(i: int) -> int:
        inst = test.instances[i]
        best_score = None
        best_label = -1
        for neighbor in train.instances:
            score = measure(inst, neighbor)
            if best_score is None or (score > best_score if want_max else score < best_score):
                best_score = score
                best_label = neighbor.label
        return best_label

    predictions = _map_rows(classify, len(test), jobs)
    correct = sum(1 for pred, inst in zip(predictions, test.instances) if pred == inst.label)
    return correct / len(test), predictions


def distance_matrix(dataset: Dataset, measure, semantics: str, jobs: int = 1) -> DistanceMatrix:
    """Full N x N dissimilarity evaluation of ``measure`` over the set.

    Similarity scores (log domain) are converted to ``1 - exp(score)``;
    distances are stored as returned. Entry [i, j] is measure(i, j), so
    an asymmetric measure yields an asymmetric matrix.
    """
    _check_semantics(semantics)
    n = len(dataset)

    def row(i: int) -> np.ndarray:
        out = np.empty(n)
        for j in range(n):
            score = measure(dataset.instances[i], dataset.instances[j])
            out[j] = 1.0 - np.exp(score) if semantics == "similarity" else score
        return out

    values = np.stack(_map_rows(row, n, jobs))
    return DistanceMatrix(values, semantics)


def write_matrix_csv(matrix, path) -> None:
    """Row-major CSV, 9 significant digits, no header."""
    values = matrix.values if isinstance(matrix, DistanceMatrix) else np.asarray(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in values:
            fh.write(",".join(format(v, ".9g") for v in row))
            fh.write("\n")


def accuracy_line(measure_name: str, dataset_name: str, n_train: int, n_test: int, accuracy: float) -> str:
    """The one-line accuracy report: measure, dataset, sizes, accuracy."""
    return f"{measure_name},{dataset_name},{n_train},{n_test},{accuracy!r}"
