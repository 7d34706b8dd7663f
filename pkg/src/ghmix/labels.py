"""MAP label extraction, adjusted Rand index, and confusion summaries.

Labels are 1-based component indices.  Partially labelled vectors mark
unknown positions with values < 1 (the CSV reader maps its
unlabeled marker to 0); pairwise comparisons silently drop positions
that are unlabeled on either side.
"""

from __future__ import annotations

import numpy as np

__all__ = ["map_labels", "ari", "confusion"]


def map_labels(zhat) -> np.ndarray:
    """Per-row arg max of a responsibility matrix, 1-based, ties to the
    lowest index."""
    zhat = np.asarray(zhat, dtype=float)
    if zhat.ndim != 2:
        raise ValueError("zhat must be an n x G matrix")
    return np.argmax(zhat, axis=1) + 1


def _paired(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError("label vectors must have equal length")
    keep = (a >= 1) & (b >= 1)
    return a[keep].astype(np.int64), b[keep].astype(np.int64)


def _contingency(a, b):
    u_a, ia = np.unique(a, return_inverse=True)
    u_b, ib = np.unique(b, return_inverse=True)
    table = np.zeros((u_a.size, u_b.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def ari(a, b) -> float:
    """Adjusted Rand index between two labelings.

    Positions unlabeled in either argument are excluded pairwise.
    Equals 1 exactly when the partitions agree up to relabeling; has
    expected value 0 under independent random labelings.
    """
    a, b = _paired(a, b)
    n = a.size
    if n == 0:
        raise ValueError("no jointly labeled positions")
    table = _contingency(a, b)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_rows * sum_cols / total
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:  # both partitions trivial
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def confusion(a, b):
    """Contingency table and misclassification rate under greedy
    one-to-one matching.

    Returns ``(table, rate)`` where ``table[i, j]`` counts positions
    with label ``i+1`` in ``a`` and ``j+1`` in ``b`` (labels are taken
    over the union ``1..max``), and ``rate`` is the fraction left
    unmatched after repeatedly pairing the largest remaining cell.
    """
    a, b = _paired(a, b)
    n = a.size
    if n == 0:
        raise ValueError("no jointly labeled positions")
    ka, kb = int(a.max()), int(b.max())
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (a - 1, b - 1), 1)

    work = table.astype(float).copy()
    matched = 0
    for _ in range(min(ka, kb)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        if work[i, j] < 0:
            break
        matched += int(work[i, j])
        work[i, :] = -1.0
        work[:, j] = -1.0
    return table, 1.0 - matched / n
