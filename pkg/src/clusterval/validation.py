"""External and internal cluster validation.

External scores follow the conditional-entropy definitions of homogeneity
and completeness, with natural logs. Entropy sums use ``math.fsum`` so each
score is exactly rounded and independent of table orientation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, replace
from itertools import permutations
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dataset import as_matrix
from .errors import ClusterValError, InvalidParameterError
from .hclust import LINKAGES, agglomerate, cut_by_count, pairwise_distances
from .kmeans import derive_seed, fit_kmeans

__all__ = [
    "ContingencyTable",
    "ExternalScores",
    "MetricReport",
    "SilhouetteResult",
    "best_match_accuracy",
    "contingency",
    "external_scores",
    "linkage_comparison",
    "silhouette",
    "silhouette_sweep",
]


def _sort_key(x):
    # Integers sort numerically, everything else as strings after them.
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return (0, int(x), "")
    return (1, 0, str(x))


@dataclass(frozen=True)
class ContingencyTable:
    """Class x cluster counts; rows are classes, columns are clusters."""

    class_names: tuple
    cluster_ids: tuple
    counts: np.ndarray

    @property
    def n(self):
        return int(self.counts.sum())

    def transposed(self):
        return ContingencyTable(self.cluster_ids, self.class_names, self.counts.T.copy())

    def to_text(self, cluster_header="labels", class_header="Species"):
        """Aligned table with clusters as rows and classes as columns."""
        cols = [str(c) for c in self.class_names]
        rows = [str(k) for k in self.cluster_ids]
        first_w = max([len(cluster_header), len(class_header)] + [len(r) for r in rows])
        widths = [max(len(c), max((len(str(v)) for v in self.counts[j]), default=1))
                  for j, c in enumerate(cols)]
        lines = [
            class_header.ljust(first_w) + "  " + "  ".join(c.rjust(w) for c, w in zip(cols, widths)),
            cluster_header.ljust(first_w),
        ]
        for k, r in enumerate(rows):
            cells = "  ".join(str(int(self.counts[j, k])).rjust(w) for j, w in enumerate(widths))
            lines.append(r.ljust(first_w) + "  " + cells)
        return "\n".join(line.rstrip() for line in lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cluster"] + [str(c) for c in self.class_names])
        for k, cid in enumerate(self.cluster_ids):
            writer.writerow([cid] + [int(v) for v in self.counts[:, k]])
        return buf.getvalue()


def contingency(labels_true: Sequence, labels_pred: Sequence) -> ContingencyTable:
    if len(labels_true) != len(labels_pred):
        raise ClusterValError(
            f"label lengths differ: {len(labels_true)} true vs {len(labels_pred)} predicted"
        )
    if len(labels_true) == 0:
        raise ClusterValError("contingency needs at least one row")
    true = [x if isinstance(x, (int, np.integer)) else str(x) for x in labels_true]
    pred = [int(x) if isinstance(x, (int, np.integer)) else x for x in labels_pred]
    classes = tuple(sorted(set(true), key=_sort_key))
    clusters = tuple(sorted(set(pred), key=_sort_key))
    ci = {c: i for i, c in enumerate(classes)}
    ki = {k: i for i, k in enumerate(clusters)}
    counts = np.zeros((len(classes), len(clusters)), dtype=np.int64)
    for c, k in zip(true, pred):
        counts[ci[c], ki[k]] += 1
    return ContingencyTable(classes, clusters, counts)


@dataclass(frozen=True)
class ExternalScores:
    homogeneity: float
    completeness: float
    v_measure: float


def _entropy(sizes, n):
    return -math.fsum((s / n) * math.log(s / n) for s in sizes if s > 0)


def _homogeneity(counts):
    """1 - H(rows | columns) / H(rows) for a count matrix."""
    n = int(counts.sum())
    h_rows = _entropy([int(x) for x in counts.sum(axis=1)], n)
    if h_rows == 0.0:
        return 1.0
    col_sizes = counts.sum(axis=0)
    h_cond = -math.fsum(
        (int(counts[i, j]) / n) * math.log(int(counts[i, j]) / int(col_sizes[j]))
        for i in range(counts.shape[0])
        for j in range(counts.shape[1])
        if counts[i, j] > 0
    )
    return 1.0 - h_cond / h_rows


def external_scores(table):
    counts = np.asarray(table.counts if isinstance(table, ContingencyTable) else table)
    if counts.sum() < 1:
        raise ClusterValError("contingency table is empty")
    h = _homogeneity(counts)
    c = _homogeneity(counts.T)
    v = 2.0 * h * c / (h + c) if h + c > 0 else 0.0
    return ExternalScores(h, c, v)


@dataclass(frozen=True)
class SilhouetteResult:
    scores: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def mean(self):
        return float(np.mean(self.scores))


def silhouette(matrix, assignments):
    """Per-sample silhouette with Euclidean distances.

    Points in singleton clusters score 0, as do points with ``a = b = 0``.
    """
    X = as_matrix(matrix)
    labels = np.asarray(assignments)
    n = X.shape[0]
    if labels.shape != (n,):
        raise ClusterValError(f"expected {n} assignments, got {labels.shape}")
    clusters, inverse = np.unique(labels, return_inverse=True)
    if len(clusters) < 2:
        raise ClusterValError("silhouette undefined for k=1")
    D = pairwise_distances(X).square()
    k = len(clusters)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), inverse] = 1.0
    sizes = onehot.sum(axis=0)
    sums = D @ onehot  # n x k: total distance from each point to each cluster
    own = inverse
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(n), own] / np.maximum(own_size - 1, 1), 0.0)
    means = sums / sizes
    means[np.arange(n), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.zeros(n)
    ok = (own_size > 1) & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    for arr in (s, a, b):
        arr.flags.writeable = False
    return SilhouetteResult(s, a, b)


def silhouette_sweep(matrix, k_values, config):
    """Mean silhouette of k-means fits for each k (seeds derived per k)."""
    X = as_matrix(matrix)
    out = []
    for k in k_values:
        if k < 2:
            raise InvalidParameterError("silhouette needs k >= 2")
        cfg = replace(config, k=int(k), seed=derive_seed(config.seed, k))
        model = fit_kmeans(cfg, X)
        out.append((int(k), silhouette(X, model.assignments).mean))
    return out


def _matching_bitmask(W):
    """Maximum-weight matching of rows to distinct columns, rows <= columns."""
    r, c = W.shape
    best = {0: 0}
    for i in range(r):
        nxt = {}
        for mask, val in best.items():
            for j in range(c):
                bit = 1 << j
                if mask & bit:
                    continue
                cand = val + int(W[i, j])
                key = mask | bit
                if nxt.get(key, -1) < cand:
                    nxt[key] = cand
        best = nxt
    return max(best.values())


def _matching_permutations(W):
    r, c = W.shape
    return max(
        sum(int(W[i, p[i]]) for i in range(r)) for p in permutations(range(c), r)
    )


def best_match_accuracy(table, method="auto"):
    """Largest fraction of rows correctly labeled under a one-to-one
    cluster-to-class mapping.

    ``method`` is ``"auto"``, ``"exhaustive"`` (all permutations, small
    tables only), ``"bitmask"`` (exact subset DP) or ``"assignment"``
    (Hungarian algorithm).
    """
    counts = np.asarray(table.counts if isinstance(table, ContingencyTable) else table)
    W = counts.T  # clusters x classes
    if W.shape[0] > W.shape[1]:
        W = W.T
    n = int(counts.sum())
    if n == 0:
        raise ClusterValError("contingency table is empty")
    if method == "auto":
        method = "bitmask" if max(counts.shape) <= 10 else "assignment"
    if method == "exhaustive":
        matched = _matching_permutations(W)
    elif method == "bitmask":
        matched = _matching_bitmask(W)
    elif method == "assignment":
        rows, cols = linear_sum_assignment(W, maximize=True)
        matched = int(W[rows, cols].sum())
    else:
        raise ValueError(f"unknown method {method!r}")
    return matched / n


@dataclass(frozen=True)
class MetricReport:
    n: int
    homogeneity: float | None = None
    completeness: float | None = None
    v_measure: float | None = None
    silhouette: float | None = None
    inertia: float | None = None
    accuracy: float | None = None

    @classmethod
    def build(cls, matrix, assignments, labels=None, inertia=None):
        X = as_matrix(matrix)
        kw = {"n": int(X.shape[0]), "inertia": inertia}
        if len(np.unique(assignments)) >= 2:
            kw["silhouette"] = silhouette(X, assignments).mean
        if labels is not None:
            table = contingency(labels, assignments)
            s = external_scores(table)
            kw.update(
                homogeneity=s.homogeneity,
                completeness=s.completeness,
                v_measure=s.v_measure,
                accuracy=best_match_accuracy(table),
            )
        return cls(**kw)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def linkage_comparison(matrix, labels, k):
    """``[(linkage, ExternalScores), ...]`` for every supported linkage."""
    if labels is None:
        raise ClusterValError("linkage comparison needs class labels")
    X = as_matrix(matrix)
    out = []
    for name in LINKAGES:
        assignments = cut_by_count(agglomerate(X, name), k)
        out.append((name, external_scores(contingency(labels, assignments))))
    return out
