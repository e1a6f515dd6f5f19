"""CSV ingestion, labeled datasets, seeded train/test splits and class counts.

Splits shuffle row indices with Fisher-Yates driven by the raw 64-bit output
stream of numpy's PCG64 bit generator (seeded through ``SeedSequence``).
Bit-generator streams are covered by numpy's stream-compatibility policy, so
a given ``(n_rows, test_fraction, seed)`` produces the same partition on
every platform and numpy release.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .errors import (
    ClusterValError,
    CSVParseError,
    LabelColumnError,
    NonFiniteError,
    NonNumericCellError,
    SplitError,
)

__all__ = [
    "LabeledDataset",
    "SplitSpec",
    "as_matrix",
    "class_counts",
    "format_class_counts",
    "load_csv",
    "load_iris",
    "shuffled_indices",
    "train_test_split",
]


def as_matrix(values, name="matrix", min_rows=1):
    """Return ``values`` as a read-only, finite, 2-D float64 array."""
    X = np.array(values, dtype=np.float64)
    if X.ndim != 2:
        raise ClusterValError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < min_rows or X.shape[1] < 1:
        raise ClusterValError(f"{name} must have at least one row and one column")
    if not np.isfinite(X).all():
        raise NonFiniteError(f"{name} contains NaN or infinite values")
    X.flags.writeable = False
    return X


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus optional per-row class names.

    ``row_ids`` records each row's position in the originally loaded file so
    that split subsets can be traced back to their source rows. An empty
    dataset (zero rows) is allowed so a split may have an empty test part.
    """

    matrix: np.ndarray
    labels: tuple[str, ...] | None = None
    feature_names: tuple[str, ...] = ()
    label_name: str | None = None
    row_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        X = as_matrix(self.matrix, min_rows=0)
        object.__setattr__(self, "matrix", X)
        n, d = X.shape
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != n:
                raise ClusterValError(
                    f"label count {len(labels)} does not match row count {n}"
                )
            object.__setattr__(self, "labels", labels)
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names", tuple(f"x{j}" for j in range(d))
            )
        elif len(self.feature_names) != d:
            raise ClusterValError("feature_names length must equal column count")
        if not self.row_ids and n:
            object.__setattr__(self, "row_ids", tuple(range(n)))
        elif len(self.row_ids) != n:
            raise ClusterValError("row_ids length must equal row count")

    @property
    def n_rows(self):
        return self.matrix.shape[0]

    @property
    def n_cols(self):
        return self.matrix.shape[1]

    @property
    def classes(self):
        """Sorted distinct class names, or ``None`` when unlabeled."""
        if self.labels is None:
            return None
        return tuple(sorted(set(self.labels)))

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.intp).reshape(-1)
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in idx)
        return LabeledDataset(
            matrix=self.matrix[idx],
            labels=labels,
            feature_names=self.feature_names,
            label_name=self.label_name,
            row_ids=tuple(self.row_ids[i] for i in idx),
        )

    def with_matrix(self, matrix, feature_names=None):
        """Copy with replaced features (e.g. after scaling); labels kept."""
        return LabeledDataset(
            matrix=matrix,
            labels=self.labels,
            feature_names=tuple(feature_names) if feature_names else (
                self.feature_names if np.shape(matrix)[1] == self.n_cols else ()
            ),
            label_name=self.label_name,
            row_ids=self.row_ids,
        )


def _resolve_label_column(header, label_column):
    if label_column is None:
        return None
    if isinstance(label_column, (int, np.integer)) and not isinstance(label_column, bool):
        idx = int(label_column)
        if -len(header) <= idx < len(header):
            return idx % len(header)
        raise LabelColumnError(
            f"label column index {idx} out of range for {len(header)} columns"
        )
    name = str(label_column)
    if name in header:
        return header.index(name)
    if name.lstrip("-").isdigit():
        return _resolve_label_column(header, int(name))
    raise LabelColumnError(
        f"label column {name!r} not found; available: {', '.join(header)}"
    )


def load_csv(text, label_column=None):
    """Parse CSV text (or a text stream) with a header row.

    Every column other than ``label_column`` must hold finite reals. Empty
    cells are rejected rather than imputed.
    """
    if not isinstance(text, str):
        text = text.read()
    reader = csv.reader(io.StringIO(text), strict=True)
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise CSVParseError(f"malformed CSV: {exc}", row=max(reader.line_num - 1, 0)) from None
    rows = [r for r in rows if r != []]
    if not rows:
        raise CSVParseError("empty CSV: a header row is required", row=0)
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CSVParseError("duplicate column names in header", row=0)
    body = rows[1:]
    if not body:
        raise CSVParseError("CSV has a header but no data rows", row=1)
    label_idx = _resolve_label_column(header, label_column)
    feature_idx = [j for j in range(len(header)) if j != label_idx]
    if not feature_idx:
        raise ClusterValError("CSV has no feature columns besides the label column")

    values = np.empty((len(body), len(feature_idx)), dtype=np.float64)
    labels = [] if label_idx is not None else None
    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise CSVParseError(
                f"expected {len(header)} fields, found {len(row)}", row=i
            )
        for out_j, j in enumerate(feature_idx):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"non-numeric value {cell!r} in column {header[j]!r}",
                    row=i,
                    column=j,
                ) from None
            if not math.isfinite(v):
                raise NonNumericCellError(
                    f"non-finite value {cell!r} in column {header[j]!r}",
                    row=i,
                    column=j,
                )
            values[i - 1, out_j] = v
        if labels is not None:
            label = row[label_idx].strip()
            if not label:
                raise CSVParseError("missing label", row=i, column=label_idx)
            labels.append(label)

    return LabeledDataset(
        matrix=values,
        labels=tuple(labels) if labels is not None else None,
        feature_names=tuple(header[j] for j in feature_idx),
        label_name=header[label_idx] if label_idx is not None else None,
    )


def load_iris():
    """The bundled 150-row IRIS fixture, labeled by ``species``."""
    text = resources.files("clusterval").joinpath("fixtures/iris.csv").read_text("utf-8")
    return load_csv(text, label_column="species")


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise SplitError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise SplitError(f"seed must be an unsigned integer, got {self.seed}")

    def n_train(self, n_rows):
        return math.floor(n_rows * (1.0 - self.test_fraction) + 0.5)


def _bounded(draw, m):
    # Unbiased integer in [0, m) from 64-bit words by rejection.
    limit = (1 << 64) - ((1 << 64) % m)
    while True:
        r = int(draw())
        if r < limit:
            return r % m


def shuffled_indices(n, seed):
    """Fisher-Yates permutation of ``range(n)`` from a PCG64 raw stream."""
    draw = np.random.PCG64(seed).random_raw
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = _bounded(draw, i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def train_test_split(ds, spec):
    """Unstratified seeded split; train takes the first rows of the shuffle."""
    n = ds.n_rows
    n_train = spec.n_train(n)
    if n_train < 1:
        raise SplitError(
            f"test_fraction {spec.test_fraction} leaves no training rows out of {n}"
        )
    perm = shuffled_indices(n, spec.seed)
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:])


def class_counts(labels: Sequence[str]) -> list[tuple[str, int]]:
    """Distinct classes with their counts, sorted by class name."""
    if len(labels) == 0:
        raise ClusterValError("class_counts needs at least one label")
    counts = Counter(labels)
    return sorted(counts.items())


def format_class_counts(counts):
    """Plain-text class-count report for a training split."""
    names = " ".join(f"'{c}'" for c, _ in counts)
    nums = " ".join(str(n) for _, n in counts)
    lines = [
        f"Unique Values : [{names}]",
        f"Occurrence Count : [{nums}]",
        "Unique Values along with Count in the training data",
    ]
    lines += [f"{c} Occurs : {n} times" for c, n in counts]
    return "\n".join(lines) + "\n"
