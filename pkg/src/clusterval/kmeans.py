"""Lloyd's k-means with k-means++ or random-point seeding.

Randomness comes from numpy ``Generator(PCG64)`` instances. Each restart
gets its own child ``SeedSequence`` spawned from the configured seed, and
per-k runs in :func:`inertia_curve` use ``SeedSequence([seed, k])``, so
results never depend on the order in which restarts or k values run.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dataset import as_matrix
from .errors import DimensionMismatchError, InvalidParameterError

__all__ = [
    "INIT_METHODS",
    "KMeansConfig",
    "KMeansModel",
    "derive_seed",
    "detect_knee",
    "fit_kmeans",
    "inertia_curve",
    "kmeanspp_init",
    "mean_wss",
    "predict",
    "random_init",
    "squared_distances",
]

INIT_METHODS = ("k-means++", "random")


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    init: str = "k-means++"
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.init not in INIT_METHODS:
            raise InvalidParameterError(
                f"init must be one of {', '.join(INIT_METHODS)}, got {self.init!r}"
            )
        if self.k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {self.k}")
        if self.n_init < 1:
            raise InvalidParameterError(f"n_init must be >= 1, got {self.n_init}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol >= 0:
            raise InvalidParameterError(f"tol must be >= 0, got {self.tol}")
        if self.seed < 0:
            raise InvalidParameterError(f"seed must be unsigned, got {self.seed}")


@dataclass(frozen=True)
class KMeansModel:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    config: KMeansConfig
    # Inertia after every assignment step of the winning restart.
    inertia_history: tuple[float, ...] = ()

    @property
    def k(self):
        return self.centroids.shape[0]

    def to_dict(self):
        return {
            "centroids": self.centroids.tolist(),
            "assignments": [int(a) for a in self.assignments],
            "inertia": float(self.inertia),
            "n_iter": int(self.n_iter),
            "config": asdict(self.config),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data):
        return cls(
            centroids=np.asarray(data["centroids"], dtype=np.float64),
            assignments=np.asarray(data["assignments"], dtype=np.intp),
            inertia=float(data["inertia"]),
            n_iter=int(data["n_iter"]),
            config=KMeansConfig(**data["config"]),
        )


def derive_seed(seed, k):
    """Seed for the run at cluster count ``k`` (a 63-bit integer)."""
    state = np.random.SeedSequence([int(seed), int(k)]).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def squared_distances(X, centroids):
    """n x k matrix of squared Euclidean distances (direct differences)."""
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _check_k(k, n):
    if not 1 <= k <= n:
        raise InvalidParameterError(f"k must be in [1, {n}], got {k}")


def kmeanspp_init(matrix, k, rng):
    """Pick ``k`` rows as centers: first uniformly, then with probability
    proportional to squared distance from the nearest chosen center.

    When every remaining squared distance is zero (duplicate rows), the next
    center is drawn uniformly from rows not chosen yet.
    """
    X = as_matrix(matrix)
    n = X.shape[0]
    _check_k(k, n)
    chosen = [int(rng.integers(n))]
    closest = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            cumulative = np.cumsum(closest)
            r = rng.random() * cumulative[-1]
            idx = int(np.searchsorted(cumulative, r, side="right"))
            idx = min(idx, n - 1)
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((X - X[idx]) ** 2, axis=1))
    return X[chosen].copy()


def random_init(matrix, k, rng):
    X = as_matrix(matrix)
    _check_k(k, X.shape[0])
    idx = rng.choice(X.shape[0], size=k, replace=False)
    return X[np.sort(idx)].copy()


def _assign(X, centroids):
    d2 = squared_distances(X, centroids)
    labels = np.argmin(d2, axis=1)
    best = d2[np.arange(X.shape[0]), labels]
    return labels, best


def _repair_empty(X, centroids, labels, best):
    """Reseed each empty cluster at the point farthest from its centroid."""
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        candidates = np.where(movable, best, -1.0)
        i = int(np.argmax(candidates))
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        centroids[j] = X[i]
        best[i] = 0.0
    return labels, best


def _update(X, labels, k):
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=k)
    return sums / counts[:, None]


def _lloyd(X, centroids, max_iter, tol):
    k = centroids.shape[0]
    centroids = centroids.copy()
    labels, best = _assign(X, centroids)
    labels, best = _repair_empty(X, centroids, labels, best)
    inertia = float(best.sum())
    history = [inertia]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        prev_centroids = centroids
        centroids = _update(X, labels, k)
        new_labels, best = _assign(X, centroids)
        new_labels, best = _repair_empty(X, centroids, new_labels, best)
        new_inertia = float(best.sum())
        if new_inertia > inertia:
            # Only rounding in the means can do this; treat it as converged.
            centroids = prev_centroids
            break
        history.append(new_inertia)
        unchanged = np.array_equal(new_labels, labels)
        prev = inertia
        labels, inertia = new_labels, new_inertia
        if unchanged or prev - inertia <= tol * prev:
            break
    return centroids, labels, inertia, n_iter, history


def fit_kmeans(config, matrix):
    """Best of ``config.n_init`` Lloyd runs, by inertia (ties: first restart)."""
    X = as_matrix(matrix)
    _check_k(config.k, X.shape[0])
    init = kmeanspp_init if config.init == "k-means++" else random_init
    best = None
    children = np.random.SeedSequence(config.seed).spawn(config.n_init)
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        result = _lloyd(X, init(X, config.k, rng), config.max_iter, config.tol)
        if best is None or result[2] < best[2]:
            best = result
    centroids, labels, inertia, n_iter, history = best
    centroids.flags.writeable = False
    labels = labels.astype(np.intp)
    labels.flags.writeable = False
    return KMeansModel(
        centroids=centroids,
        assignments=labels,
        inertia=inertia,
        n_iter=n_iter,
        config=config,
        inertia_history=tuple(history),
    )


def predict(model, matrix):
    """Nearest-centroid index per row; ties go to the lowest index."""
    X = as_matrix(matrix)
    if X.shape[1] != model.centroids.shape[1]:
        raise DimensionMismatchError(
            f"model has {model.centroids.shape[1]} features, got {X.shape[1]}"
        )
    return _assign(X, model.centroids)[0].astype(np.intp)


def mean_wss(model, matrix):
    """Per-cluster mean squared distance to the centroid, averaged over clusters."""
    X = as_matrix(matrix)
    d2 = np.sum((X - model.centroids[model.assignments]) ** 2, axis=1)
    k = model.k
    per_cluster = np.bincount(model.assignments, weights=d2, minlength=k)
    sizes = np.bincount(model.assignments, minlength=k)
    nonempty = sizes > 0
    return float(np.mean(per_cluster[nonempty] / sizes[nonempty]))


def inertia_curve(matrix, k_values, config):
    """``[(k, inertia), ...]``; ``config`` supplies everything except ``k``
    and the per-k seed (derived from ``config.seed`` and ``k``)."""
    X = as_matrix(matrix)
    out = []
    for k in k_values:
        cfg = replace(config, k=int(k), seed=derive_seed(config.seed, k))
        out.append((int(k), fit_kmeans(cfg, X).inertia))
    return out


def detect_knee(curve):
    """Interior k with the largest second difference of inertia.

    Ties go to the smaller k, so a perfectly linear curve returns the
    first interior point.
    """
    if len(curve) < 3:
        raise InvalidParameterError("knee detection needs at least 3 points")
    ks = [int(k) for k, _ in curve]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise InvalidParameterError("k values must be strictly increasing")
    vals = [float(v) for _, v in curve]
    best_k, best_d2 = None, None
    for i in range(1, len(vals) - 1):
        d2 = vals[i - 1] - 2.0 * vals[i] + vals[i + 1]
        if best_d2 is None or d2 > best_d2:
            best_k, best_d2 = ks[i], d2
    return best_k
