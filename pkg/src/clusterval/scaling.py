"""Feature scalers: standardization, min-max, max-abs, row unit-norm and PCA.

PCA is computed from the population covariance (denominator ``n``) with a
cyclic Jacobi eigensolver, so no LAPACK routine sits behind the projection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import as_matrix
from .errors import ClusterValError, DimensionMismatchError, InvalidParameterError, NotSymmetricError

__all__ = [
    "SCALER_KINDS",
    "ScalerModel",
    "eigh_jacobi",
    "fit_scaler",
    "fit_transform",
    "transform",
]

SCALER_KINDS = ("standardize", "minmax", "maxabs", "unitnorm", "pca")

_ARRAY_FIELDS = ("mean", "std", "min", "max", "max_abs", "components", "explained_variance")

_ALIASES = {
    "standard": "standardize",
    "standardization": "standardize",
    "zscore": "standardize",
    "min-max": "minmax",
    "max-abs": "maxabs",
    "normalizer": "unitnorm",
    "l2": "unitnorm",
}


def _canonical_kind(kind):
    k = str(kind).lower()
    k = _ALIASES.get(k, k)
    if k not in SCALER_KINDS:
        raise ClusterValError(
            f"unknown scaler {kind!r}; valid scalers: {', '.join(SCALER_KINDS)}"
        )
    return k


def eigh_jacobi(sym, tol=1e-12, max_sweeps=100, symmetry_tol=1e-9):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and eigenvectors as columns. Each eigenvector's largest-magnitude
    entry is made positive so the output is sign-deterministic.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol`` times the diagonal norm, or after ``max_sweeps``.
    """
    A = np.array(sym, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ClusterValError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ClusterValError("matrix contains non-finite values")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > symmetry_tol * scale:
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    A = 0.5 * (A + A.T)
    d = A.shape[0]
    V = np.eye(d)

    for _ in range(max_sweeps):
        diag = np.linalg.norm(np.diag(A))
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off == 0.0 or off < tol * diag:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                gap = A[q, q] - A[p, p]
                if abs(apq) < 1e-150 * abs(gap):
                    # Small-angle limit; forming theta would overflow.
                    t = apq / gap
                elif gap == 0.0:
                    t = 1.0
                else:
                    theta = gap / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation.
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    for j in range(d):
        i = np.argmax(np.abs(V[:, j]))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return w, V


@dataclass(frozen=True)
class ScalerModel:
    """Fitted scaler state. Only the statistics relevant to ``kind`` are set."""

    kind: str
    n_features: int
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    min: np.ndarray | None = None
    max: np.ndarray | None = None
    max_abs: np.ndarray | None = None
    components: np.ndarray | None = None  # d x k, orthonormal columns
    explained_variance: np.ndarray | None = None  # all d eigenvalues, descending
    n_components: int | None = None

    def __eq__(self, other):
        if not isinstance(other, ScalerModel):
            return NotImplemented
        if (self.kind, self.n_features, self.n_components) != (
            other.kind,
            other.n_features,
            other.n_components,
        ):
            return False
        for name in _ARRAY_FIELDS:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    __hash__ = None

    def output_names(self, feature_names):
        if self.kind == "pca":
            return tuple(f"pc{j + 1}" for j in range(self.n_components))
        return tuple(feature_names)

    def to_dict(self):
        out = {"kind": self.kind, "n_features": self.n_features}
        if self.n_components is not None:
            out["n_components"] = self.n_components
        for name in _ARRAY_FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = np.asarray(value).tolist()
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data):
        kwargs = {
            "kind": _canonical_kind(data["kind"]),
            "n_features": int(data["n_features"]),
            "n_components": data.get("n_components"),
        }
        for name in _ARRAY_FIELDS:
            if name in data:
                kwargs[name] = np.asarray(data[name], dtype=np.float64)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_scaler(kind, matrix, n_components=None):
    """Fit a scaler of the given kind (see ``SCALER_KINDS``) to ``matrix``."""
    kind = _canonical_kind(kind)
    X = as_matrix(matrix)
    n, d = X.shape
    if kind == "standardize":
        # Constant columns get an exact zero std; rounding in the mean would
        # otherwise leave a tiny positive value that inflates them to +-1.
        # The std is taken on columns divided by their max-abs so that squaring
        # tiny values cannot underflow.
        peak = np.abs(X).max(axis=0)
        peak = np.where(peak == 0, 1.0, peak)
        std = np.where(np.ptp(X, axis=0) == 0, 0.0, peak * (X / peak).std(axis=0))
        return ScalerModel(kind, d, mean=X.mean(axis=0), std=std)
    if kind == "minmax":
        return ScalerModel(kind, d, min=X.min(axis=0), max=X.max(axis=0))
    if kind == "maxabs":
        return ScalerModel(kind, d, max_abs=np.abs(X).max(axis=0))
    if kind == "unitnorm":
        return ScalerModel(kind, d)

    k = d if n_components is None else int(n_components)
    if not 1 <= k <= d:
        raise InvalidParameterError(f"n_components must be in [1, {d}], got {n_components}")
    if n < 2:
        raise ClusterValError("PCA needs at least two rows")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    w, V = eigh_jacobi(cov)
    return ScalerModel(
        kind,
        d,
        mean=mean,
        components=V[:, :k].copy(),
        explained_variance=w,
        n_components=k,
    )


def _safe_divide(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out


def transform(model, matrix):
    X = as_matrix(matrix)
    if X.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"model was fitted on {model.n_features} columns, got {X.shape[1]}"
        )
    kind = model.kind
    if kind == "standardize":
        den = np.broadcast_to(model.std, X.shape)
        Y = _safe_divide(X - model.mean, den)
    elif kind == "minmax":
        den = np.broadcast_to(model.max - model.min, X.shape)
        Y = _safe_divide(X - model.min, den)
    elif kind == "maxabs":
        scale = np.where(model.max_abs == 0, 1.0, model.max_abs)
        Y = X / scale
    elif kind == "unitnorm":
        # Divide by the row max first so squaring cannot underflow or overflow.
        peak = np.abs(X).max(axis=1, keepdims=True)
        R = X / np.where(peak == 0, 1.0, peak)
        norms = np.sqrt(np.sum(R * R, axis=1, keepdims=True))
        Y = R / np.where(norms == 0, 1.0, norms)
    else:
        Y = (X - model.mean) @ model.components
    Y.flags.writeable = False
    return Y


def fit_transform(kind, matrix, n_components=None):
    model = fit_scaler(kind, matrix, n_components=n_components)
    return model, transform(model, matrix)
