"""Agglomerative clustering with Lance-Williams updates, tree cuts and exports.

Ward runs on squared Euclidean distances; the reported merge height is the
square root of the Lance-Williams value, i.e. ``sqrt(2 * dSSE)`` where
``dSSE`` is the increase in within-cluster sum of squares caused by the
merge. Square the heights to recover the squared-scale values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import as_matrix
from .errors import ClusterValError, InvalidParameterError

__all__ = [
    "LINKAGES",
    "CondensedDistances",
    "Dendrogram",
    "Merge",
    "agglomerate",
    "cut_by_count",
    "cut_by_height",
    "leaf_order",
    "pairwise_distances",
    "suggest_cut",
    "to_newick",
    "to_svg",
]

LINKAGES = ("single", "complete", "average", "ward")


@dataclass(frozen=True)
class CondensedDistances:
    """Upper-triangle pairwise distances in row-major ``(i < j)`` order."""

    n: int
    values: np.ndarray

    def index(self, i, j):
        if i == j:
            raise IndexError("diagonal is implicit")
        if i > j:
            i, j = j, i
        return self.n * i - i * (i + 1) // 2 + (j - i - 1)

    def __call__(self, i, j):
        if i == j:
            return 0.0
        return float(self.values[self.index(i, j)])

    def square(self):
        D = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n, k=1)
        D[iu] = self.values
        return D + D.T


def pairwise_distances(matrix):
    X = as_matrix(matrix)
    n = X.shape[0]
    iu = np.triu_indices(n, k=1)
    diff = X[iu[0]] - X[iu[1]]
    values = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    values.flags.writeable = False
    return CondensedDistances(n, values)


class Merge(NamedTuple):
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge list; leaves are ``0..n-1`` and merge ``i`` creates node ``n+i``."""

    n_leaves: int
    merges: tuple[Merge, ...]
    linkage: str = ""

    @property
    def heights(self):
        return np.array([m.height for m in self.merges], dtype=np.float64)

    def to_dict(self):
        return {
            "n_leaves": self.n_leaves,
            "linkage": self.linkage,
            "merges": [[m.left, m.right, m.height, m.size] for m in self.merges],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data):
        merges = tuple(
            Merge(int(a), int(b), float(h), int(s)) for a, b, h, s in data["merges"]
        )
        return cls(int(data["n_leaves"]), merges, data.get("linkage", ""))


def _lance_williams(linkage, d_ki, d_kj, d_ij, n_i, n_j, n_k):
    """Distance from every cluster k to the union of clusters i and j."""
    if linkage == "single":
        return np.minimum(d_ki, d_kj)
    if linkage == "complete":
        return np.maximum(d_ki, d_kj)
    if linkage == "average":
        return (n_i * d_ki + n_j * d_kj) / (n_i + n_j)
    total = n_i + n_j + n_k
    return ((n_i + n_k) * d_ki + (n_j + n_k) * d_kj - n_k * d_ij) / total


def _row_nearest(D, a, node_id):
    """Nearest active partner of slot ``a``; ties go to the smaller node id."""
    row = D[a]
    m = row.min()
    if not np.isfinite(m):
        return np.inf, -1
    cand = np.flatnonzero(row == m)
    return m, int(cand[np.argmin(node_id[cand])])


def agglomerate(matrix, linkage):
    """Build the full merge tree for ``linkage`` (one of ``LINKAGES``).

    Each step merges the closest pair. Among equally close pairs the one
    with the lexicographically smallest ``(min node id, max node id)`` wins.
    Per-cluster nearest neighbours are cached and refreshed only for
    clusters whose neighbour took part in the merge.
    """
    if linkage not in LINKAGES:
        raise ClusterValError(
            f"unknown linkage {linkage!r}; valid linkages: {', '.join(LINKAGES)}"
        )
    X = as_matrix(matrix)
    n = X.shape[0]
    if n == 1:
        return Dendrogram(1, (), linkage)

    D = pairwise_distances(X).square()
    if linkage == "ward":
        D = D * D
    np.fill_diagonal(D, np.inf)

    node_id = np.arange(n)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    nn_dist = np.empty(n)
    nn_slot = np.empty(n, dtype=np.intp)
    for a in range(n):
        nn_dist[a], nn_slot[a] = _row_nearest(D, a, node_id)

    merges = []
    for step in range(n - 1):
        slots = np.flatnonzero(active)
        dists = nn_dist[slots]
        m = dists.min()
        tied = slots[dists == m]
        pairs = [
            (min(node_id[a], node_id[nn_slot[a]]), max(node_id[a], node_id[nn_slot[a]]), a)
            for a in tied
        ]
        lo, hi, a = min(pairs)
        b = int(nn_slot[a])
        # The merged cluster lives in the lower slot; the other slot retires.
        keep, drop = (a, b) if a < b else (b, a)

        height = float(np.sqrt(m)) if linkage == "ward" else float(m)
        new_size = size[keep] + size[drop]
        merges.append(Merge(int(lo), int(hi), height, int(new_size)))

        new_row = _lance_williams(
            linkage, D[keep], D[drop], D[keep, drop], size[keep], size[drop], size
        )
        active[drop] = False
        new_row[~active] = np.inf
        new_row[keep] = np.inf
        D[keep, :] = new_row
        D[:, keep] = new_row
        D[drop, :] = np.inf
        D[:, drop] = np.inf
        size[keep] = new_size
        node_id[keep] = n + step

        if step == n - 2:
            break
        nn_dist[keep], nn_slot[keep] = _row_nearest(D, keep, node_id)
        for c in np.flatnonzero(active):
            if c == keep:
                continue
            if nn_slot[c] in (keep, drop):
                nn_dist[c], nn_slot[c] = _row_nearest(D, c, node_id)
            elif D[c, keep] < nn_dist[c]:
                nn_dist[c], nn_slot[c] = D[c, keep], keep

    return Dendrogram(n, tuple(merges), linkage)


def _components(dend, n_merges):
    n = dend.n_leaves
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, m in enumerate(dend.merges[:n_merges]):
        parent[find(m.left)] = n + i
        parent[find(m.right)] = n + i
    roots = [find(leaf) for leaf in range(n)]
    # Number clusters by their smallest leaf id.
    numbering = {}
    out = np.empty(n, dtype=np.intp)
    for leaf, root in enumerate(roots):
        if root not in numbering:
            numbering[root] = len(numbering)
        out[leaf] = numbering[root]
    return out


def cut_by_count(dend, k):
    """Cluster index per leaf after undoing the last ``k - 1`` merges."""
    n = dend.n_leaves
    if not 1 <= k <= n:
        raise InvalidParameterError(f"k must be in [1, {n}], got {k}")
    return _components(dend, n - k)


def cut_by_height(dend, h):
    """Clusters joined by every merge at height ``<= h``."""
    if not h >= 0:
        raise InvalidParameterError(f"cut height must be >= 0, got {h}")
    above = np.flatnonzero(dend.heights > h)
    n_merges = int(above[0]) if above.size else len(dend.merges)
    return _components(dend, n_merges)


def suggest_cut(dend):
    """Cut height in the middle of the widest gap between consecutive merges.

    Returns ``(height, n_clusters)``. The earliest gap wins ties. With a
    single merge the gap is measured from zero.
    """
    n = dend.n_leaves
    if n < 2:
        raise InvalidParameterError("suggest_cut needs at least two leaves")
    heights = dend.heights
    if len(heights) == 1:
        return float(heights[0] / 2.0), 2
    gaps = np.diff(heights)
    i = int(np.argmax(gaps))
    cut = float((heights[i] + heights[i + 1]) / 2.0)
    return cut, n - (i + 1)


def _children(dend):
    n = dend.n_leaves
    return {n + i: (m.left, m.right) for i, m in enumerate(dend.merges)}


def leaf_order(dend):
    """Leaves left to right as drawn (left subtree before right)."""
    n = dend.n_leaves
    if n == 1:
        return [0]
    children = _children(dend)
    order, stack = [], [2 * n - 2]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            left, right = children[node]
            stack.append(right)
            stack.append(left)
    return order


def _fmt(x):
    return f"{x:.10g}"


def to_newick(dend, leaf_names=None):
    """Newick string; branch length = parent height - child height."""
    n = dend.n_leaves
    names = [str(i) for i in range(n)] if leaf_names is None else [str(s) for s in leaf_names]
    if len(names) != n:
        raise ClusterValError("leaf_names length must equal n_leaves")
    if n == 1:
        return f"{names[0]};"
    height = {leaf: 0.0 for leaf in range(n)}
    text = dict(enumerate(names))
    for i, m in enumerate(dend.merges):
        node = n + i
        height[node] = m.height
        parts = [f"{text.pop(c)}:{_fmt(m.height - height[c])}" for c in (m.left, m.right)]
        text[node] = "(" + ",".join(parts) + ")"
    return text[2 * n - 2] + ";"


def to_svg(dend, cut_height=None, width=800, height=400, margin=40, leaf_names=None):
    """Standalone SVG drawing of the dendrogram with an optional cut line."""
    n = dend.n_leaves
    order = leaf_order(dend)
    pos = {leaf: i for i, leaf in enumerate(order)}
    top = max([m.height for m in dend.merges] + [cut_height or 0.0, 1e-12])
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    step = plot_w / max(n, 1)

    def xof(node):
        return margin + (x_of[node] + 0.5) * step

    def yof(h):
        return margin + plot_h * (1.0 - h / top)

    x_of = {leaf: float(pos[leaf]) for leaf in range(n)}
    h_of = {leaf: 0.0 for leaf in range(n)}
    lines = []
    for i, m in enumerate(dend.merges):
        node = n + i
        x_of[node] = (x_of[m.left] + x_of[m.right]) / 2.0
        h_of[node] = m.height
        xl, xr = xof(m.left), xof(m.right)
        yl, yr, ym = yof(h_of[m.left]), yof(h_of[m.right]), yof(m.height)
        lines.append(
            f'<path d="M{xl:.2f},{yl:.2f} V{ym:.2f} H{xr:.2f} V{yr:.2f}" '
            'fill="none" stroke="#1f3b73" stroke-width="1"/>'
        )
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
    ]
    for t in np.linspace(0.0, top, 5):
        y = yof(t)
        out.append(
            f'<text x="{margin - 4}" y="{y:.2f}" font-size="10" text-anchor="end">{t:.3g}</text>'
        )
    out.extend(lines)
    if leaf_names is not None and n <= 200:
        for leaf in order:
            out.append(
                f'<text x="{xof(leaf):.2f}" y="{height - margin + 12}" font-size="6" '
                f'text-anchor="middle">{leaf_names[leaf]}</text>'
            )
    if cut_height is not None:
        y = yof(cut_height)
        out.append(
            f'<line x1="{margin}" y1="{y:.2f}" x2="{width - margin}" y2="{y:.2f}" '
            'stroke="#c0392b" stroke-dasharray="6,4"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
