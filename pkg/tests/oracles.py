"""Slow, definition-level reference implementations used only by tests."""

import itertools
import math

import numpy as np


def naive_distance_matrix(X):
    n = len(X)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            D[i, j] = math.sqrt(sum((a - b) ** 2 for a, b in zip(X[i], X[j])))
    return D


def _cluster_distance(D, A, B, linkage, ca, cb):
    if linkage == "single":
        return min(D[i][j] for i in A for j in B)
    if linkage == "complete":
        return max(D[i][j] for i in A for j in B)
    if linkage == "average":
        return sum(D[i][j] for i in A for j in B) / (len(A) * len(B))
    na, nb = len(A), len(B)
    return math.sqrt(2.0 * na * nb / (na + nb)) * math.dist(ca, cb)


def naive_agglomerate(X, linkage):
    """O(n^3) agglomeration recomputing inter-cluster distances each step.

    Returns a list of ``(lo_id, hi_id, height, size)``.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    D = naive_distance_matrix(X).tolist()
    clusters = {i: [i] for i in range(n)}
    # Centroids are recomputed from the members whenever a cluster is formed.
    centroid = {i: tuple(X[i]) for i in range(n)}
    merges = []
    next_id = n
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(sorted(clusters), 2):
            d = _cluster_distance(D, clusters[a], clusters[b], linkage, centroid[a], centroid[b])
            key = (d, a, b)
            if best is None or key < best:
                best = key
        d, a, b = best
        members = clusters.pop(a) + clusters.pop(b)
        clusters[next_id] = members
        centroid[next_id] = tuple(X[members].mean(axis=0))
        merges.append((a, b, d, len(members)))
        next_id += 1
    return merges


def naive_silhouette(X, labels):
    X = np.asarray(X, dtype=float)
    labels = list(labels)
    n = len(X)
    D = naive_distance_matrix(X)
    out = []
    clusters = sorted(set(labels))
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(D[i, j] for j in own) / len(own)
        b = min(
            sum(D[i, j] for j in range(n) if labels[j] == c) / labels.count(c)
            for c in clusters
            if c != labels[i]
        )
        m = max(a, b)
        out.append(0.0 if m == 0 else (b - a) / m)
    return np.array(out)


def charpoly_eigenvalues(A, grid=200001):
    """Eigenvalues of a symmetric matrix from its characteristic polynomial.

    Coefficients come from the Faddeev-LeVerrier recursion; real roots are
    bracketed on a fine grid over the Gershgorin interval, then bisected.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    I = np.eye(d)
    c = 1.0
    for k in range(1, d + 1):
        M = A @ M + c * I
        c = -np.trace(A @ M) / k
        coeffs.append(c)

    def p(x):
        v = 0.0
        for co in coeffs:
            v = v * x + co
        return v

    radius = max(abs(A[i, i]) + sum(abs(A[i, j]) for j in range(d) if j != i) for i in range(d))
    xs = np.linspace(-radius - 1, radius + 1, grid)
    vals = [p(x) for x in xs]
    roots = []
    for i in range(grid - 1):
        if vals[i] == 0.0:
            roots.append(xs[i])
        elif vals[i] * vals[i + 1] < 0:
            lo, hi = xs[i], xs[i + 1]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if p(lo) * p(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            roots.append(0.5 * (lo + hi))
    return np.sort(np.array(roots))[::-1]


def best_two_partition(X):
    """Minimum within-cluster SSE over all 2-partitions (brute force)."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    best = None
    for mask in range(1, 2 ** (n - 1)):
        A = [i for i in range(n) if mask >> i & 1]
        B = [i for i in range(n) if not mask >> i & 1]
        sse = sum(float(((X[G] - X[G].mean(axis=0)) ** 2).sum()) for G in (A, B))
        if best is None or sse < best[0]:
            best = (sse, sorted(A), sorted(B))
    return best


def mst_prim(D):
    """Edges ``(i, j, w)`` of a minimum spanning tree of a dense distance matrix."""
    n = len(D)
    in_tree = [False] * n
    in_tree[0] = True
    best = [(D[0, j], 0) for j in range(n)]
    edges = []
    for _ in range(n - 1):
        j = min((k for k in range(n) if not in_tree[k]), key=lambda k: best[k][0])
        w, i = best[j]
        edges.append((i, j, w))
        in_tree[j] = True
        for k in range(n):
            if not in_tree[k] and D[j, k] < best[k][0]:
                best[k] = (D[j, k], j)
    return edges


def mst_path_max(edges, n, u, v):
    adj = {i: [] for i in range(n)}
    for i, j, w in edges:
        adj[i].append((j, w))
        adj[j].append((i, w))
    stack = [(u, -1, 0.0)]
    while stack:
        node, parent, mx = stack.pop()
        if node == v:
            return mx
        for nxt, w in adj[node]:
            if nxt != parent:
                stack.append((nxt, node, max(mx, w)))
    raise ValueError("disconnected")


def cophenetic(merges, n, u, v):
    """Height of the merge that first joins leaves ``u`` and ``v``."""
    members = {i: {i} for i in range(n)}
    for step, (a, b, h, _) in enumerate(merges):
        joined = members.pop(a) | members.pop(b)
        if u in joined and v in joined:
            return h
        members[n + step] = joined
    raise ValueError("leaves never joined")
