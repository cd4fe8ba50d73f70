"""Independent brute-force reference implementations.

Everything here is written with plain Python loops over vertices and radii
and shares no code with the package, so agreement is meaningful.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np


def bfs_distances(n, edges):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    dist = np.full((n, n), -1, dtype=int)
    for s in range(n):
        dist[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if dist[s, v] < 0:
                    dist[s, v] = dist[s, u] + 1
                    queue.append(v)
    return dist


def ball(dist, v, r):
    return [u for u in range(len(dist)) if dist[v][u] <= r]


def doubling(dist):
    """Supremum over vertices and radii on a quarter-integer grid."""
    n = len(dist)
    diam = int(max(max(row) for row in dist))
    best = 1.0
    for v in range(n):
        for k in range(1, 4 * diam + 1):
            r = k / 4
            best = max(best, len(ball(dist, v, 2 * r)) / len(ball(dist, v, r)))
    return best


def ap_constant(dist, w, p):
    n = len(dist)
    diam = int(max(max(row) for row in dist))
    best = 0.0
    for v in range(n):
        for r in range(diam + 1):
            b = ball(dist, v, r)
            avg = sum(w[u] for u in b) / len(b)
            if p == 1:
                val = avg / min(w[u] for u in b)
            else:
                dual = sum(w[u] ** (-1 / (p - 1)) for u in b) / len(b)
                val = avg * dual ** (p - 1)
            best = max(best, val)
    return best


def weighted_norm(c, p, w):
    return sum(abs(x) ** p * y for x, y in zip(c, w)) ** (1 / p)


def profile(a, dist):
    """``h[k]`` = max |a(i, j)| over pairs with distance at least ``k``."""
    n = len(dist)
    diam = int(max(max(row) for row in dist))
    h = []
    for k in range(diam + 1):
        h.append(max(abs(a[i][j]) for i in range(n) for j in range(n) if dist[i][j] >= k))
    return h


def beurling(a, dist, r, alpha, d):
    h = profile(a, dist)
    if math.isinf(r):
        return max(h[k] * (k + 1) ** alpha for k in range(len(h)))
    return sum(h[k] ** r * (k + 1) ** (alpha * r + d - 1) for k in range(len(h))) ** (1 / r)


def fusion(b, members, dist, N, r, alpha, sd):
    """Fusion-set norm with distance thresholds ``k (N + 1)``."""
    m = len(members)
    md = [[dist[members[i]][members[j]] for j in range(m)] for i in range(m)]
    top = max(max(row) for row in md)
    h = []
    k = 0
    while k * (N + 1) <= top:
        h.append(max(abs(b[i][j]) for i in range(m) for j in range(m) if md[i][j] >= k * (N + 1)))
        k += 1
    if math.isinf(r):
        return max(h[k] * (k + 1) ** alpha for k in range(len(h)))
    return sum(h[k] ** r * (k + 1) ** (alpha * r + sd - 1) for k in range(len(h))) ** (1 / r)


def greedy_disjoint(dist, N, start=0):
    """Greedy maximal N-disjoint set scanning vertices by (distance to start, index)."""
    n = len(dist)
    order = sorted(range(n), key=lambda v: (dist[start][v], v))
    chosen = []
    for v in order:
        if all(dist[v][u] > 2 * N for u in chosen):
            chosen.append(v)
    return chosen


def conjugated(a, w, p):
    a = np.asarray(a, float)
    s = np.asarray(w, float) ** (1 / p)
    return (s[:, None] * a) / s[None, :]
