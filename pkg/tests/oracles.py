"""Straight-line reference implementations used only by the tests.

These deliberately avoid the package's own code paths: plain loops, dense
linear solves and polynomial fits.
"""
import math

import numpy as np


def pagerank_dense(adj, d=0.85):
    """Solve (I - d M) r = (1 - d)/n 1 where M includes uniform dangling jumps."""
    adj = np.asarray(adj, dtype=float)
    n = adj.shape[0]
    m = np.zeros((n, n))
    for i in range(n):
        out = adj[i].sum()
        for j in range(n):
            m[j, i] = adj[i, j] / out if out > 0 else 1.0 / n
    r = np.linalg.solve(np.eye(n) - d * m, np.full(n, (1 - d) / n))
    return r / r.sum()


def map_all_bruteforce(sim, labels, q):
    sim = np.asarray(sim)
    n = len(labels)
    rows = []
    for i in range(n):
        ranked = sorted((j for j in range(n) if j != i), key=lambda j: (-sim[i][j], j))[:q]
        rows.append([j if labels[j] == labels[i] else -1 for j in ranked])
    return np.array(rows)


def savgol_lstsq(y, window, degree, deriv=0):
    """Polynomial least-squares per window; edge points use the outermost window."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    h = window // 2
    out = np.empty(n)
    for i in range(n):
        start = min(max(i - h, 0), n - window)
        xs = np.arange(start, start + window) - i
        coef = np.polyfit(xs, y[start:start + window], degree)
        poly = np.poly1d(coef)
        out[i] = poly.deriv(deriv)(0.0) if deriv else poly(0.0)
    return out


def similarity(a, b, metric):
    if metric == "euclidean":
        return 1.0 / (1.0 + math.dist(a, b))
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def degree_scores(adj):
    n = len(adj)
    links = set()
    for i in range(n):
        for j in range(n):
            if adj[i][j]:
                links.add(frozenset((i, j)))
    deg = [0] * n
    for link in links:
        for v in link:
            deg[v] += 1
    total = sum(deg)
    return [1.0 / n] * n if total == 0 else [d / total for d in deg]


def classify_literal(y, train, labels, importance, metric, gamma, q_test):
    """Score each class as sum(I_j * s(y, j)**gamma) over the q_test nearest links."""
    sims = [(similarity(y, x, metric), j) for j, x in enumerate(train)]
    links = sorted(sims, key=lambda t: (-t[0], t[1]))[:q_test]
    classes = sorted(set(labels))
    best = None
    for pos, c in enumerate(classes):
        mine = [(s, j) for s, j in links if labels[j] == c]
        score = sum(importance[j] * s ** gamma for s, j in mine)
        mean = sum(s for s, _ in mine) / len(mine) if mine else -math.inf
        key = (score, mean, -pos)
        if best is None or key > best[0]:
            best = (key, c)
    return best[1]
