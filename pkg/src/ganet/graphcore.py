"""Similarity graphs and importance-based classification.

Vertices are training spectra. Candidate neighbours come from the MapAll
table: each vertex's ``q`` most similar items, blanked wherever the class
differs. A binary genome picks which candidate edges exist, vertex
importance is measured on the resulting digraph, and a query is labelled by
the class collecting the most importance among the training vertices it
temporarily links to.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, ConvergenceError, DimensionError

METRICS = ("euclidean", "cosine")
MEASURES = ("degree", "pagerank")
EMPTY = -1


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    metric: str
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class MapMatrix:
    """Ranked candidate neighbours, ``entries[i, z]`` or ``EMPTY`` (-1)."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def q(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def valid(self) -> np.ndarray:
        return self.entries != EMPTY


@dataclass(eq=False)
class ClassGraph:
    """Directed graph decoded from a genome; ``adjacency[i, j]`` means i -> j."""

    adjacency: np.ndarray
    labels: tuple[str, ...]
    importance: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adjacency))]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())


@dataclass(frozen=True)
class ImportanceConfig:
    measure: str = "degree"
    pagerank_damping: float = 0.85
    pagerank_tol: float = 1e-10
    pagerank_max_iter: int = 1000
    gamma: float = 1.0
    q_test: int | None = None

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ConfigError(f"importance measure must be one of {MEASURES}, got {self.measure!r}")
        if not 0.0 < self.pagerank_damping < 1.0:
            raise ConfigError("pagerank_damping must lie in (0, 1)")
        if not self.pagerank_tol > 0:
            raise ConfigError("pagerank_tol must be positive")
        if self.pagerank_max_iter < 1:
            raise ConfigError("pagerank_max_iter must be at least 1")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.q_test is not None and self.q_test < 1:
            raise ConfigError("q_test must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "pagerank_damping": self.pagerank_damping,
            "pagerank_tol": self.pagerank_tol,
            "pagerank_max_iter": self.pagerank_max_iter,
            "gamma": self.gamma,
            "q_test": self.q_test,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImportanceConfig":
        return cls(**d)


# ------------------------------------------------------------------ similarity


def pairwise_similarity(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    """Similarity between every row of ``a`` and every row of ``b``.

    euclidean: ``1 / (1 + ||a - b||)``; cosine: normalised dot product.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if metric == "euclidean":
        return 1.0 / (1.0 + cdist(a, b, "euclidean"))
    if metric == "cosine":
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        if np.any(na == 0) or np.any(nb == 0):
            raise ValueError("cosine similarity is undefined for an all-zero row")
        s = (a / na[:, None]) @ (b / nb[:, None]).T
        return np.clip(s, -1.0, 1.0)
    raise ConfigError(f"unknown similarity metric {metric!r}; choose from {METRICS}")


def compute_similarity(ds, metric: str) -> SimilarityMatrix:
    """Full symmetric similarity matrix over the rows of ``ds``.

    ``ds`` may be a :class:`~ganet.spectra.SpectrumDataset` or a bare matrix.
    """
    x = np.asarray(getattr(ds, "samples", ds), dtype=float)
    ids = getattr(ds, "sample_ids", None) or [str(i) for i in range(x.shape[0])]
    if x.shape[0] < 2:
        raise ValueError("similarity needs at least two items")
    if metric == "cosine":
        zero = [ids[i] for i in np.flatnonzero(~np.any(x != 0, axis=1))]
        if zero:
            raise ValueError("cosine similarity undefined for all-zero sample(s): " + ", ".join(zero))
    s = pairwise_similarity(x, x, metric)
    s = 0.5 * (s + s.T)
    np.fill_diagonal(s, 1.0)
    s.flags.writeable = False
    return SimilarityMatrix(metric=metric, values=s)


# ---------------------------------------------------------------------- MapAll


def rank_neighbours(sim: np.ndarray, q: int) -> np.ndarray:
    """Indices of each row's ``q`` most similar other items.

    Descending similarity; ties go to the lower index; self excluded.
    """
    n = sim.shape[0]
    keyed = np.array(sim, dtype=float, copy=True)
    np.fill_diagonal(keyed, -np.inf)
    idx = np.arange(n)
    out = np.empty((n, q), dtype=np.int64)
    for i in range(n):
        # lexsort: last key is primary
        order = np.lexsort((idx, -keyed[i]))
        out[i] = order[:q]
    return out


def build_map_all(sim: SimilarityMatrix | np.ndarray, labels: Sequence, q: int) -> MapMatrix:
    """The MapAll candidate table: top-``q`` neighbours masked to the same class."""
    values = np.asarray(getattr(sim, "values", sim), dtype=float)
    n = values.shape[0]
    if len(labels) != n:
        raise ValueError("one label per item is required")
    if q < 1 or q >= n:
        raise ConfigError(f"q must satisfy 1 <= q <= n - 1 = {n - 1}, got {q}")
    top = rank_neighbours(values, q)
    lab = np.asarray([str(v) for v in labels])
    same = lab[top] == lab[:, None]
    entries = np.where(same, top, EMPTY)
    entries.flags.writeable = False
    return MapMatrix(entries=entries)


def decode(bits, map: MapMatrix, labels: Sequence) -> ClassGraph:
    """Turn a genome's edge bits into a :class:`ClassGraph` (no importance yet).

    Bits sitting over empty map slots have no effect.
    """
    bits = np.asarray(getattr(bits, "bits", bits))
    if bits.shape != map.shape:
        raise ValueError(f"genome shape {bits.shape} does not match map shape {map.shape}")
    n = map.n
    keep = (bits != 0) & map.valid
    rows, cols = np.nonzero(keep)
    adj = np.zeros((n, n), dtype=bool)
    adj[rows, map.entries[rows, cols]] = True
    return ClassGraph(adjacency=adj, labels=tuple(str(v) for v in labels))


# ------------------------------------------------------------------ importance


def degree_importance(g: ClassGraph) -> np.ndarray:
    """Undirected (deduplicated) degree, normalised to sum to one.

    An edgeless graph gets uniform scores.
    """
    n = g.n
    if n == 0:
        return np.zeros(0)
    und = g.adjacency | g.adjacency.T
    deg = und.sum(axis=1).astype(float)
    total = deg.sum()
    if total == 0:
        return np.full(n, 1.0 / n)
    return deg / total


def pagerank_importance(g: ClassGraph, cfg: ImportanceConfig | None = None) -> np.ndarray:
    """PageRank by power iteration over the directed edges.

    Uniform teleport; the mass of vertices without out-links is spread
    uniformly. Stops once the L1 change drops below ``cfg.pagerank_tol``.
    """
    cfg = cfg or ImportanceConfig(measure="pagerank")
    n = g.n
    if n == 0:
        return np.zeros(0)
    a = g.adjacency.astype(float)
    out = a.sum(axis=1)
    dangling = out == 0
    p = np.divide(a, out[:, None], out=np.zeros_like(a), where=~dangling[:, None])
    pt = p.T.copy()
    d = cfg.pagerank_damping
    r = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(cfg.pagerank_max_iter):
        nxt = d * (pt @ r) + (d * r[dangling].sum() + (1.0 - d)) / n
        nxt /= nxt.sum()
        residual = np.abs(nxt - r).sum()
        r = nxt
        if residual < cfg.pagerank_tol:
            return r
    raise ConvergenceError(
        f"PageRank did not converge in {cfg.pagerank_max_iter} iterations "
        f"(last L1 change {residual:.3e})",
        residual,
    )


def compute_importance(g: ClassGraph, cfg: ImportanceConfig) -> np.ndarray:
    if cfg.measure == "degree":
        return degree_importance(g)
    return pagerank_importance(g, cfg)


# -------------------------------------------------------------- classification


@dataclass(eq=False)
class ImportanceClassifier:
    """Trained graph ready to label queries.

    Holds the preprocessed training matrix, its labels, the per-vertex
    importance and the settings that govern query insertion.
    """

    train_samples: np.ndarray
    train_labels: tuple[str, ...]
    importance: np.ndarray
    metric: str = "euclidean"
    gamma: float = 1.0
    q_test: int = 3
    classes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.train_samples = np.asarray(self.train_samples, dtype=float)
        self.train_labels = tuple(str(v) for v in self.train_labels)
        self.importance = np.asarray(self.importance, dtype=float)
        if not self.classes:
            self.classes = tuple(sorted(set(self.train_labels)))
        if not 1 <= self.q_test <= len(self.train_labels):
            raise ConfigError(
                f"q_test must lie in [1, {len(self.train_labels)}], got {self.q_test}"
            )


@dataclass(frozen=True, eq=False)
class QueryLinks:
    """Fixed part of query scoring: who each query links to and how strongly.

    ``linked[m]`` holds the ``q_test`` training vertices most similar to query
    ``m`` (ties to the lower index), ``weight`` their ``similarity**gamma``,
    ``onehot[m, k, c]`` marks the class of each link and ``mean_sim[m, c]`` is
    the mean link similarity into class ``c`` (``-inf`` without links).
    """

    linked: np.ndarray
    weight: np.ndarray
    onehot: np.ndarray
    mean_sim: np.ndarray

    def scores(self, importance: np.ndarray) -> np.ndarray:
        """``scores[m, c]``: summed ``importance * similarity**gamma`` into class ``c``."""
        return np.einsum("mk,mkc->mc", importance[self.linked] * self.weight, self.onehot)

    def predict(self, importance: np.ndarray) -> np.ndarray:
        return pick_indices(self.scores(importance), self.mean_sim)


def link_queries(sim: np.ndarray, train_labels: Sequence[str], classes: Sequence[str],
                 gamma: float, q_test: int) -> QueryLinks:
    """Temporarily attach each query row of ``sim`` to its most similar vertices."""
    sim = np.atleast_2d(sim)
    order = np.argsort(-sim, axis=1, kind="stable")
    linked = order[:, :q_test]
    s = np.take_along_axis(sim, linked, axis=1)
    index = {c: k for k, c in enumerate(classes)}
    link_cls = np.array([index[lab] for lab in train_labels])[linked]
    onehot = (link_cls[..., None] == np.arange(len(classes))).astype(float)
    hits = onehot.sum(axis=1)
    total = np.einsum("mk,mkc->mc", s, onehot)
    mean_sim = np.where(hits > 0, total / np.maximum(hits, 1), -np.inf)
    return QueryLinks(linked=linked, weight=np.power(s, gamma), onehot=onehot, mean_sim=mean_sim)


def pick_indices(scores: np.ndarray, mean_sim: np.ndarray) -> np.ndarray:
    """Row-wise argmax of ``scores``.

    Ties go to the class with the higher mean link similarity, then to the
    earlier class.
    """
    best = scores.max(axis=1, keepdims=True)
    key = np.where(scores == best, mean_sim, np.nan)
    return np.nanargmax(key, axis=1)


def pick_labels(scores: np.ndarray, mean_sim: np.ndarray, classes: Sequence[str]) -> list[str]:
    return [classes[c] for c in pick_indices(scores, mean_sim)]


def classify_batch(Y: np.ndarray, model) -> tuple[list[str], np.ndarray]:
    """Label every row of ``Y``; returns ``(labels, scores)``."""
    clf = as_classifier(model)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != clf.train_samples.shape[1]:
        raise DimensionError(
            f"query has {Y.shape[1]} features, training data has {clf.train_samples.shape[1]}"
        )
    sim = pairwise_similarity(Y, clf.train_samples, clf.metric)
    links = link_queries(sim, clf.train_labels, clf.classes, clf.gamma, clf.q_test)
    scores = links.scores(clf.importance)
    return pick_labels(scores, links.mean_sim, clf.classes), scores


def classify(y, model) -> tuple[str, dict[str, float]]:
    """Label a single spectrum row and return the per-class scores."""
    clf = as_classifier(model)
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionError("classify expects a single spectrum row")
    labels, scores = classify_batch(y[None, :], clf)
    return labels[0], {c: float(v) for c, v in zip(clf.classes, scores[0])}


def as_classifier(model) -> ImportanceClassifier:
    if isinstance(model, ImportanceClassifier):
        return model
    to_clf = getattr(model, "classifier", None)
    if to_clf is None:
        raise TypeError(f"cannot classify with {type(model).__name__}")
    return to_clf()
