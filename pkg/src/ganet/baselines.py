"""kNN-graph baseline, evaluation metrics and a synthetic spectra generator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import graphcore
from .graphcore import ClassGraph, ImportanceClassifier, ImportanceConfig
from .spectra import SpectrumDataset

POSITIVE_LABEL = "ASD"
NEGATIVE_LABEL = "control"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int
    positive_label: str = POSITIVE_LABEL

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "positive_label": self.positive_label}


class Metrics(NamedTuple):
    accuracy: float
    sensitivity: float
    specificity: float
    h_mean: float


def confusion_counts(y_true: Sequence[str], y_pred: Sequence[str],
                     positive_label: str = POSITIVE_LABEL) -> ConfusionCounts:
    """One-vs-rest counts with ``positive_label`` as the positive class."""
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    t = np.asarray(y_true) == positive_label
    p = np.asarray(y_pred) == positive_label
    return ConfusionCounts(
        tp=int(np.sum(t & p)),
        fp=int(np.sum(~t & p)),
        tn=int(np.sum(~t & ~p)),
        fn=int(np.sum(t & ~p)),
        positive_label=positive_label,
    )


def harmonic_mean3(acc: float, sens: float, spec: float) -> float:
    """Harmonic mean of three rates; zero if any of them is zero."""
    if acc <= 0 or sens <= 0 or spec <= 0:
        return 0.0
    return 3.0 / (1.0 / acc + 1.0 / sens + 1.0 / spec)


def metrics(counts: ConfusionCounts) -> Metrics:
    total = counts.total
    if total == 0:
        raise ValueError("cannot compute metrics over zero evaluated items")
    acc = (counts.tp + counts.tn) / total
    pos = counts.tp + counts.fn
    neg = counts.tn + counts.fp
    sens = counts.tp / pos if pos else 0.0
    spec = counts.tn / neg if neg else 0.0
    return Metrics(acc, sens, spec, harmonic_mean3(acc, sens, spec))


# ------------------------------------------------------------------- kNN graph


def knn_graph(train: SpectrumDataset, k: int, metric: str = "euclidean") -> ClassGraph:
    """Directed class-constrained kNN graph.

    Each vertex points at those of its ``k`` nearest items (ties to the lower
    index) that share its label.
    """
    n = train.n_samples
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    sim = np.array(graphcore.compute_similarity(train, metric).values)
    np.fill_diagonal(sim, -np.inf)
    labels = np.asarray(train.labels)
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        near = np.argsort(-sim[i], kind="stable")[:k]
        adj[i, near[labels[near] == labels[i]]] = True
    return ClassGraph(adjacency=adj, labels=train.labels)


def knng_classifier(train: SpectrumDataset, k: int, metric: str = "euclidean",
                    cfg: ImportanceConfig | None = None) -> ImportanceClassifier:
    cfg = cfg or ImportanceConfig()
    g = knn_graph(train, k, metric)
    g.importance = graphcore.compute_importance(g, cfg)
    return ImportanceClassifier(
        train_samples=train.samples,
        train_labels=train.labels,
        importance=g.importance,
        metric=metric,
        gamma=cfg.gamma,
        q_test=cfg.q_test or k,
    )


def knng_classify(train: SpectrumDataset, test: SpectrumDataset, k: int,
                  metric: str = "euclidean", cfg: ImportanceConfig | None = None) -> list[str]:
    """Predict ``test`` labels with importance classification on the kNN graph."""
    clf = knng_classifier(train, k, metric, cfg)
    labels, _ = graphcore.classify_batch(test.samples, clf)
    return labels


# ------------------------------------------------------------------ synthetic

# (centre cm-1, width cm-1, height) of the shared background bands
BASE_PEAKS = (
    (1650.0, 22.0, 1.00),
    (1545.0, 25.0, 0.60),
    (1450.0, 18.0, 0.22),
    (1400.0, 22.0, 0.30),
    (1240.0, 28.0, 0.35),
    (1080.0, 28.0, 0.45),
    (1040.0, 22.0, 0.30),
)
# bands whose height differs between classes, with the direction of the shift
CLASS_PEAKS = (
    (1132.0, 14.0, 1.0),
    (1315.0, 16.0, -0.6),
    (1740.0, 15.0, 0.8),
)
CLASS_PEAK_HEIGHT = 0.2


@dataclass(frozen=True)
class SyntheticSpec:
    n_subjects: int = 53
    replicates_per_subject: int = 3
    n_wavenumbers: int = 200
    class_separation: float = 0.1
    noise_sd: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1 or self.replicates_per_subject < 1 or self.n_wavenumbers < 1:
            raise ValueError("subject, replicate and wavenumber counts must be positive")
        if self.class_separation < 0:
            raise ValueError("class_separation must be non-negative")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")


def _band(wn: np.ndarray, centre: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((wn - centre) / width) ** 2)


def generate_synthetic(spec: SyntheticSpec) -> SpectrumDataset:
    """Two-class Gaussian-band spectra on a 1800-900 cm-1 grid.

    Every subject gets its own band heights (class mean plus N(0, noise_sd)
    per band) and an overall intensity factor; each replicate adds white
    noise of standard deviation ``noise_sd``. The first half of the subjects
    (rounded down) is labelled ``ASD``, the rest ``control``; class means
    differ by ``class_separation`` on the bands in ``CLASS_PEAKS``.
    """
    rng = np.random.default_rng(spec.seed)
    wn = np.linspace(1800.0, 900.0, spec.n_wavenumbers)
    base = np.array([_band(wn, c, w) for c, w, _ in BASE_PEAKS])
    base_h = np.array([h for *_, h in BASE_PEAKS])
    cls = np.array([_band(wn, c, w) for c, w, _ in CLASS_PEAKS])
    cls_dir = np.array([d for *_, d in CLASS_PEAKS])
    n_pos = spec.n_subjects // 2

    rows, labels, subjects, ids = [], [], [], []
    for s in range(spec.n_subjects):
        positive = s < n_pos
        heights = base_h + rng.normal(0.0, spec.noise_sd, base_h.size)
        marker = CLASS_PEAK_HEIGHT + (spec.class_separation if positive else 0.0) * cls_dir
        marker = marker + rng.normal(0.0, spec.noise_sd, cls_dir.size)
        scale = rng.uniform(0.8, 1.2)
        mean = scale * (heights @ base + marker @ cls)
        for r in range(spec.replicates_per_subject):
            rows.append(mean + rng.normal(0.0, spec.noise_sd, wn.size))
            labels.append(POSITIVE_LABEL if positive else NEGATIVE_LABEL)
            subjects.append(f"S{s:03d}")
            ids.append(f"S{s:03d}-R{r + 1}")
    return SpectrumDataset(
        wavenumbers=wn,
        samples=np.array(rows).reshape(len(rows), spec.n_wavenumbers),
        labels=tuple(labels),
        subject_ids=tuple(subjects),
        sample_ids=tuple(ids),
    )
