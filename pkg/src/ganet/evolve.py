"""Genetic search over MapAll edge selections.

Each genome is an ``n x q`` bit matrix over the candidate table; its fitness
is the validation accuracy of the importance classifier built on the decoded
graph.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import graphcore
from .errors import ConfigError, PreprocessError
from .graphcore import ClassGraph, ImportanceClassifier, ImportanceConfig, MapMatrix
from .spectra import PreprocessConfig, SpectrumDataset

log = logging.getLogger(__name__)

SELECTIONS = ("tournament", "roulette")
CROSSOVERS = ("two_point", "uniform")
REINSERTIONS = ("pure", "ordered")


@dataclass(eq=False)
class Genome:
    bits: np.ndarray
    fitness: float | None = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)

    @property
    def shape(self):
        return self.bits.shape

    def copy(self) -> "Genome":
        return Genome(self.bits.copy(), self.fitness)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 100
    selection: str = "tournament"
    tournament_size: int = 2
    crossover: str = "two_point"
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> 1 / (n * q)
    reinsertion: str = "pure"
    q: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ConfigError("population_size must be an even integer >= 2")
        if self.generations < 0:
            raise ConfigError("generations must be non-negative")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}")
        if self.crossover not in CROSSOVERS:
            raise ConfigError(f"crossover must be one of {CROSSOVERS}")
        if self.reinsertion not in REINSERTIONS:
            raise ConfigError(f"reinsertion must be one of {REINSERTIONS}")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be at least 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1]")
        if self.q < 1:
            raise ConfigError("q must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def bit_flip_rate(self, n: int, q: int) -> float:
        return self.mutation_rate if self.mutation_rate is not None else 1.0 / (n * q)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "GaConfig":
        return cls(**d)


@dataclass(eq=False)
class GanetModel:
    """Outcome of a GANet run, sufficient to classify new spectra."""

    best_genome: Genome
    map: MapMatrix
    train: SpectrumDataset
    validation: SpectrumDataset
    importance: np.ndarray
    metric: str
    ga_config: GaConfig
    importance_config: ImportanceConfig
    preprocess_config: PreprocessConfig | None = None
    history: list[dict] = field(default_factory=list)
    positive_label: str = "ASD"

    @property
    def classes(self) -> tuple[str, ...]:
        return self.train.classes

    @property
    def q_test(self) -> int:
        return self.importance_config.q_test or self.map.q

    @property
    def train_graph(self) -> ClassGraph:
        g = graphcore.decode(self.best_genome.bits, self.map, self.train.labels)
        g.importance = self.importance
        return g

    def classifier(self) -> ImportanceClassifier:
        return ImportanceClassifier(
            train_samples=self.train.samples,
            train_labels=self.train.labels,
            importance=self.importance,
            metric=self.metric,
            gamma=self.importance_config.gamma,
            q_test=self.q_test,
            classes=self.classes,
        )

    def predict(self, ds: SpectrumDataset) -> list[str]:
        labels, _ = graphcore.classify_batch(ds.samples, self)
        return labels

    def revalidate(self) -> float:
        """Recompute the best genome's fitness from the stored data."""
        ev = FitnessEvaluator(self.train, self.validation, self.map, self.importance_config, self.metric)
        return ev(self.best_genome.bits)


# ------------------------------------------------------------------- fitness


class FitnessEvaluator:
    """Validation accuracy of the importance classifier for a given genome.

    Validation-to-training similarities and each validation item's links are
    fixed by the data, so they are computed once; per genome only the graph
    and its importance change.
    """

    def __init__(self, train: SpectrumDataset, validation: SpectrumDataset, map: MapMatrix,
                 cfg: ImportanceConfig, metric: str):
        if validation.n_samples == 0:
            raise ConfigError("validation set is empty")
        if train.n_wavenumbers != validation.n_wavenumbers:
            raise PreprocessError("training and validation spectra differ in length")
        self.map = map
        self.cfg = cfg
        self.train_labels = train.labels
        self.classes = train.classes
        q_test = cfg.q_test or map.q
        if q_test > train.n_samples:
            raise ConfigError(f"q_test={q_test} exceeds the {train.n_samples} training items")
        sim = graphcore.pairwise_similarity(validation.samples, train.samples, metric)
        self.links = graphcore.link_queries(sim, train.labels, self.classes, cfg.gamma, q_test)
        index = {c: k for k, c in enumerate(self.classes)}
        self.truth = np.array([index.get(lab, -1) for lab in validation.labels])

    def importance(self, bits: np.ndarray) -> np.ndarray:
        g = graphcore.decode(bits, self.map, self.train_labels)
        return graphcore.compute_importance(g, self.cfg)

    def __call__(self, bits: np.ndarray) -> float:
        pred = self.links.predict(self.importance(bits))
        return float(np.mean(pred == self.truth))


def evaluate(genome: Genome, map: MapMatrix, train: SpectrumDataset, validation: SpectrumDataset,
             cfg: ImportanceConfig, metric: str = "euclidean") -> float:
    """Fitness of one genome: accuracy on ``validation``. Sets ``genome.fitness``."""
    genome.fitness = FitnessEvaluator(train, validation, map, cfg, metric)(genome.bits)
    return genome.fitness


# ----------------------------------------------------------------- operators


def init_population(map: MapMatrix, cfg: GaConfig, rng: np.random.Generator | None = None) -> list[Genome]:
    """``cfg.population_size`` genomes of i.i.d. fair bits."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    bits = rng.integers(0, 2, size=(cfg.population_size,) + map.shape, dtype=np.uint8)
    return [Genome(b) for b in bits]


def _fitnesses(pop: Sequence[Genome]) -> np.ndarray:
    f = np.array([g.fitness for g in pop], dtype=float)
    if np.isnan(f).any():
        raise ValueError("population contains unevaluated genomes")
    return f


def select_tournament(pop: Sequence[Genome], k: int, rng: np.random.Generator) -> Genome:
    """Best of ``k`` uniform draws with replacement; ties go to the earliest draw.

    Breaking ties by draw order keeps selection uniform over equally fit
    genomes, which a lowest-index rule would not.
    """
    f = _fitnesses(pop)
    drawn = rng.integers(0, len(pop), size=k)
    best = max(drawn, key=lambda i: f[i])
    return pop[best]


def select_roulette(pop: Sequence[Genome], rng: np.random.Generator) -> Genome:
    """Fitness-proportional draw; uniform when every fitness is zero."""
    f = _fitnesses(pop)
    if np.any(f < 0):
        raise ValueError("roulette selection needs non-negative fitness")
    total = f.sum()
    if total > 0:
        i = rng.choice(len(pop), p=f / total)
    else:
        i = rng.integers(0, len(pop))
    return pop[int(i)]


def crossover_two_point(a: Genome, b: Genome, rng: np.random.Generator,
                        points: tuple[int, int] | None = None) -> tuple[Genome, Genome]:
    """Swap the flat segment ``[p1, p2)`` between two parents.

    Cut points are drawn as two distinct positions in ``0..L`` unless given.
    """
    if a.shape != b.shape:
        raise ValueError("parents differ in shape")
    fa, fb = a.bits.ravel(), b.bits.ravel()
    if points is None:
        p1, p2 = sorted(int(v) for v in rng.choice(fa.size + 1, size=2, replace=False))
    else:
        p1, p2 = points
    c1, c2 = fa.copy(), fb.copy()
    c1[p1:p2] = fb[p1:p2]
    c2[p1:p2] = fa[p1:p2]
    return Genome(c1.reshape(a.shape)), Genome(c2.reshape(a.shape))


def crossover_uniform(a: Genome, b: Genome, rng: np.random.Generator) -> tuple[Genome, Genome]:
    """Per-bit fair mask: child 1 copies ``a`` where the mask is set, child 2 the rest."""
    if a.shape != b.shape:
        raise ValueError("parents differ in shape")
    mask = rng.integers(0, 2, size=a.shape).astype(bool)
    return Genome(np.where(mask, a.bits, b.bits)), Genome(np.where(mask, b.bits, a.bits))


def mutate(g: Genome, rate: float, rng: np.random.Generator) -> Genome:
    """Flip each bit independently with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("mutation rate must lie in [0, 1]")
    flips = rng.random(g.shape) < rate
    return Genome(np.where(flips, 1 - g.bits, g.bits))


def reinsert(parents: Sequence[Genome], offspring: Sequence[Genome], mode: str) -> list[Genome]:
    """Form the next generation.

    ``pure`` keeps the offspring. ``ordered`` keeps the fittest
    ``len(parents)`` of parents and offspring; on equal fitness offspring
    rank before parents, then by position.
    """
    if len(parents) != len(offspring):
        raise ValueError("parent and offspring populations differ in size")
    if mode == "pure":
        return list(offspring)
    if mode != "ordered":
        raise ConfigError(f"unknown reinsertion mode {mode!r}")
    pool = [(-g.fitness, 0, i, g) for i, g in enumerate(offspring)]
    pool += [(-g.fitness, 1, i, g) for i, g in enumerate(parents)]
    pool.sort(key=lambda t: t[:3])
    return [t[3] for t in pool[: len(parents)]]


# ----------------------------------------------------------------------- run


def _check_compatible(train: SpectrumDataset, validation: SpectrumDataset) -> None:
    if train.n_wavenumbers != validation.n_wavenumbers or not np.allclose(
        train.wavenumbers, validation.wavenumbers, rtol=0, atol=1e-9
    ):
        raise PreprocessError("training and validation sets use different wavenumber axes")
    unknown = sorted(set(validation.labels) - set(train.labels))
    if unknown:
        raise ConfigError(f"validation labels absent from training: {', '.join(unknown)}")


def _best(pop: Sequence[Genome]) -> Genome:
    return min(enumerate(pop), key=lambda t: (-t[1].fitness, t[0]))[1]


def run_ganet(train: SpectrumDataset, validation: SpectrumDataset, cfg: GaConfig,
              importance_cfg: ImportanceConfig | None = None, metric: str = "euclidean",
              preprocess_config: PreprocessConfig | None = None) -> GanetModel:
    """Evolve edge selections and return the best-ever genome as a model.

    Per generation: tournament/roulette parents, crossover with probability
    ``cfg.crossover_rate`` (clones otherwise), bit-flip mutation, evaluation
    and reinsertion. The returned genome is the fittest seen in any
    generation, so its fitness never drops even under pure reinsertion.
    """
    importance_cfg = importance_cfg or ImportanceConfig()
    _check_compatible(train, validation)
    sim = graphcore.compute_similarity(train, metric)
    map = graphcore.build_map_all(sim, train.labels, cfg.q)
    fitness = FitnessEvaluator(train, validation, map, importance_cfg, metric)
    rate = cfg.bit_flip_rate(*map.shape)
    rng = np.random.default_rng(cfg.seed)

    def score(genomes):
        for g in genomes:
            g.fitness = fitness(g.bits)

    pop = init_population(map, cfg, rng)
    score(pop)
    best = _best(pop).copy()
    history = [_record(0, pop, best)]
    for gen in range(1, cfg.generations + 1):
        offspring = []
        while len(offspring) < cfg.population_size:
            if cfg.selection == "tournament":
                a = select_tournament(pop, cfg.tournament_size, rng)
                b = select_tournament(pop, cfg.tournament_size, rng)
            else:
                a = select_roulette(pop, rng)
                b = select_roulette(pop, rng)
            if rng.random() < cfg.crossover_rate:
                if cfg.crossover == "two_point":
                    c1, c2 = crossover_two_point(a, b, rng)
                else:
                    c1, c2 = crossover_uniform(a, b, rng)
            else:
                c1, c2 = a.copy(), b.copy()
            offspring += [mutate(c1, rate, rng), mutate(c2, rate, rng)]
        score(offspring)
        gen_best = _best(offspring)
        if gen_best.fitness > best.fitness:
            best = gen_best.copy()
        pop = reinsert(pop, offspring, cfg.reinsertion)
        history.append(_record(gen, pop, best))
        log.debug("generation %d: best-ever %.4f", gen, best.fitness)

    importance = fitness.importance(best.bits)
    return GanetModel(
        best_genome=best,
        map=map,
        train=train,
        validation=validation,
        importance=importance,
        metric=metric,
        ga_config=cfg,
        importance_config=importance_cfg,
        preprocess_config=preprocess_config,
        history=history,
    )


def _record(gen: int, pop: Sequence[Genome], best: Genome) -> dict:
    f = _fitnesses(pop)
    return {
        "generation": gen,
        "best_ever": float(best.fitness),
        "population_best": float(f.max()),
        "population_mean": float(f.mean()),
    }


def model_from_genome(train: SpectrumDataset, bits: np.ndarray, q: int,
                      importance_cfg: ImportanceConfig | None = None, metric: str = "euclidean",
                      validation: SpectrumDataset | None = None) -> GanetModel:
    """Build a model around a fixed genome without running the search."""
    importance_cfg = importance_cfg or ImportanceConfig()
    sim = graphcore.compute_similarity(train, metric)
    map = graphcore.build_map_all(sim, train.labels, q)
    g = graphcore.decode(bits, map, train.labels)
    importance = graphcore.compute_importance(g, importance_cfg)
    empty = train.subset([])
    return GanetModel(
        best_genome=Genome(bits),
        map=map,
        train=train,
        validation=validation if validation is not None else empty,
        importance=importance,
        metric=metric,
        ga_config=replace(GaConfig(), q=q, generations=0),
        importance_config=importance_cfg,
    )
