import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ganet import graphcore
from ganet.errors import ConfigError
from ganet.evolve import (GaConfig, Genome, crossover_two_point, crossover_uniform, evaluate,
                          init_population, model_from_genome, mutate, reinsert, run_ganet,
                          select_roulette, select_tournament)
from ganet.graphcore import ImportanceConfig, build_map_all, compute_similarity
from ganet.spectra import SpectrumDataset, SplitSpec, split_by_subject
from conftest import blobs
from oracles import classify_literal


def with_fitness(values):
    return [Genome(np.zeros((1, 1)), float(f)) for f in values]


def flat(g):
    return "".join(str(b) for b in g.bits.ravel())


class TestConfig:
    def test_defaults(self):
        cfg = GaConfig()
        assert (cfg.population_size, cfg.generations, cfg.tournament_size, cfg.crossover_rate) == (100, 100, 2, 0.9)
        assert cfg.bit_flip_rate(93, 3) == 1 / 279

    @pytest.mark.parametrize("kw", [{"population_size": 3}, {"population_size": 0},
                                    {"crossover_rate": 1.2}, {"mutation_rate": -0.1},
                                    {"tournament_size": 0}, {"selection": "rank"},
                                    {"crossover": "pmx"}, {"reinsertion": "elite"}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            GaConfig(**kw)

    def test_round_trip(self):
        cfg = GaConfig(population_size=10, reinsertion="ordered", mutation_rate=0.01, seed=4)
        assert GaConfig.from_dict(cfg.to_dict()) == cfg


class TestInit:
    def _map(self, n, q):
        return graphcore.MapMatrix(np.zeros((n, q), dtype=np.int64))

    def test_deterministic(self):
        cfg = GaConfig(population_size=6, seed=9)
        a = init_population(self._map(5, 3), cfg)
        b = init_population(self._map(5, 3), cfg)
        assert all(np.array_equal(x.bits, y.bits) for x, y in zip(a, b))

    def test_reference_genome_shape(self):
        pop = init_population(self._map(93, 3), GaConfig(population_size=100))
        assert len(pop) == 100 and all(g.bits.size == 279 and g.shape == (93, 3) for g in pop)

    def test_fair_bits(self):
        pop = init_population(self._map(100, 5), GaConfig(population_size=20, seed=1))
        frac = np.mean([g.bits.mean() for g in pop])
        assert 0.47 <= frac <= 0.53
        assert set(np.unique(np.concatenate([g.bits.ravel() for g in pop]))) <= {0, 1}


class TestSelection:
    def test_k1_uniform(self):
        pop = with_fitness(np.linspace(0, 1, 10))
        rng = np.random.default_rng(0)
        picks = [pop.index(select_tournament(pop, 1, rng)) for _ in range(10_000)]
        assert stats.chisquare(np.bincount(picks, minlength=10)).pvalue > 0.01

    def test_identical_fitness_uniform(self):
        pop = with_fitness([0.5] * 8)
        rng = np.random.default_rng(1)
        picks = [pop.index(select_tournament(pop, 3, rng)) for _ in range(10_000)]
        assert stats.chisquare(np.bincount(picks, minlength=8)).pvalue > 0.01

    def test_large_tournament_favours_top_half(self):
        f = np.random.default_rng(2).permutation(20) / 20
        pop = with_fitness(f)
        rng = np.random.default_rng(3)
        chosen = [select_tournament(pop, 20, rng).fitness for _ in range(1000)]
        assert np.mean(np.array(chosen) >= np.median(f)) > 0.99

    def test_returns_max_of_draws(self):
        pop = with_fitness([0.1, 0.9, 0.5])
        rng = np.random.default_rng(4)
        for _ in range(200):
            state = rng.bit_generator.state
            drawn = rng.integers(0, 3, size=2)
            rng.bit_generator.state = state
            assert select_tournament(pop, 2, rng).fitness == max(pop[i].fitness for i in drawn)

    def test_roulette_zero_mass(self):
        pop = with_fitness([1.0, 0.0])
        rng = np.random.default_rng(5)
        assert all(select_roulette(pop, rng) is pop[0] for _ in range(1000))

    def test_roulette_ratio(self):
        pop = with_fitness([0.75, 0.25])
        rng = np.random.default_rng(6)
        counts = np.bincount([pop.index(select_roulette(pop, rng)) for _ in range(10_000)], minlength=2)
        assert stats.chisquare(counts, [7500, 2500]).pvalue > 0.01

    def test_roulette_all_zero_uniform(self):
        pop = with_fitness([0.0] * 4)
        rng = np.random.default_rng(7)
        counts = np.bincount([pop.index(select_roulette(pop, rng)) for _ in range(8000)], minlength=4)
        assert stats.chisquare(counts).pvalue > 0.01

    def test_unevaluated(self):
        with pytest.raises(ValueError):
            select_tournament([Genome(np.zeros(2))], 1, np.random.default_rng())


class TestCrossover:
    def test_two_point_hand_trace(self):
        a = Genome(np.zeros(8))
        b = Genome(np.ones(8))
        c1, c2 = crossover_two_point(a, b, np.random.default_rng(), points=(2, 5))
        assert flat(c1) == "00111000"
        assert flat(c2) == "11000111"

    @pytest.mark.parametrize("op", [crossover_two_point, crossover_uniform])
    def test_identical_parents(self, op):
        g = Genome(np.random.default_rng(0).integers(0, 2, (5, 3)))
        c1, c2 = op(g, g.copy(), np.random.default_rng(1))
        assert np.array_equal(c1.bits, g.bits) and np.array_equal(c2.bits, g.bits)

    def test_uniform_complementary(self):
        a = Genome(np.random.default_rng(0).integers(0, 2, (6, 4)))
        b = Genome(1 - a.bits)
        c1, c2 = crossover_uniform(a, b, np.random.default_rng(2))
        assert np.all((c1.bits ^ c2.bits) == 1)

    def test_uniform_mask_all_ones(self):
        class Ones:
            def integers(self, lo, hi, size):
                return np.ones(size, dtype=np.int64)

        a = Genome(np.zeros((2, 3)))
        b = Genome(np.ones((2, 3)))
        c1, c2 = crossover_uniform(a, b, Ones())
        assert np.array_equal(c1.bits, a.bits) and np.array_equal(c2.bits, b.bits)

    def test_two_point_cuts_distinct_and_uniform(self):
        rng = np.random.default_rng(8)
        a, b = Genome(np.zeros(4)), Genome(np.ones(4))
        seen = {}
        for _ in range(5000):
            c1, _ = crossover_two_point(a, b, rng)
            seen[flat(c1)] = seen.get(flat(c1), 0) + 1
        # C(5, 2) = 10 cut pairs, each giving a distinct contiguous block of ones
        assert len(seen) == 10 and "0000" not in seen
        assert stats.chisquare(list(seen.values())).pvalue > 0.01

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8), st.integers(1, 5))
    def test_conservation(self, seed, n, q):
        rng = np.random.default_rng(seed)
        a = Genome(rng.integers(0, 2, (n, q)))
        b = Genome(rng.integers(0, 2, (n, q)))
        for op in (crossover_two_point, crossover_uniform):
            c1, c2 = op(a, b, rng)
            assert c1.shape == a.shape
            assert np.array_equal(c1.bits + c2.bits, a.bits + b.bits)
            assert np.all((c1.bits == a.bits) | (c1.bits == b.bits))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            crossover_two_point(Genome(np.zeros(3)), Genome(np.zeros(4)), np.random.default_rng())


class TestMutate:
    def test_rate_zero_and_one(self):
        g = Genome(np.random.default_rng(0).integers(0, 2, (7, 3)))
        rng = np.random.default_rng(1)
        assert np.array_equal(mutate(g, 0.0, rng).bits, g.bits)
        assert np.array_equal(mutate(g, 1.0, rng).bits, 1 - g.bits)

    def test_half_rate(self):
        g = Genome(np.zeros((100, 100)))
        frac = mutate(g, 0.5, np.random.default_rng(2)).bits.mean()
        assert 0.47 <= frac <= 0.53

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            mutate(Genome(np.zeros(3)), 1.5, np.random.default_rng())


class TestReinsert:
    def test_ordered_keeps_better_parents(self):
        parents, offspring = with_fitness([0.9, 0.8]), with_fitness([0.1, 0.2])
        assert reinsert(parents, offspring, "ordered") == parents

    def test_pure(self):
        parents, offspring = with_fitness([0.9, 0.8]), with_fitness([0.1, 0.2])
        assert reinsert(parents, offspring, "pure") == offspring

    def test_interleaved(self):
        out = reinsert(with_fitness([0.9, 0.1]), with_fitness([0.5, 0.4]), "ordered")
        assert [g.fitness for g in out] == [0.9, 0.5]

    def test_ties_prefer_offspring(self):
        parents, offspring = with_fitness([0.5, 0.5]), with_fitness([0.5, 0.1])
        assert reinsert(parents, offspring, "ordered") == [offspring[0], parents[0]]

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            reinsert(with_fitness([1]), with_fitness([1, 2]), "pure")


def _blob_splits(seed=0):
    ds = blobs(n_per_class=15, dim=4, sep=2.0, seed=seed)
    return split_by_subject(ds, SplitSpec(seed=seed))


class TestEvaluate:
    def test_copies_of_connected_class(self):
        ds = blobs(n_per_class=4, dim=3, sep=10.0)
        train = ds.subset(range(4))
        sim = compute_similarity(train, "euclidean")
        m = build_map_all(sim, train.labels, 3)
        f = evaluate(Genome(np.ones(m.shape)), m, train, train, ImportanceConfig())
        assert f == 1.0

    def test_all_zero_matches_uniform_oracle(self):
        train, val, _ = _blob_splits()
        m = build_map_all(compute_similarity(train, "euclidean"), train.labels, 3)
        f = evaluate(Genome(np.zeros(m.shape)), m, train, val, ImportanceConfig())
        uniform = [1 / train.n_samples] * train.n_samples
        pred = [classify_literal(y, train.samples.tolist(), list(train.labels), uniform,
                                 "euclidean", 1.0, 3) for y in val.samples.tolist()]
        assert f == pytest.approx(np.mean([p == t for p, t in zip(pred, val.labels)]))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_range(self, seed):
        train, val, _ = _blob_splits()
        m = build_map_all(compute_similarity(train, "euclidean"), train.labels, 3)
        g = Genome(np.random.default_rng(seed).integers(0, 2, m.shape))
        assert 0.0 <= evaluate(g, m, train, val, ImportanceConfig()) <= 1.0


class TestRun:
    def test_generations_zero(self):
        train, val, _ = _blob_splits()
        model = run_ganet(train, val, GaConfig(population_size=10, generations=0, seed=1))
        assert len(model.history) == 1
        assert model.best_genome.fitness == model.history[0]["population_best"]

    def test_determinism(self):
        train, val, _ = _blob_splits(3)
        cfg = GaConfig(population_size=10, generations=5, seed=2, selection="roulette", crossover="uniform")
        a = run_ganet(train, val, cfg)
        b = run_ganet(train, val, cfg)
        assert a.history == b.history
        assert np.array_equal(a.best_genome.bits, b.best_genome.bits)
        assert np.array_equal(a.importance, b.importance)

    @pytest.mark.parametrize("reinsertion", ["pure", "ordered"])
    def test_best_ever_monotone(self, reinsertion):
        train, val, _ = _blob_splits(1)
        cfg = GaConfig(population_size=12, generations=10, reinsertion=reinsertion, seed=3)
        model = run_ganet(train, val, cfg, ImportanceConfig(measure="pagerank"))
        best = [h["best_ever"] for h in model.history]
        assert best == sorted(best)
        if reinsertion == "ordered":
            top = [h["population_best"] for h in model.history]
            assert top == sorted(top)
        assert model.revalidate() == model.best_genome.fitness

    def test_unknown_validation_label(self):
        train, val, _ = _blob_splits()
        bad = SpectrumDataset(val.wavenumbers, val.samples, ["Z"] * val.n_samples,
                              val.subject_ids, val.sample_ids)
        with pytest.raises(ConfigError):
            run_ganet(train, bad, GaConfig(population_size=2, generations=0))

    def test_model_from_genome_ones_matches_knng_graph(self):
        train, _, _ = _blob_splits()
        m = model_from_genome(train, np.ones((train.n_samples, 3)), 3)
        assert m.train_graph.n_edges == int(m.map.valid.sum())
