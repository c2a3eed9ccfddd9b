import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairaoi.completion import ScriptedService
from fairaoi.errors import ConfigurationError, DomainError, InfeasibleRatesError, ParseFailure
from fairaoi.moead import (GeneticOperator, LlmOperator, MoeadSettings, Population, WeightSet,
                           build_prompt, das_dennis, das_dennis_lattice, divisions_for, dominates,
                           evolve_step, init_population, moead_run, non_dominated,
                           parse_completion, select_final, tchebycheff)
from fairaoi.problem import Problem
from fairaoi.scenario import snapshot_vehicles


class FixedOperator:
    tag = "fixed"

    def __init__(self, child):
        self.child = np.asarray(child, float)

    def offspring(self, parents_w, parents_f, rng):
        return self.child.copy()


class ToyProblem:
    """Two objectives equal to the two coordinates; negative entries are infeasible."""

    n = 2
    box = (0.0, 10.0)

    def objectives(self, w):
        w = np.asarray(w, float)
        if np.any(w < 0):
            raise InfeasibleRatesError("negative")
        return w.copy()


def toy_population(points):
    w = np.array(points, float)
    return Population(w, w.copy(), w.min(axis=0))


class TestWeights:
    def test_two_objectives(self):
        assert das_dennis(2, 4).tolist() == [[0, 1], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25], [1, 0]]

    def test_count_three_objectives(self):
        assert len(das_dennis(3, 2)) == 6

    @pytest.mark.parametrize("n_obj, h", [(2, 7), (3, 5), (4, 3), (5, 4)])
    def test_lattice_count_and_exact_sum(self, n_obj, h):
        lat = das_dennis_lattice(n_obj, h)
        assert len(lat) == math.comb(h + n_obj - 1, n_obj - 1)
        assert len({tuple(r) for r in lat}) == len(lat)
        assert all(sum(Fraction(int(x), h) for x in row) == 1 for row in lat)
        assert np.all(lat >= 0)

    def test_bad_divisions(self):
        with pytest.raises(ConfigurationError):
            das_dennis(3, 0)

    @pytest.mark.parametrize("n_obj, pop", [(4, 50), (2, 5), (3, 7)])
    def test_divisions_for(self, n_obj, pop):
        h = divisions_for(n_obj, pop)
        assert math.comb(h + n_obj - 1, n_obj - 1) >= pop
        assert h == 1 or math.comb(h + n_obj - 2, n_obj - 1) < pop

    def test_neighborhoods(self):
        ws = WeightSet.build(4, 50, 10)
        assert ws.neighborhoods.shape == (len(ws), 10)
        for s in range(len(ws)):
            assert s in ws.neighborhoods[s]
            d = np.linalg.norm(ws.weights - ws.weights[s], axis=1)
            assert d[ws.neighborhoods[s]].max() <= np.sort(d)[9] + 1e-12


class TestTchebycheff:
    def test_at_ideal(self):
        assert tchebycheff([1, 2, 3], [0.2, 0.3, 0.5], [1, 2, 3]) == 0

    def test_single_coordinate(self):
        assert tchebycheff([4, 9, 9], [1, 0, 0], [1, 0, 0]) == 3

    def test_loop_oracle(self, rng):
        for _ in range(50):
            g, m, z = rng.normal(size=(3, 5))
            m = np.abs(m)
            ref = -1.0
            for i in range(5):
                ref = max(ref, m[i] * abs(g[i] - z[i]))
            assert tchebycheff(g, m, z) == ref

    def test_mismatch(self):
        with pytest.raises(DomainError):
            tchebycheff([1, 2], [1], [1, 2])


class TestDominance:
    def test_brute_force(self, rng):
        for _ in range(20):
            f = rng.integers(0, 5, size=(30, 3)).astype(float)
            nd = set(non_dominated(f).tolist())
            ref = {i for i in range(30) if not any(dominates(f[j], f[i]) for j in range(30))}
            assert nd == ref
            assert not any(dominates(f[a], f[b]) for a in nd for b in nd)


class TestGenetic:
    def test_identical_parents_no_mutation(self, rng):
        op = GeneticOperator((20, 150), mutation_scale=0.0)
        p = np.array([33.0, 77.0, 120.0])
        assert np.array_equal(op.offspring([p, p], None, rng), p)

    def test_children_in_box(self, rng):
        op = GeneticOperator((20, 150), mutation_scale=0.5, mutation_prob=1.0)
        a, b = np.array([20.0, 150.0]), np.array([150.0, 20.0])
        kids = np.array([op.offspring([a, b], None, rng) for _ in range(100_000)])
        assert kids.min() >= 20 and kids.max() <= 150

    def test_centered_on_midpoint(self, rng):
        op = GeneticOperator((20, 150))
        a, b = np.array([40.0, 60.0, 100.0]), np.array([80.0, 120.0, 140.0])
        kids = np.array([op.offspring([a, b], None, rng) for _ in range(100_000)])
        assert kids.mean(axis=0) == pytest.approx((a + b) / 2, rel=0.02)


class TestPrompt:
    def test_paper_example(self):
        text = build_prompt([([0.124, 0.352, 0.421], [0.021, 0.031, 0.012, 67])])
        assert "point: <begin>0.124,0.352,0.421 <end>" in text
        assert "value: <begin>0.021,0.031,0.012,67 <end>" in text
        assert text.index("point:") < text.index("value:")
        assert text.rstrip().endswith("<end>.")

    def test_empty(self):
        with pytest.raises(DomainError):
            build_prompt([])

    def test_order_and_determinism(self):
        pts = [([1, 2], [3, 4, 5]), ([6, 7], [8, 9, 10])]
        text = build_prompt(pts)
        assert text == build_prompt(pts)
        assert text.count("point: <begin>") == 2
        assert text.index("<begin>1,2 <end>") < text.index("<begin>6,7 <end>")


class TestParse:
    def test_direct(self):
        assert parse_completion("<begin>0.1,0.2,0.3<end>").tolist() == [0.1, 0.2, 0.3]

    def test_surrounding_text_and_clamp(self):
        out = parse_completion("Sure! <begin> 0.01, 0.5 <end> <begin>9<end>", 2, (0.02, 0.15))
        assert out.tolist() == [0.02, 0.15]

    @pytest.mark.parametrize("text", ["garbage", "<begin>0.1,xyz<end>", "<begin>0.1,0.2", "<begin>nan<end>"])
    def test_failures(self, text):
        with pytest.raises(ParseFailure):
            parse_completion(text)

    def test_wrong_length(self):
        with pytest.raises(ParseFailure):
            parse_completion("<begin>0.1,0.2<end>", 3)


class TestSelectFinal:
    def test_single_candidate(self):
        pop = toy_population([[0.1, 5.0]])
        sel = select_final(pop, [1.0], 10.0)
        assert sel.index == 0 and not sel.relaxed

    def test_lowest_aoi(self):
        pop = Population(np.zeros((2, 2)), np.array([[0.1, 7.0], [0.1, 5.0]]), np.zeros(2))
        assert select_final(pop, [1.0], 10.0).index == 1

    def test_relaxation(self):
        pop = Population(np.zeros((2, 2)), np.array([[3.0, 7.0], [2.0, 5.0]]), np.zeros(2))
        sel = select_final(pop, [1.0], 10.0)
        assert sel.relaxed and sel.index == 1

    def test_age_threshold(self):
        pop = Population(np.zeros((2, 2)), np.array([[0.1, 7.0], [2.0, 5.0]]), np.zeros(2))
        sel = select_final(pop, [1.0], 6.0)
        assert sel.relaxed and sel.index == 1

    def test_empty(self):
        with pytest.raises(DomainError):
            select_final(Population(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(2)), [1.0], 1.0)


class TestEvolveStep:
    def weights(self):
        return WeightSet.build(2, 3, 2)

    def test_dominated_offspring_never_replaces(self, rng):
        pop = toy_population([[1, 2], [2, 1], [1.5, 1.5]])
        st = evolve_step(pop, self.weights(), FixedOperator([9, 9]), 0.9, rng, ToyProblem())
        assert st.replacements == 0 and st.offspring == 3

    def test_equal_offspring_replaces(self, rng):
        pop = toy_population([[1, 1], [1, 1], [1, 1]])
        st = evolve_step(pop, self.weights(), FixedOperator([1, 1]), 0.9, rng, ToyProblem())
        assert st.replacements > 0

    def test_infeasible_offspring_discarded(self, rng):
        pop = toy_population([[1, 2], [2, 1], [1.5, 1.5]])
        before = pop.w.copy()
        st = evolve_step(pop, self.weights(), FixedOperator([-1, 0]), 0.9, rng, ToyProblem())
        assert st.discarded == 3 and np.array_equal(pop.w, before)

    def test_replacement_only_improves(self, rng):
        problem = ToyProblem()
        ws = WeightSet.build(2, 11, 4)
        pop = toy_population(rng.uniform(0, 10, (len(ws), 2)))
        op = GeneticOperator(problem.box)
        for _ in range(20):
            z_before = pop.z_star.copy()
            f_before = pop.f.copy()
            evolve_step(pop, ws, op, 0.9, rng, problem)
            assert np.all(pop.z_star <= z_before)
            for j in range(len(ws)):
                m = ws.weights[j]
                assert tchebycheff(pop.f[j], m, pop.z_star) <= \
                    tchebycheff(f_before[j], m, pop.z_star) + 1e-12
            assert np.all(pop.z_star <= pop.f.min(axis=0))


class TestRun:
    def test_bit_reproducible(self, problem):
        s = MoeadSettings(population=15, neighborhood=5, generations=10)
        a = moead_run(problem, s, seed=4)
        b = moead_run(problem, s, seed=4)
        assert np.array_equal(a.population.w, b.population.w)
        assert np.array_equal(a.final.w, b.final.w)

    def test_ideal_point_monotone(self, problem):
        res = moead_run(problem, MoeadSettings(population=15, neighborhood=5, generations=15), seed=1)
        z = np.array(res.z_history)
        assert np.all(np.diff(z, axis=0) <= 0)

    def test_single_vehicle_grid_optimum(self, cfg):
        p = Problem.build(cfg, snapshot_vehicles(cfg, n_vehicles=1))
        res = moead_run(p, MoeadSettings(population=10, neighborhood=3, generations=50), seed=0)
        grid = np.arange(20, 151)
        best = grid[np.argmin([p.aoi([g]).mean for g in grid])]
        assert abs(res.final.w[0] - best) <= 1.0

    def test_initial_population_feasible(self, problem, rng):
        pop = init_population(problem, 12, rng)
        assert len(pop) == 12 and np.all(pop.z_star == pop.f.min(axis=0))

    def test_settings_validated(self):
        with pytest.raises(ConfigurationError):
            MoeadSettings(p_near=1.5)


class TestLlmOperator:
    def make(self, problem, replies, budget=100):
        service = ScriptedService(replies)
        op = LlmOperator(service, problem, GeneticOperator(problem.box), budget)
        return op, service

    def test_parsed_reply_in_slots(self, problem, rng):
        op, service = self.make(problem, ["<begin>0.03,0.04,0.2<end>"])
        parents = np.array([[50.0, 60.0, 70.0], [80.0, 90.0, 100.0]])
        child = op.offspring(parents, np.ones((2, 4)), rng)
        assert child == pytest.approx([30.0, 40.0, 150.0])
        assert "point: <begin>0.05,0.06,0.07 <end>" in service.prompts[0]
        assert op.stats.parsed == 1

    def test_malformed_falls_back(self, problem, rng):
        op, _ = self.make(problem, ["no idea"])
        child = op.offspring(np.full((2, 3), 50.0), np.ones((2, 4)), rng)
        assert op.stats.parse_failures == 1 and np.all((child >= 20) & (child <= 150))

    def test_service_error_and_budget(self, problem, rng):
        op, _ = self.make(problem, [], budget=1)
        parents = np.full((2, 3), 50.0)
        op.offspring(parents, np.ones((2, 4)), rng)
        op.offspring(parents, np.ones((2, 4)), rng)
        assert op.stats.service_errors == 1 and op.stats.budget_fallbacks == 1
        assert op.stats.requests == 1 and op.stats.fallbacks == 2


@given(st.lists(st.lists(st.integers(0, 4), min_size=3, max_size=3), min_size=1, max_size=25))
def test_non_dominated_property(rows):
    f = np.array(rows, float)
    nd = non_dominated(f)
    assert len(nd) >= 1
    for i in range(len(f)):
        dominated = any(dominates(f[j], f[i]) for j in range(len(f)))
        assert (i in nd) != dominated
