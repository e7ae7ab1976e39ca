import itertools
import math

import numpy as np
import pytest

from conftest import random_mrf, random_tree_mrf
from pgmkit.factors import Factor, Variable
from pgmkit.mapinf import (
    AnnealSchedule,
    FlowNetwork,
    PairwiseEnergyModel,
    dual_decomposition,
    export_map_ilp,
    graphcut_map,
    ilp_objective_at,
    local_search_map,
    min_cut,
    normalize_energies,
    partition_cost,
    simulated_annealing_map,
)
from pgmkit.models import MarkovRandomField, enumerate_inference, log_joint


def enumerate_min_energy(m: PairwiseEnergyModel):
    best, best_labels = math.inf, None
    for bits in itertools.product((0, 1), repeat=len(m.variables)):
        labels = dict(zip(m.variables, bits))
        e = m.energy(labels)
        if e < best:
            best, best_labels = e, labels
    return best_labels, best


def random_energy_model(rng, n=5, p=0.5, metric=True):
    names = [f"n{i}" for i in range(n)]
    unary = {v: (float(rng.normal()), float(rng.normal())) for v in names}
    lam = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                lam[(names[i], names[j])] = float(rng.random() * 2)
    return PairwiseEnergyModel(tuple(names), unary, lam)


def grid_energy_model(rng, rows=4, cols=4):
    names = [f"g{r}{c}" for r in range(rows) for c in range(cols)]
    unary = {v: (float(rng.normal()), float(rng.normal())) for v in names}
    lam = {}
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                lam[(f"g{r}{c}", f"g{r}{c+1}")] = float(rng.random())
            if r + 1 < rows:
                lam[(f"g{r}{c}", f"g{r+1}{c}")] = float(rng.random())
    return PairwiseEnergyModel(tuple(names), unary, lam)


class TestNormalizeEnergies:
    def test_shift_example(self):
        m = PairwiseEnergyModel(("u",), {"u": (4.0, -5.0)}, {})
        out = normalize_energies(m)
        assert out.unary["u"] == (9.0, 0.0)

    def test_already_normalized(self):
        m = PairwiseEnergyModel(("u",), {"u": (0.0, 3.0)}, {})
        assert normalize_energies(m).unary["u"] == (0.0, 3.0)

    def test_argmin_preserved(self, rng):
        for _ in range(20):
            m = random_energy_model(rng, n=5)
            before, _ = enumerate_min_energy(m)
            after, _ = enumerate_min_energy(normalize_energies(m))
            assert before == after

    def test_total_shift_is_sum_of_minima(self, rng):
        m = random_energy_model(rng, n=4)
        out = normalize_energies(m)
        shift = sum(min(e) for e in m.unary.values())
        labels = {v: 0 for v in m.variables}
        assert out.energy(labels) == pytest.approx(m.energy(labels) - shift)


class TestMinCut:
    def test_single_arc(self):
        net = FlowNetwork("s", "t")
        net.add_arc("s", "t", 5.0)
        cut = min_cut(net)
        assert cut.cost == pytest.approx(5.0)
        assert cut.source_side == {"s"}
        assert cut.sink_side == {"t"}

    def test_figure_partition(self):
        # undirected weights with B,E pinned to the source and D pinned to the sink
        weights = {
            ("A", "B"): 7, ("A", "C"): 4, ("B", "D"): 2, ("B", "E"): 1,
            ("C", "D"): 1, ("C", "F"): 5, ("D", "E"): 5, ("D", "F"): 2,
            ("E", "G"): 4, ("F", "G"): 1,
        }
        net = FlowNetwork("s", "t")
        for (u, v), w in weights.items():
            net.add_arc(u, v, w)
            net.add_arc(v, u, w)
        big = sum(weights.values()) + 1
        net.add_arc("s", "A", big)
        net.add_arc("s", "F", big)
        net.add_arc("D", "t", big)
        cut = min_cut(net)
        assert cut.source_side - {"s"} == {"A", "B", "C", "F"}
        assert cut.sink_side - {"t"} == {"D", "E", "G"}
        assert cut.cost == pytest.approx(2 + 1 + 1 + 2 + 1)

    def test_cost_equals_partition_capacity(self, rng):
        for _ in range(20):
            net = FlowNetwork("s", "t")
            inner = [f"x{i}" for i in range(4)]
            nodes = ["s"] + inner + ["t"]
            for u in nodes:
                for v in nodes:
                    if u != v and rng.random() < 0.4:
                        net.add_arc(u, v, float(rng.integers(1, 8)))
            net.add_arc("s", inner[0], float(rng.integers(1, 8)))
            net.add_arc(inner[-1], "t", float(rng.integers(1, 8)))
            cut = min_cut(net)
            assert cut.cost == pytest.approx(partition_cost(net, cut.source_side))
            # brute force over all 2-partitions separating s from t
            best = math.inf
            for bits in itertools.product((0, 1), repeat=len(inner)):
                side = frozenset(["s"] + [v for v, b in zip(inner, bits) if b == 0])
                best = min(best, partition_cost(net, side))
            assert cut.cost == pytest.approx(best)


class TestGraphCut:
    def test_two_node_regimes(self):
        for e1_b in (0.4, 3.0):  # weak vs strong pull of B toward label 1
            m = PairwiseEnergyModel(
                ("A", "B"),
                {"A": (0.0, 2.0), "B": (e1_b, 0.0)},
                {("A", "B"): 1.0},
            )
            labels, energy = graphcut_map(m)
            want_labels, want_energy = enumerate_min_energy(m)
            assert energy == pytest.approx(want_energy)
            assert m.energy(labels) == pytest.approx(want_energy)

    def test_zero_coupling_is_independent_argmin(self, rng):
        m = random_energy_model(rng, n=6, p=0.0)
        labels, _ = graphcut_map(m)
        for v in m.variables:
            assert labels[v] == int(np.argmin(m.unary[v]))

    def test_random_grids_exact(self, rng):
        for _ in range(8):
            m = grid_energy_model(rng, rows=3, cols=3)
            labels, energy = graphcut_map(m)
            _, want = enumerate_min_energy(m)
            assert energy == pytest.approx(want)

    def test_negative_coupling_rejected(self):
        with pytest.raises(ValueError):
            PairwiseEnergyModel(("a", "b"), {}, {("a", "b"): -1.0})


class TestIlpExport:
    def two_node_mrf(self, rng):
        a, b = Variable("a", ("0", "1")), Variable("b", ("0", "1"))
        factors = [
            Factor([a], rng.random(2) + 0.1),
            Factor([b], rng.random(2) + 0.1),
            Factor([a, b], rng.random((2, 2)) + 0.1),
        ]
        return MarkovRandomField([a, b], factors)

    def test_structure_counts(self, rng):
        text = export_map_ilp(self.two_node_mrf(rng))
        assert text.count("norm_") == 3
        assert text.count("cons_") == 4
        binary_line = text.split("Binary\n")[1].split("\n")[0]
        assert len(binary_line.split()) == 2 * 2 + 4
        for section in ("Maximize", "Subject To", "Bounds", "Binary"):
            assert section in text

    def test_single_node(self, rng):
        a = Variable("a", ("x", "y", "z"))
        mrf = MarkovRandomField([a], [Factor([a], rng.random(3) + 0.1)])
        text = export_map_ilp(mrf)
        assert text.count("norm_") == 1
        assert text.count("cons_") == 0

    def test_objective_at_map_equals_log_joint(self, rng):
        mrf = self.two_node_mrf(rng)
        assignment, logp = enumerate_inference(mrf, mode="map")
        assert ilp_objective_at(mrf, assignment) == pytest.approx(logp, abs=1e-9)

    def test_non_pairwise_rejected(self, rng):
        vs = [Variable(n, ("0", "1")) for n in "abc"]
        mrf = MarkovRandomField(vs, [Factor(vs, rng.random((2, 2, 2)) + 0.1)])
        with pytest.raises(ValueError):
            export_map_ilp(mrf)

    def test_deterministic_output(self, rng):
        mrf = self.two_node_mrf(rng)
        assert export_map_ilp(mrf) == export_map_ilp(mrf)


class TestDualDecomposition:
    def test_tree_reaches_agreement(self, rng):
        for _ in range(10):
            mrf = random_tree_mrf(rng, n=5, max_states=3)
            state = dual_decomposition(mrf, max_iters=3000)
            _, want = enumerate_inference(mrf, mode="map")
            assert state.agreement
            assert state.objective == pytest.approx(want, abs=1e-9)
            assert state.bound - want <= 1e-9

    def test_single_node(self, rng):
        a = Variable("a", ("0", "1", "2"))
        mrf = MarkovRandomField([a], [Factor([a], [0.2, 0.5, 0.3])])
        state = dual_decomposition(mrf)
        assert state.iterations == 1
        assert state.bound == pytest.approx(math.log(0.5))
        assert state.assignment == {"a": "1"}

    def test_frustrated_cycle_bound_dominates(self, rng):
        vs = [Variable(n, ("0", "1")) for n in "abc"]
        anti = np.array([[0.1, 1.0], [1.0, 0.1]])
        factors = [
            Factor([vs[0], vs[1]], anti),
            Factor([vs[1], vs[2]], anti),
            Factor([vs[0], vs[2]], anti),
        ]
        mrf = MarkovRandomField(vs, factors)
        state = dual_decomposition(mrf, max_iters=150)
        _, want = enumerate_inference(mrf, mode="map")
        for bound in state.bounds:
            assert bound >= want - 1e-9

    def test_bounds_dominate_on_random_models(self, rng):
        for _ in range(10):
            mrf = random_mrf(rng, n=5, max_states=2, n_factors=9, max_scope=2)
            state = dual_decomposition(mrf, max_iters=60)
            _, want = enumerate_inference(mrf, mode="map")
            assert all(b >= want - 1e-9 for b in state.bounds)


class TestLocalSearch:
    def test_unary_only_exact(self, rng):
        vs = [Variable(n, ("0", "1", "2")) for n in "abcd"]
        factors = [Factor([v], rng.random(3) + 0.1) for v in vs]
        mrf = MarkovRandomField(vs, factors)
        want, want_logp = enumerate_inference(mrf, mode="map")
        got, logp = local_search_map(mrf, seed=3)
        assert got == want
        assert logp == pytest.approx(want_logp)
        sa_got, sa_logp = simulated_annealing_map(mrf, seed=3)
        assert sa_logp == pytest.approx(want_logp)

    def test_chain_restarts_find_map(self):
        gen = np.random.default_rng(2)
        vs = [Variable(f"x{i}", ("0", "1")) for i in range(5)]
        factors = [Factor([v], np.exp(gen.normal(size=2))) for v in vs]
        factors += [
            Factor([vs[i], vs[i + 1]], np.exp(0.4 * gen.normal(size=(2, 2))))
            for i in range(4)
        ]
        mrf = MarkovRandomField(vs, factors)
        _, want = enumerate_inference(mrf, mode="map")
        hits = 0
        for seed in range(20):
            _, logp = local_search_map(mrf, seed=seed)
            hits += abs(logp - want) < 1e-9
        assert hits >= 19

    def test_local_optimum_property(self, rng):
        mrf = random_mrf(rng, n=5, max_states=3, n_factors=8, max_scope=2)
        assignment, logp = local_search_map(mrf, seed=11)
        for n in sorted(mrf.variables):
            for s in mrf.variable(n).states:
                if s == assignment[n]:
                    continue
                trial = dict(assignment)
                trial[n] = s
                assert log_joint(mrf, trial) <= logp + 1e-12

    def test_annealing_on_grid_competitive(self, rng):
        # slow-cooled annealing should match or beat greedy search in most seeds
        wins = 0
        seeds = 10
        for seed in range(seeds):
            gen = np.random.default_rng(100 + seed)
            vs = [Variable(f"g{i}", ("0", "1")) for i in range(9)]
            factors = [Factor([v], gen.random(2) + 0.1) for v in vs]
            for r in range(3):
                for c in range(3):
                    i = 3 * r + c
                    if c + 1 < 3:
                        factors.append(Factor([vs[i], vs[i + 1]], gen.random((2, 2)) + 0.1))
                    if r + 1 < 3:
                        factors.append(Factor([vs[i], vs[i + 3]], gen.random((2, 2)) + 0.1))
            mrf = MarkovRandomField(vs, factors)
            _, ls = local_search_map(mrf, seed=seed, max_sweeps=5)
            schedule = AnnealSchedule(t_start=2.0, t_end=0.02, cooling=0.9, sweeps_per_stage=6)
            _, sa = simulated_annealing_map(mrf, schedule, seed=seed)
            if sa >= ls - 1e-12:
                wins += 1
        assert wins >= 9
