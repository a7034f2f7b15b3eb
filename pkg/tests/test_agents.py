import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mass_sim.agents import (
    AgentParams,
    Archetype,
    Placement,
    PlacementMode,
    emit_message,
    emit_messages,
    init_population,
    update_state,
    update_states,
)
from mass_sim.errors import InvalidParameterError
from mass_sim.graph import InteractionGraph, gen_barabasi_albert, gen_erdos_renyi

unit = st.floats(-1.0, 1.0)
BASE = AgentParams(Archetype.BASELINE, alpha=0.5, beta=1.0)
AMP = AgentParams(Archetype.AMPLIFIER, alpha=0.5)


def star(leaves):
    return InteractionGraph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


class TestParams:
    @pytest.mark.parametrize("alpha", [-0.01, 1.01])
    def test_alpha_range(self, alpha):
        with pytest.raises(InvalidParameterError):
            AgentParams(Archetype.BASELINE, alpha=alpha)

    def test_gain(self):
        assert AMP.gain == 1.5
        assert AgentParams(Archetype.BASELINE, 0.5, beta=0.7).gain == 0.7

    def test_placement_none_needs_zero(self):
        with pytest.raises(InvalidParameterError):
            Placement(PlacementMode.NONE, 3)
        with pytest.raises(InvalidParameterError):
            Placement(PlacementMode.HUBS, -1)


class TestEmit:
    def test_examples(self):
        assert emit_message(0.8, AMP) == 1.0
        assert emit_message(0.0, AMP) == 0.0 and emit_message(0.0, BASE) == 0.0
        assert emit_message(0.5, BASE) == 0.5

    @given(unit)
    def test_amplifier_saturates(self, x):
        m = emit_message(x, AMP)
        assert -1.0 <= m <= 1.0
        if abs(x) >= 1 / 1.5:
            assert abs(m) == 1.0

    @given(unit, st.floats(-5, 5))
    def test_range(self, x, beta):
        assert -1.0 <= emit_message(x, AgentParams(Archetype.BASELINE, 0.3, beta=beta)) <= 1.0


class TestUpdate:
    def test_examples(self):
        assert update_state(0.3, BASE, []) == 0.3
        assert update_state(0.3, AgentParams(Archetype.BASELINE, 0.0), [1.0, -1.0, 0.9]) == 0.3
        assert update_state(-0.2, AgentParams(Archetype.BASELINE, 1.0), [0.5]) == 0.5
        assert update_state(0.0, BASE, [1.0, 1.0]) == 0.5

    @given(unit, st.floats(0, 1), st.lists(unit, min_size=1, max_size=10))
    def test_convex(self, x, alpha, msgs):
        y = update_state(x, AgentParams(Archetype.BASELINE, alpha), msgs)
        lo, hi = sorted((x, float(np.mean(msgs))))
        assert -1.0 <= y <= 1.0
        assert lo - 1e-12 <= y <= hi + 1e-12


class TestInitPopulation:
    def test_no_amplifiers(self):
        g = gen_barabasi_albert(300, 3, seed=0)
        pop = init_population(300, Placement(), g, seed=1)
        assert pop.n == 300 and pop.amplifier_indices.size == 0
        assert all(p.archetype is Archetype.BASELINE for p in pop.params)

    def test_hubs_are_top_degree(self):
        g = gen_barabasi_albert(300, 3, seed=0)
        pop = init_population(300, Placement(PlacementMode.HUBS, 10), g, seed=1)
        deg = g.degrees
        chosen = pop.amplifier_indices
        assert chosen.size == 10
        assert deg[chosen].min() >= np.delete(deg, chosen).max()
        # brute-force oracle: sort by (-degree, index)
        expect = sorted(range(300), key=lambda i: (-deg[i], i))[:10]
        assert sorted(expect) == chosen.tolist()

    def test_periphery_lowest_degree(self):
        g = gen_barabasi_albert(100, 2, seed=3)
        pop = init_population(100, Placement(PlacementMode.PERIPHERY, 5), g, seed=1)
        deg = g.degrees
        expect = sorted(range(100), key=lambda i: (deg[i], i))[:5]
        assert pop.amplifier_indices.tolist() == sorted(expect)

    def test_star_center(self):
        pop = init_population(10, Placement(PlacementMode.HUBS, 1), star(9), seed=0)
        assert pop.amplifier_indices.tolist() == [0]
        assert pop.agent(0).archetype is Archetype.AMPLIFIER and pop.agent(0).gain == 1.5

    def test_uniform_count(self):
        g = gen_erdos_renyi(50, 0.1, seed=0)
        pop = init_population(50, Placement(PlacementMode.UNIFORM_RANDOM, 7), g, seed=2)
        assert pop.amplifier_indices.size == 7

    def test_placement_leaves_draws_alone(self):
        g = gen_barabasi_albert(100, 3, seed=0)
        a = init_population(100, Placement(), g, seed=5)
        b = init_population(100, Placement(PlacementMode.HUBS, 10), g, seed=5)
        assert np.array_equal(a.states, b.states) and np.array_equal(a.alpha, b.alpha)
        assert np.array_equal(a.beta, b.beta)

    def test_errors(self):
        g = star(9)
        with pytest.raises(InvalidParameterError):
            init_population(10, Placement(PlacementMode.HUBS, 11), g, seed=0)
        with pytest.raises(InvalidParameterError):
            init_population(11, Placement(), g, seed=0)

    def test_distributions(self):
        g = InteractionGraph(20000)
        pop = init_population(20000, Placement(), g, sigma=0.2, seed=0)
        assert np.all(np.abs(pop.states) <= 1)
        assert abs(pop.states.mean()) < 0.02 and abs(pop.states.var() - 1 / 3) < 0.01
        assert abs(pop.alpha.mean() - 0.5) < 0.01 and abs(pop.alpha.var() - 0.05) < 0.003
        assert abs(pop.beta.mean() - 1) < 0.01 and abs(pop.beta.std() - 0.2) < 0.01


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.floats(0.0, 0.6), st.integers(0, 2**32), st.integers(0, 5))
def test_vectorized_matches_scalar(n, p, seed, k):
    g = gen_erdos_renyi(n, p, seed)
    pop = init_population(n, Placement(PlacementMode.HUBS, min(k, n)), g, sigma=0.5, seed=seed)
    msgs = emit_messages(pop)
    params = pop.params
    assert np.allclose(msgs, [emit_message(float(x), q) for x, q in zip(pop.states, params)], atol=0, rtol=0)
    new = update_states(pop, msgs, g)
    for i in range(n):
        nb = sorted(g.adjacency[i])
        expect = update_state(float(pop.states[i]), params[i], [msgs[j] for j in nb])
        assert new[i] == pytest.approx(expect, abs=1e-12)
    assert np.all(np.abs(new) <= 1)
