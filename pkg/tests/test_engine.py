import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mass_sim.agents import Placement, PlacementMode, Population
from mass_sim.engine import (
    Perturbation,
    SimConfig,
    Snapshot,
    Topology,
    Trajectory,
    divergence_series,
    pair_divergence,
    run,
    run_replications,
    simulate,
    step,
    write_states_csv,
    write_trajectories_csv,
)
from mass_sim.errors import InvalidParameterError
from mass_sim.graph import InteractionGraph, gen_erdos_renyi

NO_REWIRE = SimConfig(n=2, T=1, R=1, rewire_enabled=False)


def make_pop(states, alpha, beta=None, amplifier=None):
    n = len(states)
    return Population(
        np.asarray(states, dtype=float),
        np.zeros(n, bool) if amplifier is None else np.asarray(amplifier, bool),
        np.asarray(alpha, dtype=float) * np.ones(n),
        np.ones(n) if beta is None else np.asarray(beta, dtype=float) * np.ones(n),
        np.full(n, 1.5),
    )


def small(T=10, R=3, **kw):
    return SimConfig(n=40, T=T, R=R, **kw)


class TestConfig:
    @pytest.mark.parametrize(
        "bad", [{"n": 0}, {"T": 0}, {"R": 0}, {"rewire_threshold": 0.0}, {"sigma": -1.0}]
    )
    def test_invalid(self, bad):
        with pytest.raises(InvalidParameterError):
            SimConfig(**bad)

    def test_negative_epsilon(self):
        with pytest.raises(InvalidParameterError):
            Perturbation(epsilon=-0.1)

    def test_roundtrip(self):
        cfg = SimConfig(
            topology=Topology("WS", k=4, p=0.2),
            placement=Placement(PlacementMode.PERIPHERY, 5),
            perturbation=Perturbation("periphery", 0.2, 3),
        )
        assert SimConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(InvalidParameterError):
            SimConfig.from_dict({"n": 10, "bogus": 1})


class TestStep:
    def test_alpha_zero_fixed_point(self):
        g = gen_erdos_renyi(30, 0.2, seed=0)
        pop = make_pop(np.linspace(-1, 1, 30), 0.0)
        new, g2 = step(pop, g, SimConfig(n=30, rewire_enabled=False))
        assert new == pop and g2 == g

    def test_consensus_stays(self):
        g = InteractionGraph(2, [(0, 1)])
        new, _ = step(make_pop([1.0, 1.0], 0.5), g, NO_REWIRE)
        assert new.states.tolist() == [1.0, 1.0]

    def test_swap(self):
        g = InteractionGraph(2, [(0, 1)])
        new, _ = step(make_pop([1.0, -1.0], 1.0), g, NO_REWIRE)
        assert new.states.tolist() == [-1.0, 1.0]

    def test_rewire_uses_new_states(self):
        # old states are 2.0 apart, new states coincide, so the edge survives
        g = InteractionGraph(2, [(0, 1)])
        cfg = SimConfig(n=2, rewire_enabled=True)
        new, g2 = step(make_pop([1.0, -1.0], 0.5), g, cfg, np.random.default_rng(0))
        assert new.states.tolist() == [0.0, 0.0]
        assert g2.edge_count == 1

    def test_size_mismatch(self):
        with pytest.raises(InvalidParameterError):
            step(make_pop([0.0, 0.1, 0.2], 0.5), InteractionGraph(2, [(0, 1)]), NO_REWIRE)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 30), st.integers(0, 2**32))
    def test_permutation_equivariance(self, n, seed):
        rng = np.random.default_rng(seed)
        g = gen_erdos_renyi(n, 0.3, rng)
        pop = Population(
            rng.uniform(-1, 1, n), rng.random(n) < 0.2, rng.random(n), rng.normal(1, 0.3, n), np.full(n, 1.5)
        )
        perm = rng.permutation(n)
        cfg = SimConfig(n=n, rewire_enabled=False)
        a, _ = step(pop, g, cfg)
        b, _ = step(pop.permuted(perm), g.relabel(perm), cfg)
        assert np.allclose(b.states[perm], a.states, rtol=0, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 30), st.floats(0.05, 0.5), st.integers(0, 2**32))
    def test_convex_averaging_bounds(self, n, p, seed):
        rng = np.random.default_rng(seed)
        g = gen_erdos_renyi(n, p, rng)
        pop = make_pop(rng.uniform(-1, 1, n), rng.random(n))
        cfg = SimConfig(n=n, rewire_enabled=False)
        comps = components(g)
        for _ in range(15):
            new, _ = step(pop, g, cfg)
            for c in comps:
                assert new.states[c].min() >= pop.states[c].min() - 1e-12
                assert new.states[c].max() <= pop.states[c].max() + 1e-12
            pop = new


def components(g):
    seen, out = set(), []
    for s in range(g.node_count):
        if s in seen:
            continue
        stack, comp = [s], []
        seen.add(s)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in g.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        out.append(sorted(comp))
    return out


class TestRun:
    def test_snapshot_count(self):
        tr = run(SimConfig(n=50, T=40, R=1))
        assert len(tr.snapshots) == 41
        assert [s.t for s in tr.snapshots] == list(range(41))

    def test_deterministic(self):
        cfg = small(perturbation=Perturbation("hub", 0.2, 3))
        assert run(cfg, 2) == run(cfg, 2)

    def test_null_perturbation(self):
        cfg = small()
        a, b = run(cfg.replace(perturbation=Perturbation("hub", 0.0, 3)), 1), run(cfg, 1)
        assert np.array_equal(a.states_matrix(), b.states_matrix())
        assert a.series("edge_count").tolist() == b.series("edge_count").tolist()
        assert a.final_graph == b.final_graph

    def test_states_in_range(self):
        tr = run(SimConfig(n=100, T=30, R=1, placement=Placement(PlacementMode.HUBS, 10), sigma=1.0))
        for s in tr.snapshots:
            assert np.all(np.abs(s.states) <= 1)
            assert -1 <= s.phi_mean <= 1 and s.phi_var >= 0

    def test_single_replication(self):
        cfg = small(R=1)
        assert run_replications(cfg) == [run(cfg, 0)]

    def test_parallel_matches_serial(self):
        cfg = small(R=4)
        assert run_replications(cfg, workers=2) == run_replications(cfg)

    def test_replications_differ(self):
        trs = run_replications(small(R=3))
        x0 = [tr.snapshots[0].states for tr in trs]
        assert not np.array_equal(x0[0], x0[1]) and not np.array_equal(x0[1], x0[2])

    def test_seed_changes_output(self):
        assert run(small(master_seed=1)) != run(small(master_seed=2))

    def test_topologies(self):
        for topo in (Topology("BA", m=2), Topology("WS", k=4, p=0.1), Topology("ER", p=0.1)):
            assert len(run(small(topology=topo)).snapshots) == 11


class TestPerturbation:
    def test_resolve(self):
        g = InteractionGraph(5, [(1, 2), (1, 3), (3, 4)])
        assert Perturbation("hub").resolve(g) == 1
        assert Perturbation("periphery").resolve(g) == 2
        assert Perturbation(4).resolve(g) == 4
        with pytest.raises(InvalidParameterError):
            Perturbation(5).resolve(g)

    def test_applied_before_at_step(self):
        g = InteractionGraph(3)
        pop = make_pop([0.0, 0.5, 0.95], 0.5)
        cfg = SimConfig(n=3, T=4, rewire_enabled=False, perturbation=Perturbation(2, 0.1, 2))
        tr = simulate(pop, g, cfg, np.random.default_rng(0))
        # isolated agents: only the shift changes anything, clipped at 1
        assert [s.states[2] for s in tr.snapshots] == [0.95, 0.95, 0.95, 1.0, 1.0]

    def test_pair_divergence_zero_before(self):
        cfg = small(T=12)
        pert = cfg.replace(perturbation=Perturbation("hub", 0.1, 5))
        for r in range(3):
            d = pair_divergence(run(cfg, r), run(pert, r))
            assert np.all(d[:6] == 0)

    def test_pair_divergence_positive(self):
        cfg = SimConfig(T=15, R=1)
        d = pair_divergence(run(cfg), run(cfg.replace(perturbation=Perturbation("hub", 0.1, 5))))
        assert np.any(d[6:] > 0)

    def test_pair_divergence_length(self):
        with pytest.raises(InvalidParameterError):
            pair_divergence(run(small(T=3)), run(small(T=4)))


def fake_traj(rows):
    cfg = SimConfig(n=len(rows[0]), T=len(rows) - 1, R=1)
    g = InteractionGraph(cfg.n)
    snaps = [
        Snapshot(t, np.asarray(r, float), 0, float(np.mean(r)), float(np.var(r))) for t, r in enumerate(rows)
    ]
    return Trajectory(cfg, 0, snaps, g)


class TestDivergence:
    def test_one_agent_moves(self):
        d = divergence_series(fake_traj([[0, 0, 0, 0], [0.4, 0, 0, 0]]))
        assert d.tolist() == pytest.approx([0.1])

    def test_frozen(self):
        cfg = SimConfig(n=30, T=8, R=1, rewire_enabled=False)
        g = gen_erdos_renyi(30, 0.2, seed=0)
        tr = simulate(make_pop(np.linspace(-1, 1, 30), 0.0), g, cfg, np.random.default_rng(0))
        assert np.all(divergence_series(tr) == 0)

    def test_default_not_constant(self):
        d = divergence_series(run(SimConfig(R=1)))
        assert d.shape == (40,) and np.ptp(d) > 1e-6


def test_csv_export(tmp_path):
    trs = run_replications(small(T=3, R=2))
    p = tmp_path / "traj.csv"
    write_trajectories_csv(trs, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,replication,phi_mean,phi_var,edge_count"
    assert len(lines) == 1 + 2 * 4
    t, r, mean, var, e = lines[-1].split(",")
    s = trs[1].snapshots[3]
    assert (int(t), int(r), float(mean), float(var), int(e)) == (3, 1, s.phi_mean, s.phi_var, s.edge_count)
    q = tmp_path / "states.csv"
    write_states_csv(trs[:1], q)
    rows = q.read_text().splitlines()
    assert rows[0] == "t,replication,agent,x" and len(rows) == 1 + 4 * 40
    assert float(rows[-1].split(",")[3]) == trs[0].snapshots[3].states[39]
