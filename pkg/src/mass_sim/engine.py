"""Synchronous simulation of population + co-evolving graph.

Seeding
-------
A replication's randomness comes from
``SeedSequence(master_seed, spawn_key=(replication_index,))`` whose five
children feed, in order: graph construction, agent parameter draws,
uniform-random placement, the dynamics (rewiring) and agent injection.
Keeping the streams separate is what lets experiment conditions share a
base graph and agent draws while varying one factor.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .agents import (
    AMPLIFIER_GAIN,
    Placement,
    PlacementMode,
    Population,
    emit_messages,
    init_population,
    update_states,
)
from .errors import InvalidParameterError
from .graph import (
    InteractionGraph,
    gen_barabasi_albert,
    gen_erdos_renyi,
    gen_watts_strogatz,
    rewire_homophily,
)

STREAM_GRAPH, STREAM_AGENTS, STREAM_PLACEMENT, STREAM_DYNAMICS, STREAM_INJECTION = range(5)


@dataclass(frozen=True)
class Topology:
    """Graph family: ``BA`` (m), ``WS`` (k, p) or ``ER`` (p)."""

    kind: str = "BA"
    m: int = 3
    k: int = 6
    p: float = 0.08

    def __post_init__(self):
        kind = str(self.kind).upper()
        if kind not in ("BA", "WS", "ER"):
            raise InvalidParameterError(f"unsupported topology {self.kind!r}")
        object.__setattr__(self, "kind", kind)

    def build(self, n: int, seed) -> InteractionGraph:
        if self.kind == "BA":
            return gen_barabasi_albert(n, self.m, seed)
        if self.kind == "WS":
            return gen_watts_strogatz(n, self.k, self.p, seed)
        return gen_erdos_renyi(n, self.p, seed)

    def label(self) -> str:
        if self.kind == "BA":
            return f"BA(m={self.m})"
        if self.kind == "WS":
            return f"WS(k={self.k},p={self.p})"
        return f"ER(p={self.p})"

    def to_dict(self) -> dict:
        if self.kind == "BA":
            return {"kind": "BA", "m": self.m}
        if self.kind == "WS":
            return {"kind": "WS", "k": self.k, "p": self.p}
        return {"kind": "ER", "p": self.p}

    @classmethod
    def from_dict(cls, d) -> "Topology":
        if isinstance(d, str):
            return cls(kind=d)
        d = dict(d)
        kind = str(d.pop("kind", "BA")).upper()
        allowed = {"BA": {"m"}, "WS": {"k", "p"}, "ER": {"p"}}.get(kind)
        if allowed is None:
            raise InvalidParameterError(f"unsupported topology {kind!r}")
        extra = set(d) - allowed
        if extra:
            raise InvalidParameterError(f"unknown keys for {kind} topology: {sorted(extra)}")
        return cls(kind=kind, **d)


BA3 = Topology("BA", m=3)
WS6 = Topology("WS", k=6, p=0.08)


PerturbTarget = Union[str, int]


@dataclass(frozen=True)
class Perturbation:
    """Additive shift of one agent's stance just before step ``at_step``.

    ``target`` is ``"hub"`` (highest current degree), ``"periphery"``
    (lowest current degree among connected agents) or an agent index. Ties
    go to the lower index.
    """

    target: PerturbTarget = "hub"
    epsilon: float = 0.1
    at_step: int = 5

    def __post_init__(self):
        if isinstance(self.target, str):
            t = self.target.lower()
            if t not in ("hub", "periphery"):
                raise InvalidParameterError(f"unknown perturbation target {self.target!r}")
            object.__setattr__(self, "target", t)
        elif int(self.target) < 0:
            raise InvalidParameterError("perturbation index must be >= 0")
        if self.epsilon < 0:
            raise InvalidParameterError("epsilon must be >= 0")
        if self.at_step < 0:
            raise InvalidParameterError("at_step must be >= 0")

    def resolve(self, graph: InteractionGraph) -> int:
        if not isinstance(self.target, str):
            if self.target >= graph.node_count:
                raise InvalidParameterError(f"perturbation index {self.target} out of range")
            return int(self.target)
        deg = np.asarray(graph.degrees)
        if self.target == "hub":
            return int(np.argmax(deg))
        connected = np.flatnonzero(deg > 0)
        if connected.size == 0:
            return 0
        return int(connected[np.argmin(deg[connected])])


@dataclass(frozen=True)
class SimConfig:
    n: int = 300
    T: int = 40
    R: int = 30
    topology: Topology = BA3
    placement: Placement = Placement()
    sigma: float = 0.2
    rewire_enabled: bool = True
    rewire_threshold: float = 0.5
    master_seed: int = 0
    perturbation: Perturbation | None = None
    gamma: float = AMPLIFIER_GAIN

    def __post_init__(self):
        if self.n < 1 or self.T < 1 or self.R < 1:
            raise InvalidParameterError("n, T and R must all be >= 1")
        if not self.rewire_threshold > 0:
            raise InvalidParameterError("rewire_threshold must be positive")
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be >= 0")
        if self.master_seed < 0:
            raise InvalidParameterError("master_seed must be >= 0")
        if self.placement.count > self.n:
            raise InvalidParameterError("placement count exceeds n")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        pert = None
        if self.perturbation is not None:
            pert = {
                "target": self.perturbation.target,
                "epsilon": self.perturbation.epsilon,
                "at_step": self.perturbation.at_step,
            }
        return {
            "n": self.n,
            "T": self.T,
            "R": self.R,
            "topology": self.topology.to_dict(),
            "placement": {"mode": self.placement.mode.value, "count": self.placement.count},
            "sigma": self.sigma,
            "rewire_enabled": self.rewire_enabled,
            "rewire_threshold": self.rewire_threshold,
            "master_seed": self.master_seed,
            "perturbation": pert,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        if "topology" in d:
            d["topology"] = Topology.from_dict(d["topology"])
        if "placement" in d:
            pl = dict(d["placement"])
            extra = set(pl) - {"mode", "count"}
            if extra:
                raise InvalidParameterError(f"unknown placement keys: {sorted(extra)}")
            try:
                d["placement"] = Placement(PlacementMode(pl.get("mode", "none")), int(pl.get("count", 0)))
            except ValueError as exc:
                raise InvalidParameterError(str(exc)) from exc
        if d.get("perturbation") is not None:
            pt = dict(d["perturbation"])
            extra = set(pt) - {"target", "epsilon", "at_step"}
            if extra:
                raise InvalidParameterError(f"unknown perturbation keys: {sorted(extra)}")
            d["perturbation"] = Perturbation(**pt)
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidParameterError(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: int
    states: np.ndarray
    edge_count: int
    phi_mean: float
    phi_var: float

    @property
    def phi_abs(self) -> float:
        """Mean stance magnitude (extremity)."""
        return float(np.mean(np.abs(self.states)))


def snapshot(t: int, states: np.ndarray, graph: InteractionGraph) -> Snapshot:
    s = np.array(states, dtype=np.float64)
    s.setflags(write=False)
    return Snapshot(t, s, graph.edge_count, float(s.mean()), float(s.var()))


@dataclass(frozen=True, eq=False)
class Trajectory:
    config: SimConfig
    replication_index: int
    snapshots: list[Snapshot]
    final_graph: InteractionGraph | None = field(default=None, repr=False)

    def series(self, metric: str) -> np.ndarray:
        if metric == "phi_abs":
            return np.array([s.phi_abs for s in self.snapshots])
        return np.array([getattr(s, metric) for s in self.snapshots], dtype=np.float64)

    def states_matrix(self) -> np.ndarray:
        """``(T + 1, n)`` array of stances."""
        return np.vstack([s.states for s in self.snapshots])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        if self.config != other.config or self.replication_index != other.replication_index:
            return False
        if len(self.snapshots) != len(other.snapshots):
            return False
        return all(
            a.t == b.t and a.edge_count == b.edge_count and np.array_equal(a.states, b.states)
            for a, b in zip(self.snapshots, other.snapshots)
        )


def replication_streams(master_seed: int, replication_index: int) -> list[np.random.SeedSequence]:
    root = np.random.SeedSequence(master_seed, spawn_key=(replication_index,))
    return root.spawn(5)


def build_initial(config: SimConfig, replication_index: int) -> tuple[Population, InteractionGraph]:
    streams = replication_streams(config.master_seed, replication_index)
    graph = config.topology.build(config.n, streams[STREAM_GRAPH])
    pop = init_population(
        config.n,
        config.placement,
        graph,
        config.sigma,
        streams[STREAM_AGENTS],
        gamma=config.gamma,
        placement_seed=streams[STREAM_PLACEMENT],
    )
    return pop, graph


def step(
    population: Population,
    graph: InteractionGraph,
    config: SimConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Population, InteractionGraph]:
    """One synchronous update.

    Messages come from the current stances, every stance is updated from the
    current graph's neighborhoods, and only then (if enabled) is the graph
    rewired on the new stances.
    """
    if population.n != graph.node_count:
        raise InvalidParameterError(f"population has {population.n} agents, graph {graph.node_count} nodes")
    messages = emit_messages(population)
    new_states = update_states(population, messages, graph)
    new_pop = population.with_states(new_states)
    if config.rewire_enabled:
        graph = rewire_homophily(graph, new_states, config.rewire_threshold, rng)
    return new_pop, graph


def apply_perturbation(population: Population, index: int, epsilon: float) -> Population:
    states = population.states.copy()
    states[index] = min(1.0, max(-1.0, states[index] + epsilon))
    return population.with_states(states)


def simulate(
    population: Population,
    graph: InteractionGraph,
    config: SimConfig,
    rng: np.random.Generator,
    replication_index: int = 0,
    hook=None,
) -> Trajectory:
    """Advance ``config.T`` steps from a given initial condition.

    ``hook(t, population, graph, rng)`` runs before each step and may return
    a replacement ``(population, graph)``; snapshot ``t`` is recorded before
    the hook, so a change made at ``t`` first shows up at ``t + 1``.
    """
    snaps = [snapshot(0, population.states, graph)]
    pert = config.perturbation
    for t in range(config.T):
        if pert is not None and t == pert.at_step and pert.epsilon > 0:
            population = apply_perturbation(population, pert.resolve(graph), pert.epsilon)
        if hook is not None:
            out = hook(t, population, graph, rng)
            if out is not None:
                population, graph = out
        population, graph = step(population, graph, config, rng)
        snaps.append(snapshot(t + 1, population.states, graph))
    return Trajectory(config, replication_index, snaps, graph)


def run(config: SimConfig, replication_index: int = 0) -> Trajectory:
    pop, graph = build_initial(config, replication_index)
    rng = np.random.default_rng(replication_streams(config.master_seed, replication_index)[STREAM_DYNAMICS])
    return simulate(pop, graph, config, rng, replication_index)


def _run_args(args):
    return run(*args)


def run_replications(config: SimConfig, workers: int | None = None) -> list[Trajectory]:
    """All ``R`` replications, ordered by index. ``workers > 1`` uses a
    process pool; the output is identical to the serial run."""
    jobs = [(config, r) for r in range(config.R)]
    if workers is None or workers <= 1:
        return [run(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_args, jobs))


def divergence_series(traj: Trajectory) -> np.ndarray:
    """Mean absolute per-agent stance change between consecutive snapshots."""
    x = traj.states_matrix()
    if x.shape[0] < 2:
        raise InvalidParameterError("need at least one step")
    return np.mean(np.abs(np.diff(x, axis=0)), axis=1)


def pair_divergence(base: Trajectory, perturbed: Trajectory) -> np.ndarray:
    a, b = base.series("phi_mean"), perturbed.series("phi_mean")
    if a.shape != b.shape:
        raise InvalidParameterError("trajectories have different lengths")
    return np.abs(a - b)


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else str(x)


def write_trajectories_csv(trajs: list[Trajectory], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "replication", "phi_mean", "phi_var", "edge_count"])
        for tr in trajs:
            for s in tr.snapshots:
                w.writerow([s.t, tr.replication_index, _fmt(s.phi_mean), _fmt(s.phi_var), s.edge_count])


def write_states_csv(trajs: list[Trajectory], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "replication", "agent", "x"])
        for tr in trajs:
            for s in tr.snapshots:
                for i, x in enumerate(s.states.tolist()):
                    w.writerow([s.t, tr.replication_index, i, _fmt(x)])
