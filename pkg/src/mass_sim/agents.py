"""Agent parameters, message emission ``f`` and stance update ``g``.

A population stores its parameters column-wise (one numpy array per field)
so the engine can update every agent in one vectorized pass. The scalar
functions :func:`emit_message` and :func:`update_state` define the
semantics; the ``*_all`` variants must agree with them elementwise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .graph import InteractionGraph, neighbor_sums

AMPLIFIER_GAIN = 1.5


class Archetype(enum.Enum):
    BASELINE = "baseline"
    AMPLIFIER = "amplifier"


class PlacementMode(enum.Enum):
    HUBS = "hubs"
    PERIPHERY = "periphery"
    UNIFORM_RANDOM = "uniform_random"
    NONE = "none"


@dataclass(frozen=True)
class AgentParams:
    archetype: Archetype
    alpha: float
    beta: float = 1.0
    gamma: float = AMPLIFIER_GAIN

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def gain(self) -> float:
        return self.gamma if self.archetype is Archetype.AMPLIFIER else self.beta


@dataclass(frozen=True)
class Placement:
    mode: PlacementMode = PlacementMode.NONE
    count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", PlacementMode(self.mode))
        if self.count < 0:
            raise InvalidParameterError("placement count must be >= 0")
        if self.mode is PlacementMode.NONE and self.count:
            raise InvalidParameterError("placement mode 'none' takes count 0")


@dataclass(frozen=True, eq=False)
class Population:
    """Stances plus per-agent parameters, all length ``n``."""

    states: np.ndarray
    amplifier: np.ndarray  # bool mask
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        n = self.states.shape[0]
        for name in ("amplifier", "alpha", "beta", "gamma"):
            if getattr(self, name).shape != (n,):
                raise InvalidParameterError(f"{name} length does not match states")
        if np.any(np.abs(self.states) > 1.0):
            raise InvalidParameterError("states must lie in [-1, 1]")
        if np.any((self.alpha < 0) | (self.alpha > 1)):
            raise InvalidParameterError("alpha must lie in [0, 1]")

    @property
    def n(self) -> int:
        return int(self.states.shape[0])

    @property
    def gains(self) -> np.ndarray:
        return np.where(self.amplifier, self.gamma, self.beta)

    def agent(self, i: int) -> AgentParams:
        return AgentParams(
            archetype=Archetype.AMPLIFIER if self.amplifier[i] else Archetype.BASELINE,
            alpha=float(self.alpha[i]),
            beta=float(self.beta[i]),
            gamma=float(self.gamma[i]),
        )

    @property
    def params(self) -> list[AgentParams]:
        return [self.agent(i) for i in range(self.n)]

    @property
    def amplifier_indices(self) -> np.ndarray:
        return np.flatnonzero(self.amplifier)

    def with_states(self, states: np.ndarray) -> "Population":
        return Population(np.asarray(states, dtype=np.float64), self.amplifier, self.alpha, self.beta, self.gamma)

    def permuted(self, perm) -> "Population":
        """Population where agent ``i`` moves to slot ``perm[i]``."""
        inv = np.argsort(perm)
        return Population(self.states[inv], self.amplifier[inv], self.alpha[inv], self.beta[inv], self.gamma[inv])

    def extended(self, states, alpha, beta) -> "Population":
        """Append baseline agents."""
        k = len(states)
        return Population(
            np.concatenate((self.states, np.asarray(states, dtype=np.float64))),
            np.concatenate((self.amplifier, np.zeros(k, dtype=bool))),
            np.concatenate((self.alpha, np.asarray(alpha, dtype=np.float64))),
            np.concatenate((self.beta, np.asarray(beta, dtype=np.float64))),
            np.concatenate((self.gamma, np.full(k, AMPLIFIER_GAIN))),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Population):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("states", "amplifier", "alpha", "beta", "gamma")
        )


def select_amplifiers(placement: Placement, graph: InteractionGraph, rng: np.random.Generator) -> np.ndarray:
    """Indices receiving the amplifier archetype.

    Hubs take the highest-degree nodes, periphery the lowest; ties go to the
    lower index in both cases.
    """
    n = graph.node_count
    if placement.count > n:
        raise InvalidParameterError(f"cannot place {placement.count} amplifiers among {n} agents")
    idx = np.arange(n)
    deg = np.asarray(graph.degrees)
    mode = placement.mode
    if mode is PlacementMode.NONE or placement.count == 0:
        return np.empty(0, dtype=np.int64)
    if mode is PlacementMode.HUBS:
        order = np.lexsort((idx, -deg))
    elif mode is PlacementMode.PERIPHERY:
        order = np.lexsort((idx, deg))
    else:
        order = rng.permutation(n)
    return np.sort(order[: placement.count])


def init_population(
    n: int,
    placement: Placement,
    graph: InteractionGraph,
    sigma: float = 0.2,
    seed=None,
    *,
    gamma: float = AMPLIFIER_GAIN,
    placement_seed=None,
) -> Population:
    """Draw stances ~ U(-1, 1), alpha ~ Beta(2, 2), beta ~ N(1, sigma^2) for all
    agents, then turn the placed indices into amplifiers with gain ``gamma``.

    Every agent's draws come from ``seed`` in the same order regardless of
    placement, so two placements on the same seed differ only in which agents
    amplify. Uniform-random placement draws from ``placement_seed`` (falls
    back to ``seed``'s stream after the parameter draws).
    """
    if graph.node_count != n:
        raise InvalidParameterError(f"graph has {graph.node_count} nodes, population has {n}")
    if placement.count > n:
        raise InvalidParameterError(f"cannot place {placement.count} amplifiers among {n} agents")
    if sigma < 0:
        raise InvalidParameterError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    states = rng.uniform(-1.0, 1.0, n)
    alpha = rng.beta(2.0, 2.0, n)
    beta = 1.0 + sigma * rng.standard_normal(n)
    prng = np.random.default_rng(placement_seed) if placement_seed is not None else rng
    amp = np.zeros(n, dtype=bool)
    amp[select_amplifiers(placement, graph, prng)] = True
    return Population(states, amp, alpha, beta, np.full(n, float(gamma)))


def emit_message(state: float, params: AgentParams) -> float:
    return float(np.clip(params.gain * state, -1.0, 1.0))


def update_state(state: float, params: AgentParams, neighbor_messages) -> float:
    if len(neighbor_messages) == 0:
        return state
    mean = float(np.mean(neighbor_messages))
    return float(np.clip((1.0 - params.alpha) * state + params.alpha * mean, -1.0, 1.0))


def emit_messages(pop: Population) -> np.ndarray:
    return np.clip(pop.gains * pop.states, -1.0, 1.0)


def update_states(pop: Population, messages: np.ndarray, graph: InteractionGraph) -> np.ndarray:
    """Synchronous ``g`` for every agent; isolated agents keep their stance."""
    deg = np.asarray(graph.degrees)
    sums = neighbor_sums(graph, messages)
    has = deg > 0
    mean = np.zeros_like(sums)
    mean[has] = sums[has] / deg[has]
    new = np.clip((1.0 - pop.alpha) * pop.states + pop.alpha * mean, -1.0, 1.0)
    return np.where(has, new, pop.states)
