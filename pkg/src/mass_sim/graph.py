"""Undirected interaction graphs: generators, queries, degree partitions and
homophily rewiring.

Graphs are immutable. Edges are stored as a sorted ``(E, 2)`` integer array
with ``u < v`` in every row, which keeps neighbor aggregation vectorizable
(see :func:`neighbor_sums`) and makes edge sets cheap to compare.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InvalidIndexError, InvalidParameterError

__all__ = [
    "InteractionGraph",
    "DegreePartition",
    "gen_barabasi_albert",
    "gen_watts_strogatz",
    "gen_erdos_renyi",
    "neighbors",
    "degree_partition",
    "rewire_homophily",
    "neighbor_sums",
    "write_edge_list",
    "read_edge_list",
]


def _canonical_edges(n: int, pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    if np.any(lo == hi):
        raise InvalidParameterError("self-loops are not allowed")
    if lo.min() < 0 or hi.max() >= n:
        raise InvalidIndexError(f"edge endpoint outside [0, {n})")
    keys = np.unique(lo * n + hi)
    if keys.size != arr.shape[0]:
        raise InvalidParameterError("duplicate edges are not allowed")
    return np.column_stack((keys // n, keys % n))


class InteractionGraph:
    """Simple undirected graph over nodes ``0..node_count-1``."""

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]] | np.ndarray = ()):
        if int(node_count) < 1:
            raise InvalidParameterError("node_count must be positive")
        self.node_count = int(node_count)
        arr = _canonical_edges(self.node_count, list(edges) if not isinstance(edges, np.ndarray) else edges)
        arr.setflags(write=False)
        self.edge_array = arr

    @classmethod
    def _trusted(cls, node_count: int, keys: np.ndarray) -> "InteractionGraph":
        # keys are already unique, sorted u*n+v codes with u < v
        g = cls.__new__(cls)
        g.node_count = node_count
        arr = np.column_stack((keys // node_count, keys % node_count)).astype(np.int64)
        arr.setflags(write=False)
        g.edge_array = arr
        return g

    @property
    def edge_count(self) -> int:
        return int(self.edge_array.shape[0])

    @cached_property
    def edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(map(tuple, self.edge_array.tolist()))

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.edge_array.ravel(), minlength=self.node_count)
        deg.setflags(write=False)
        return deg

    @cached_property
    def adjacency(self) -> tuple[frozenset[int], ...]:
        adj: list[set[int]] = [set() for _ in range(self.node_count)]
        for u, v in self.edge_array.tolist():
            adj[u].add(v)
            adj[v].add(u)
        return tuple(frozenset(s) for s in adj)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def relabel(self, perm) -> "InteractionGraph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return InteractionGraph(self.node_count, perm[self.edge_array])

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionGraph):
            return NotImplemented
        return self.node_count == other.node_count and np.array_equal(self.edge_array, other.edge_array)

    def __hash__(self) -> int:
        return hash((self.node_count, self.edge_array.tobytes()))

    def __repr__(self) -> str:
        return f"InteractionGraph(node_count={self.node_count}, edge_count={self.edge_count})"


@dataclass(frozen=True)
class DegreePartition:
    hub: frozenset[int]
    mid: frozenset[int]
    periphery: frozenset[int]

    def group_of(self, i: int) -> str:
        if i in self.hub:
            return "hub"
        if i in self.periphery:
            return "periphery"
        return "mid"


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_barabasi_albert(n: int, m: int, seed=None) -> InteractionGraph:
    """Preferential attachment grown from an ``m``-node clique.

    Each new node links to ``m`` distinct existing nodes drawn without
    replacement with probability proportional to current degree. The edge
    count is ``m(m-1)/2 + m(n-m)``.
    """
    if m < 1 or n <= m:
        raise InvalidParameterError(f"need n > m >= 1, got n={n}, m={m}")
    rng = _rng(seed)
    deg = np.zeros(n, dtype=np.float64)
    edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    deg[:m] = m - 1
    for new in range(m, n):
        w = deg[:new]
        total = w.sum()
        p = w / total if total > 0 else None
        targets = rng.choice(new, size=m, replace=False, p=p)
        for t in targets.tolist():
            edges.append((t, new))
        deg[targets] += 1
        deg[new] = m
    return InteractionGraph(n, edges)


def gen_watts_strogatz(n: int, k: int, p: float, seed=None) -> InteractionGraph:
    """Ring lattice of even degree ``k`` with each lattice edge rewired
    independently with probability ``p`` to a uniform non-neighbor.
    """
    if k < 2 or k % 2 or k >= n:
        raise InvalidParameterError(f"need even k with 2 <= k < n, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p must lie in [0, 1], got {p}")
    rng = _rng(seed)
    adj: list[set[int]] = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, k // 2 + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    if p > 0:
        for j in range(1, k // 2 + 1):
            for u in range(n):
                v = (u + j) % n
                if v not in adj[u] or rng.random() >= p:
                    continue
                if len(adj[u]) >= n - 1:
                    continue
                mask = np.ones(n, dtype=bool)
                mask[u] = False
                mask[list(adj[u])] = False
                choices = np.flatnonzero(mask)
                w = int(choices[rng.integers(choices.size)])
                adj[u].discard(v)
                adj[v].discard(u)
                adj[u].add(w)
                adj[w].add(u)
    edges = [(u, v) for u in range(n) for v in adj[u] if u < v]
    return InteractionGraph(n, edges)


def gen_erdos_renyi(n: int, p: float, seed=None) -> InteractionGraph:
    """G(n, p): each unordered pair is an edge independently with probability ``p``."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"p must lie in [0, 1], got {p}")
    rng = _rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return InteractionGraph._trusted(n, iu[keep].astype(np.int64) * n + ju[keep])


def neighbors(g: InteractionGraph, i: int) -> frozenset[int]:
    if not 0 <= i < g.node_count:
        raise InvalidIndexError(f"node {i} outside [0, {g.node_count})")
    return g.adjacency[i]


def _nearest_rank(sorted_vals: np.ndarray, pct: float) -> int:
    rank = max(1, math.ceil(pct / 100.0 * sorted_vals.size))
    return int(sorted_vals[rank - 1])


def degree_partition(g: InteractionGraph) -> DegreePartition:
    """Split the nodes of ``g`` into hub / mid / periphery by degree quartiles.

    See :func:`partition_degrees` for the rule.
    """
    return partition_degrees(g.degrees)


def partition_degrees(degrees) -> DegreePartition:
    """Split indices of a degree array into hub / mid / periphery.

    Percentiles use the nearest-rank method. Hubs have degree at or above the
    75th percentile, periphery at or below the 25th. When both quartiles
    coincide the tied value is assigned to the extreme it sits on (the
    minimum degree goes to periphery, the maximum to hub, anything in
    between to mid). A constant-degree graph is all mid.
    """
    deg = np.asarray(degrees)
    if deg.ndim != 1 or deg.size == 0:
        raise InvalidParameterError("degrees must be a non-empty 1-D array")
    nodes = np.arange(deg.size)
    lo_deg, hi_deg = int(deg.min()), int(deg.max())
    if lo_deg == hi_deg:
        return DegreePartition(frozenset(), frozenset(nodes.tolist()), frozenset())
    s = np.sort(deg)
    q25, q75 = _nearest_rank(s, 25), _nearest_rank(s, 75)
    if q25 < q75:
        hub_mask = deg >= q75
        peri_mask = deg <= q25
    elif q25 == lo_deg:
        hub_mask = deg > q25
        peri_mask = deg <= q25
    elif q75 == hi_deg:
        hub_mask = deg >= q75
        peri_mask = deg < q75
    else:
        hub_mask = deg > q75
        peri_mask = deg < q25
    mid_mask = ~(hub_mask | peri_mask)
    return DegreePartition(
        hub=frozenset(nodes[hub_mask].tolist()),
        mid=frozenset(nodes[mid_mask].tolist()),
        periphery=frozenset(nodes[peri_mask].tolist()),
    )


def rewire_homophily(g: InteractionGraph, states, threshold: float, seed=None) -> InteractionGraph:
    """Drop every edge whose endpoint stances differ by ``>= threshold`` and
    add one replacement per dropped edge.

    Removed edges are processed in sorted order. For each, one endpoint is
    picked uniformly and linked to a uniform random node within
    ``threshold`` of its stance that is not already a neighbor. If there is
    no such node the replacement is skipped.
    """
    x = np.asarray(states, dtype=np.float64)
    n = g.node_count
    if x.shape != (n,):
        raise InvalidParameterError(f"expected {n} states, got shape {x.shape}")
    if not threshold > 0:
        raise InvalidParameterError("threshold must be positive")
    e = g.edge_array
    far = np.abs(x[e[:, 0]] - x[e[:, 1]]) >= threshold
    if not far.any():
        return g
    rng = _rng(seed)
    kept = e[~far]
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in kept.tolist():
        adj[u].add(v)
        adj[v].add(u)
    added: list[tuple[int, int]] = []
    for u, v in e[far].tolist():
        a = u if rng.random() < 0.5 else v
        mask = np.abs(x - x[a]) < threshold
        mask[a] = False
        if adj[a]:
            mask[list(adj[a])] = False
        cands = np.flatnonzero(mask)
        if cands.size == 0:
            continue
        b = int(cands[rng.integers(cands.size)])
        adj[a].add(b)
        adj[b].add(a)
        added.append((a, b) if a < b else (b, a))
    if added:
        new = np.asarray(added, dtype=np.int64)
        keys = np.concatenate((kept[:, 0] * n + kept[:, 1], new[:, 0] * n + new[:, 1]))
    else:
        keys = kept[:, 0] * n + kept[:, 1]
    return InteractionGraph._trusted(n, np.sort(keys))


def neighbor_sums(g: InteractionGraph, values: np.ndarray) -> np.ndarray:
    """Per-node sum of ``values`` over neighbors."""
    u, v = g.edge_array[:, 0], g.edge_array[:, 1]
    n = g.node_count
    return np.bincount(u, weights=values[v], minlength=n) + np.bincount(v, weights=values[u], minlength=n)


def write_edge_list(g: InteractionGraph, path) -> None:
    """Write ``u,v`` CSV, one edge per row, ``u < v``, lexicographic order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v"])
        w.writerows(g.edge_array.tolist())


def read_edge_list(path, node_count: int) -> InteractionGraph:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return InteractionGraph(node_count, [(int(r["u"]), int(r["v"])) for r in rows])
