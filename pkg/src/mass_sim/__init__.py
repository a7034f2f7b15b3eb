"""Heterogeneous agents on co-evolving networks.

Stance dynamics with per-agent susceptibility and message gain, homophily
rewiring, the four structural-prior experiments, benchmark scenarios, and
the same statistics applied to real post/reply logs.
"""

__version__ = "0.1.0"

from .agents import (
    AgentParams,
    Archetype,
    Placement,
    PlacementMode,
    Population,
    emit_message,
    init_population,
    update_state,
)
from .engine import (
    Perturbation,
    SimConfig,
    Snapshot,
    Topology,
    Trajectory,
    divergence_series,
    pair_divergence,
    run,
    run_replications,
    step,
)
from .errors import DegenerateInputError, InvalidIndexError, InvalidParameterError, MassError
from .graph import (
    DegreePartition,
    InteractionGraph,
    degree_partition,
    gen_barabasi_albert,
    gen_erdos_renyi,
    gen_watts_strogatz,
    neighbors,
    partition_degrees,
    rewire_homophily,
)
