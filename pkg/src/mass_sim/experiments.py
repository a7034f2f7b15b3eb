"""Structural-prior experiments (P1-P4) and the four benchmark scenarios.

Every runner takes a :class:`~mass_sim.engine.SimConfig` and returns an
:class:`ExperimentReport`. Conditions inside one report reuse the same
replication seeds, so within a replication they share the base graph and
the agents' parameter draws and differ only in the manipulated factor.

Hypothesis decisions use two-sided Mann-Whitney U at ``ALPHA`` on the
per-replication summary values unless stated otherwise.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .agents import Placement, PlacementMode
from .engine import (
    BA3,
    STREAM_DYNAMICS,
    STREAM_INJECTION,
    WS6,
    Perturbation,
    SimConfig,
    Topology,
    Trajectory,
    build_initial,
    divergence_series,
    pair_divergence,
    replication_streams,
    run,
    run_replications,
    simulate,
)
from .errors import DegenerateInputError, InvalidParameterError
from .graph import InteractionGraph
from .stats import TestResult, ks_two_sample, mann_whitney_u, ols_simple, wasserstein1, wilcoxon_signed_rank

ALPHA = 0.05
CONSTANT_TOL = 1e-6
CASCADE_TOL = 0.01
RECOVERY_TOL = 0.005
INJECT_DEGREE = 3
P1_AMPLIFIERS = 10
P3_EPSILON = 0.1
P3_AT_STEP = 5
P3_HORIZON = 10


@dataclass
class MetricSeries:
    """Per-replication time series, shape ``(R, L)``, first column at ``t_start``."""

    values: np.ndarray
    t_start: int = 0

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        ddof = 1 if self.values.shape[0] > 1 else 0
        return self.values.std(axis=0, ddof=ddof)

    @property
    def final(self) -> np.ndarray:
        return self.values[:, -1]


@dataclass
class ExperimentReport:
    experiment_id: str
    conditions: list[str]
    metric: str
    series: dict[str, MetricSeries]
    tests: dict[str, TestResult] = field(default_factory=dict)
    h0_rejected: dict[str, bool] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(
            {
                "experiment_id": self.experiment_id,
                "conditions": self.conditions,
                "metric": self.metric,
                "config": self.config,
                "aggregates": {
                    name: {"t_start": s.t_start, "mean": s.mean.tolist(), "std": s.std.tolist()}
                    for name, s in self.series.items()
                },
                "tests": {k: v.to_dict() for k, v in self.tests.items()},
                "h0_rejected": self.h0_rejected,
                "summary": self.summary,
            }
        )

    def write(self, out_dir, stem: str | None = None) -> list[Path]:
        """Write ``<stem>.json`` and ``<stem>_series.csv`` (condition,
        replication, t, value)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.experiment_id.lower()
        jpath = out / f"{stem}.json"
        cpath = out / f"{stem}_series.csv"
        jpath.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(cpath, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["condition", "replication", "t", "value"])
            for name, s in self.series.items():
                for r, row in enumerate(s.values.tolist()):
                    for j, v in enumerate(row):
                        w.writerow([name, r, s.t_start + j, _num(v)])
        return [jpath, cpath]


def _num(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "" if v is None else str(v)
    return repr(float(v))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _stack(trajs: Sequence[Trajectory], metric: str) -> MetricSeries:
    return MetricSeries(np.vstack([t.series(metric) for t in trajs]))


def _w1_series(traj: Trajectory) -> np.ndarray:
    x = traj.states_matrix()
    return np.array([wasserstein1(x[t - 1], x[t]) for t in range(1, x.shape[0])])


def _mwu(a, b) -> TestResult:
    return mann_whitney_u(a, b)


def _decide(test: TestResult | None) -> bool:
    return test is not None and test.rejects(ALPHA)


def _unique_names(names: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for nm in names:
        seen[nm] = seen.get(nm, 0) + 1
        out.append(nm if seen[nm] == 1 else f"{nm}#{seen[nm]}")
    return out


def _pooled_se(a: np.ndarray, b: np.ndarray) -> float:
    if a.size < 2 or b.size < 2:
        return math.nan
    return math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)


# --- P1 ---------------------------------------------------------------------

def expt_p1(config: SimConfig, amplifier_count: int = P1_AMPLIFIERS) -> ExperimentReport:
    """Amplifier placement: none vs hubs vs periphery on a shared graph.

    The primary metric is the mean stance ``phi_mean``. Mean stance
    magnitude ``phi_abs`` is reported alongside (series suffixed ``|phi_abs``)
    because the dynamics are symmetric under ``x -> -x``.
    """
    placements = {
        "uniform": Placement(PlacementMode.NONE, 0),
        "hub": Placement(PlacementMode.HUBS, amplifier_count),
        "periphery": Placement(PlacementMode.PERIPHERY, amplifier_count),
    }
    runs = {name: run_replications(config.replace(placement=pl)) for name, pl in placements.items()}
    series = {name: _stack(tr, "phi_mean") for name, tr in runs.items()}
    for name, tr in runs.items():
        series[f"{name}|phi_abs"] = _stack(tr, "phi_abs")
    tests = {
        "hub_vs_uniform": _mwu(series["hub"].final, series["uniform"].final),
        "hub_vs_periphery": _mwu(series["hub"].final, series["periphery"].final),
        "hub_vs_uniform|phi_abs": _mwu(series["hub|phi_abs"].final, series["uniform|phi_abs"].final),
        "hub_vs_periphery|phi_abs": _mwu(series["hub|phi_abs"].final, series["periphery|phi_abs"].final),
    }
    finals = {name: float(series[name].final.mean()) for name in placements}
    finals_abs = {name: float(series[f"{name}|phi_abs"].final.mean()) for name in placements}
    summary = {
        "mean_final_phi_mean": finals,
        "mean_final_phi_abs": finals_abs,
        "ordering_hub_periphery_uniform": finals["hub"] > finals["periphery"] > finals["uniform"],
        "ordering_hub_periphery_uniform|phi_abs": finals_abs["hub"] > finals_abs["periphery"] > finals_abs["uniform"],
        "underpowered": any(t.underpowered for t in tests.values()),
        "amplifier_count": amplifier_count,
    }
    return ExperimentReport(
        "P1",
        list(placements),
        "phi_mean",
        series,
        tests,
        {k: _decide(v) for k, v in tests.items()},
        summary,
        config.to_dict(),
    )


# --- P2 ---------------------------------------------------------------------

def expt_p2(config: SimConfig, topologies: Sequence[Topology] = (BA3, WS6)) -> ExperimentReport:
    """Same agents on two topologies; metric is the stance variance."""
    if len(topologies) != 2:
        raise InvalidParameterError("P2 compares exactly two topologies")
    names = _unique_names([t.label() for t in topologies])
    runs = [run_replications(config.replace(topology=t)) for t in topologies]
    series = {nm: _stack(tr, "phi_var") for nm, tr in zip(names, runs)}
    a, b = series[names[0]].final, series[names[1]].final
    test = _mwu(a, b)
    se = _pooled_se(a, b)
    gap = abs(float(a.mean() - b.mean()))
    summary = {
        "mean_final_phi_var": {nm: float(series[nm].final.mean()) for nm in names},
        "abs_gap": gap,
        "pooled_se": se,
        "gap_in_se": gap / se if se and se > 0 else None,
        "underpowered": test.underpowered,
    }
    return ExperimentReport(
        "P2", names, "phi_var", series, {"topology": test}, {"topology": _decide(test)}, summary, config.to_dict()
    )


# --- P3 ---------------------------------------------------------------------

def expt_p3(
    config: SimConfig,
    epsilon: float | None = None,
    at_step: int | None = None,
    horizon: int = P3_HORIZON,
) -> ExperimentReport:
    """Part A: is the per-step stance change ``D(t)`` constant?
    Part B: paired hub vs periphery perturbations of size ``epsilon``.

    ``epsilon``/``at_step`` default to the config's perturbation, else
    ``P3_EPSILON`` at step ``P3_AT_STEP``.
    """
    pert = config.perturbation
    eps = epsilon if epsilon is not None else (pert.epsilon if pert else P3_EPSILON)
    at = at_step if at_step is not None else (pert.at_step if pert else P3_AT_STEP)
    at = min(at, config.T - 1)
    base_cfg = config.replace(perturbation=None)
    base = run_replications(base_cfg)
    d_series = MetricSeries(np.vstack([divergence_series(t) for t in base]), t_start=1)
    d_mean = d_series.mean
    d_range = float(d_mean.max() - d_mean.min())

    div = {}
    for target in ("hub", "periphery"):
        cfg = base_cfg.replace(perturbation=Perturbation(target, eps, at))
        rows = [pair_divergence(base[r], run(cfg, r)) for r in range(config.R)]
        div[target] = MetricSeries(np.vstack(rows))
    h_t = min(at + horizon, config.T)
    hub_h, peri_h = div["hub"].values[:, h_t], div["periphery"].values[:, h_t]
    frac = float(np.mean(hub_h > peri_h))

    tests: dict[str, TestResult] = {}
    try:
        tests["hub_exceeds_periphery"] = wilcoxon_signed_rank(hub_h - peri_h, alternative="greater")
    except DegenerateInputError:
        pass
    h0 = {
        "D_constant": d_range > CONSTANT_TOL,
        "hub_exceeds_periphery": _decide(tests.get("hub_exceeds_periphery")),
    }
    summary = {
        "D_range": d_range,
        "constant_tolerance": CONSTANT_TOL,
        "epsilon": eps,
        "at_step": at,
        "horizon_t": h_t,
        "mean_divergence_at_horizon": {"hub": float(hub_h.mean()), "periphery": float(peri_h.mean())},
        "fraction_hub_exceeds_periphery": frac,
    }
    series = {"D": d_series, "divergence_hub": div["hub"], "divergence_periphery": div["periphery"]}
    return ExperimentReport("P3", list(series), "D", series, tests, h0, summary, config.to_dict())


# --- P4 ---------------------------------------------------------------------

def expt_p4(config: SimConfig) -> ExperimentReport:
    """Consecutive-step Wasserstein-1 drift of the stance distribution plus a
    KS test between the pooled first and last distributions."""
    trajs = run_replications(config)
    w1 = MetricSeries(np.vstack([_w1_series(t) for t in trajs]), t_start=1)
    first = np.concatenate([t.snapshots[0].states for t in trajs])
    last = np.concatenate([t.snapshots[-1].states for t in trajs])
    ks = ks_two_sample(first, last)
    tests = {"first_vs_last": ks}
    try:
        tests["w1_positive"] = wilcoxon_signed_rank(w1.mean, alternative="greater")
    except DegenerateInputError:
        pass
    summary = {
        "mean_w1": float(w1.values.mean()),
        "w1_identically_zero": bool(np.all(w1.values == 0)),
        "ks_D": ks.statistic,
    }
    h0 = {"stationary": _decide(ks), "w1_positive": _decide(tests.get("w1_positive"))}
    return ExperimentReport("P4", ["all"], "W1", {"W1": w1}, tests, h0, summary, config.to_dict())


# --- benchmarks -------------------------------------------------------------

def _last_quarter_slope(y: np.ndarray) -> float:
    q = max(2, math.ceil(y.size / 4))
    t = np.arange(y.size, dtype=np.float64)[-q:]
    return ols_simple(t, y[-q:]).slope


def bench_stability(config: SimConfig) -> ExperimentReport:
    """Drift of the stance distribution and convergence of mean / variance."""
    trajs = run_replications(config)
    series = {
        "W1": MetricSeries(np.vstack([_w1_series(t) for t in trajs]), t_start=1),
        "phi_mean": _stack(trajs, "phi_mean"),
        "phi_var": _stack(trajs, "phi_var"),
    }
    slopes = {
        m: [_last_quarter_slope(row) for row in series[m].values] for m in ("phi_mean", "phi_var")
    }
    summary = {
        "mean_w1": float(series["W1"].values.mean()),
        "last_quarter_slope": {m: float(np.mean(v)) for m, v in slopes.items()},
        "last_quarter_slope_per_replication": slopes,
        "phi_var_initial": float(series["phi_var"].values[:, 0].mean()),
        "phi_var_final": float(series["phi_var"].final.mean()),
    }
    tests = {}
    try:
        tests["w1_positive"] = wilcoxon_signed_rank(series["W1"].mean, alternative="greater")
    except DegenerateInputError:
        pass
    h0 = {"stationary": _decide(tests.get("w1_positive"))}
    return ExperimentReport("Stability", ["all"], "W1", series, tests, h0, summary, config.to_dict())


def _injection_hook(config: SimConfig, r: int, inject_count: int, inject_bias: float, at_step: int):
    rng = np.random.default_rng(replication_streams(config.master_seed, r)[STREAM_INJECTION])

    def hook(t, pop, graph: InteractionGraph, _dyn_rng):
        if t != at_step or inject_count == 0:
            return None
        n = pop.n
        bias = min(1.0, max(-1.0, inject_bias))
        new_pop = pop.extended(np.full(inject_count, bias), np.zeros(inject_count), np.ones(inject_count))
        edges = [tuple(e) for e in graph.edge_array.tolist()]
        deg = min(INJECT_DEGREE, n)
        for j in range(inject_count):
            for target in rng.choice(n, size=deg, replace=False).tolist():
                edges.append((target, n + j))
        return new_pop, InteractionGraph(n + inject_count, edges)

    return hook


def bench_perturbation(
    config: SimConfig, inject_count: int = 10, inject_bias: float = 1.0, at_step: int = 10
) -> ExperimentReport:
    """Inject ``inject_count`` unwavering agents (stance ``inject_bias``,
    alpha 0) at ``at_step`` and compare against an uninjected control run on
    the same seeds.

    Outcomes are measured over the original agents only: ``shift`` is the
    phi_mean difference to control, the cascade size counts original agents
    whose final stance differs from control by more than ``CASCADE_TOL``, and
    recovery is the first ``t > at_step`` with ``|shift| < RECOVERY_TOL``.
    """
    if inject_count < 0:
        raise InvalidParameterError("inject_count must be >= 0")
    if not 0 <= at_step < config.T:
        raise InvalidParameterError("at_step must lie in [0, T)")
    n = config.n
    ctrl_rows, inj_rows, cascades, recoveries = [], [], [], []
    for r in range(config.R):
        pop, graph = build_initial(config, r)
        dyn = lambda: np.random.default_rng(replication_streams(config.master_seed, r)[STREAM_DYNAMICS])
        ctrl = simulate(pop, graph, config, dyn(), r)
        inj = simulate(pop, graph, config, dyn(), r, hook=_injection_hook(config, r, inject_count, inject_bias, at_step))
        c_mean = np.array([s.states[:n].mean() for s in ctrl.snapshots])
        i_mean = np.array([s.states[:n].mean() for s in inj.snapshots])
        ctrl_rows.append(c_mean)
        inj_rows.append(i_mean)
        diff = np.abs(inj.snapshots[-1].states[:n] - ctrl.snapshots[-1].states[:n])
        cascades.append(int(np.sum(diff > CASCADE_TOL)))
        if inject_count == 0:
            recoveries.append(at_step)
        else:
            gap = np.abs(i_mean - c_mean)
            hit = [t for t in range(at_step + 1, config.T + 1) if gap[t] < RECOVERY_TOL]
            recoveries.append(hit[0] if hit else None)
    ctrl_s = MetricSeries(np.vstack(ctrl_rows))
    inj_s = MetricSeries(np.vstack(inj_rows))
    shift = MetricSeries(inj_s.values - ctrl_s.values)
    final_shift = shift.final
    tests = {}
    if np.any(final_shift != 0):
        tests["no_shift"] = wilcoxon_signed_rank(final_shift)
    reached = [x for x in recoveries if x is not None]
    summary = {
        "inject_count": inject_count,
        "inject_bias": inject_bias,
        "at_step": at_step,
        "mean_final_shift": float(final_shift.mean()),
        "cascade_size": cascades,
        "mean_cascade_size": float(np.mean(cascades)),
        "recovery_time": recoveries,
        "mean_recovery_time": float(np.mean(reached)) if reached else None,
    }
    series = {"control": ctrl_s, "injected": inj_s, "shift": shift}
    h0 = {"no_shift": _decide(tests.get("no_shift"))}
    return ExperimentReport("Perturbation", ["control", "injected"], "phi_mean", series, tests, h0, summary, config.to_dict())


def _placement_name(p: Placement) -> str:
    if p.mode is PlacementMode.NONE or p.count == 0:
        return "all_baseline"
    return f"{p.count}_amplifiers_{p.mode.value}"


def bench_heterogeneity(
    config: SimConfig, compositions: Sequence[Placement], names: Sequence[str] | None = None
) -> ExperimentReport:
    """Run each archetype composition on identical graphs and seeds."""
    if not compositions:
        raise InvalidParameterError("need at least one composition")
    names = _unique_names(list(names) if names else [_placement_name(c) for c in compositions])
    series = {}
    for nm, comp in zip(names, compositions):
        trajs = run_replications(config.replace(placement=comp))
        series[nm] = _stack(trajs, "phi_mean")
        series[f"{nm}|phi_var"] = _stack(trajs, "phi_var")
    tests = {f"{a}_vs_{b}": _mwu(series[a].final, series[b].final) for a, b in combinations(names, 2)}
    summary = {
        "mean_final_phi_mean": {nm: float(series[nm].final.mean()) for nm in names},
        "mean_final_phi_var": {nm: float(series[f"{nm}|phi_var"].final.mean()) for nm in names},
    }
    return ExperimentReport(
        "Heterogeneity", names, "phi_mean", series, tests, {k: _decide(v) for k, v in tests.items()}, summary, config.to_dict()
    )


def _as_topology(t) -> Topology:
    if isinstance(t, Topology):
        return t
    return Topology.from_dict(t)


def _half_variance_time(phi_var: np.ndarray):
    target = phi_var[0] / 2.0
    if phi_var[0] <= 0:
        return None
    hits = np.flatnonzero(phi_var <= target)
    return int(hits[0]) if hits.size else None


def bench_topology(config: SimConfig, topologies: Sequence) -> ExperimentReport:
    """Same agents and seeds across topologies. Diffusion speed is proxied by
    the time until the stance variance first halves."""
    if not topologies:
        raise InvalidParameterError("need at least one topology")
    topos = [_as_topology(t) for t in topologies]
    names = _unique_names([t.label() for t in topos])
    series, half = {}, {}
    for nm, topo in zip(names, topos):
        trajs = run_replications(config.replace(topology=topo))
        series[nm] = _stack(trajs, "phi_var")
        series[f"{nm}|phi_mean"] = _stack(trajs, "phi_mean")
        series[f"{nm}|W1"] = MetricSeries(np.vstack([_w1_series(t) for t in trajs]), t_start=1)
        times = [_half_variance_time(row) for row in series[nm].values]
        reached = [x for x in times if x is not None]
        half[nm] = {"per_replication": times, "mean": float(np.mean(reached)) if reached else None}
    tests = {f"{a}_vs_{b}": _mwu(series[a].final, series[b].final) for a, b in combinations(names, 2)}
    summary = {
        "time_to_half_variance": half,
        "mean_final_phi_var": {nm: float(series[nm].final.mean()) for nm in names},
    }
    return ExperimentReport(
        "Topology", names, "phi_var", series, tests, {k: _decide(v) for k, v in tests.items()}, summary, config.to_dict()
    )


EXPERIMENTS = {"p1": expt_p1, "p2": expt_p2, "p3": expt_p3, "p4": expt_p4}
