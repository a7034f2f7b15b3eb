"""Interaction-log pipeline: load post/reply records, build cumulative
reply networks per time bin, and run the empirical P1-P4 analyses on
log-transformed karma.

Input is line-delimited JSON (one object per line) or CSV, both with the
fields ``id``, ``author``, ``parent_id``, ``created_at``, ``karma``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, InvalidParameterError
from .experiments import ExperimentReport, MetricSeries
from .graph import DegreePartition, InteractionGraph, degree_partition
from .stats import (
    TestResult,
    kruskal_wallis,
    ks_two_sample,
    mann_whitney_u,
    ols_simple,
    spearman_rho,
    wasserstein1,
    wilcoxon_signed_rank,
)

log = logging.getLogger(__name__)

FIELDS = ("id", "author", "parent_id", "created_at", "karma")
GROUPS = ("hub", "mid", "periphery")


class LogFormatError(InvalidParameterError):
    pass


@dataclass(frozen=True)
class InteractionRecord:
    id: str
    author: str
    parent_id: str | None
    created_at: int
    karma: int


class RecordLog(list):
    """List of records that also remembers how many input lines were skipped."""

    def __init__(self, records=(), malformed: int = 0):
        super().__init__(records)
        self.malformed = malformed

    @property
    def dangling(self) -> int:
        ids = {r.id for r in self}
        return sum(1 for r in self if r.parent_id is not None and r.parent_id not in ids)


def _parse(obj: dict) -> InteractionRecord:
    rid, author = obj.get("id"), obj.get("author")
    if rid in (None, "") or author in (None, ""):
        raise ValueError("missing id or author")
    parent = obj.get("parent_id")
    if parent in ("", "null", "None"):
        parent = None
    created = obj["created_at"]
    karma = obj["karma"]
    if isinstance(created, float) and not created.is_integer():
        raise ValueError("created_at must be integral")
    return InteractionRecord(str(rid), str(author), None if parent is None else str(parent), int(created), int(karma))


def load_log(path) -> RecordLog:
    """Read a ``.jsonl`` / ``.csv`` log. Malformed lines are skipped and
    counted; duplicate ids raise :class:`LogFormatError`."""
    path = Path(path)
    rows: list[dict | None] = []
    with open(path, newline="") as fh:
        if path.suffix.lower() == ".csv":
            for row in csv.DictReader(fh):
                rows.append(row)
        else:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    obj = None
                rows.append(obj if isinstance(obj, dict) else None)
    records, malformed, seen = [], 0, set()
    for obj in rows:
        try:
            if obj is None:
                raise ValueError("not an object")
            rec = _parse(obj)
        except (KeyError, ValueError, TypeError):
            malformed += 1
            continue
        if rec.id in seen:
            raise LogFormatError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        records.append(rec)
    if malformed:
        log.warning("%s: skipped %d malformed line(s)", path, malformed)
    return RecordLog(records, malformed)


@dataclass(frozen=True, eq=False)
class Bin:
    bin_index: int
    authors: tuple[str, ...]
    graph: InteractionGraph
    karma: np.ndarray  # cumulative, aligned with authors
    partition: DegreePartition

    @property
    def log_karma(self) -> np.ndarray:
        return signed_log(self.karma)


@dataclass(frozen=True, eq=False)
class BinnedSeries:
    bin_duration: int
    bins: list[Bin]
    authors: tuple[str, ...]
    dangling: int = 0
    self_replies: int = 0
    origin: int = 0
    meta: dict = field(default_factory=dict)


def signed_log(k):
    """``sign(k) * ln(1 + |k|)``; works elementwise on arrays."""
    if np.isscalar(k):
        return math.copysign(math.log1p(abs(k)), k) if k else 0.0
    a = np.asarray(k, dtype=np.float64)
    return np.sign(a) * np.log1p(np.abs(a))


def build_binned_series(records, bin_duration: int) -> BinnedSeries:
    """Cumulative reply networks at each bin boundary.

    Bin ``k`` covers ``created_at`` in ``[origin + k*d, origin + (k+1)*d)``
    where ``origin`` is the earliest timestamp; the bin-``k`` graph and karma
    include every record up to the end of that bin. Authors are indexed in
    order of first involvement, so each bin's node set is a prefix of the
    full author list.
    """
    if not bin_duration > 0:
        raise InvalidParameterError("bin_duration must be positive")
    records = list(records)
    if not records:
        raise InvalidParameterError("no records")
    order = sorted(range(len(records)), key=lambda i: (records[i].created_at, i))
    recs = [records[i] for i in order]
    by_id = {r.id: r for r in recs}
    origin = recs[0].created_at
    n_bins = (recs[-1].created_at - origin) // bin_duration + 1

    index: dict[str, int] = {}
    karma: list[int] = []
    edges: set[tuple[int, int]] = set()
    dangling = self_replies = 0
    bins: list[Bin] = []

    def involve(author: str) -> int:
        if author not in index:
            index[author] = len(index)
            karma.append(0)
        return index[author]

    def close(k: int) -> None:
        n = len(index)
        g = InteractionGraph(max(n, 1), sorted(edges))
        bins.append(Bin(k, tuple(index)[:n], g, np.array(karma, dtype=np.int64), degree_partition(g)))

    pos = 0
    for k in range(n_bins):
        end = origin + (k + 1) * bin_duration
        while pos < len(recs) and recs[pos].created_at < end:
            r = recs[pos]
            pos += 1
            i = involve(r.author)
            karma[i] += r.karma
            if r.parent_id is None:
                continue
            parent = by_id.get(r.parent_id)
            if parent is None:
                dangling += 1
                continue
            if parent.author == r.author:
                self_replies += 1
                continue
            j = involve(parent.author)
            edges.add((min(i, j), max(i, j)))
        close(k)
    if dangling:
        log.info("%d repl(y/ies) reference parents missing from the log", dangling)
    return BinnedSeries(int(bin_duration), bins, tuple(index), dangling, self_replies, origin)


def _group_values(b: Bin, group: str) -> np.ndarray:
    members = sorted(getattr(b.partition, group))
    return b.log_karma[members]


def empirical_p1_p2(series: BinnedSeries) -> tuple[ExperimentReport, ExperimentReport]:
    """Per bin and degree group: mean of |log karma| (P1) and variance of log
    karma (P2). P1 carries a per-bin Kruskal-Wallis across the groups and a
    hub-vs-periphery Mann-Whitney; P2 compares squared deviations from each
    group's mean the same way. Statistics for an empty group are NaN."""
    if not series.bins:
        raise InvalidParameterError("series has no bins")
    nb = len(series.bins)
    p1 = {g: np.full((1, nb), np.nan) for g in GROUPS}
    p2 = {g: np.full((1, nb), np.nan) for g in GROUPS}
    tests1: dict[str, TestResult] = {}
    tests2: dict[str, TestResult] = {}
    sizes = []
    for b in series.bins:
        vals = {g: _group_values(b, g) for g in GROUPS}
        sizes.append({g: int(v.size) for g, v in vals.items()})
        sqdev = {}
        for g, v in vals.items():
            if v.size:
                p1[g][0, b.bin_index] = np.mean(np.abs(v))
                p2[g][0, b.bin_index] = np.var(v)
                sqdev[g] = (v - v.mean()) ** 2
        nonempty = [g for g in GROUPS if vals[g].size]
        if len(nonempty) >= 2:
            tests1[f"kw_bin{b.bin_index}"] = kruskal_wallis([vals[g] for g in nonempty])
            tests2[f"kw_bin{b.bin_index}"] = kruskal_wallis([sqdev[g] for g in nonempty])
        if vals["hub"].size and vals["periphery"].size:
            tests1[f"mwu_hub_periphery_bin{b.bin_index}"] = mann_whitney_u(vals["hub"], vals["periphery"])
            tests2[f"mwu_hub_periphery_bin{b.bin_index}"] = mann_whitney_u(sqdev["hub"], sqdev["periphery"])
    meta = {"bin_duration": series.bin_duration, "bins": nb, "authors": len(series.authors), "dangling": series.dangling}
    rep1 = ExperimentReport(
        "P1", list(GROUPS), "mean_abs_log_karma",
        {g: MetricSeries(p1[g]) for g in GROUPS}, tests1,
        {k: t.rejects() for k, t in tests1.items()},
        {"group_sizes": sizes, "bonferroni_factor": len(tests1)}, meta,
    )
    rep2 = ExperimentReport(
        "P2", list(GROUPS), "var_log_karma",
        {g: MetricSeries(p2[g]) for g in GROUPS}, tests2,
        {k: t.rejects() for k, t in tests2.items()},
        {"group_sizes": sizes, "bonferroni_factor": len(tests2)}, meta,
    )
    return rep1, rep2


def _karma_at(series: BinnedSeries, k: int, n: int) -> np.ndarray:
    """Log karma for the first ``n`` authors at bin ``k`` (0 if not yet seen)."""
    out = np.zeros(n)
    lk = series.bins[k].log_karma
    out[: lk.size] = lk[:n]
    return out


def empirical_p3(series: BinnedSeries) -> ExperimentReport:
    """Per step, regress each connected agent's log-karma change on its
    neighbors' mean log karma one bin earlier."""
    if len(series.bins) < 2:
        raise InvalidParameterError("P3 needs at least two bins")
    slopes, fits = [], []
    for t in range(1, len(series.bins)):
        prev, cur = series.bins[t - 1], series.bins[t]
        x_prev = prev.log_karma
        x_cur = _karma_at(series, t, len(prev.authors))
        deg = np.asarray(prev.graph.degrees)[: len(prev.authors)]
        keep = np.flatnonzero(deg > 0)
        fit = None
        if keep.size >= 2:
            adj = prev.graph.adjacency
            pred = np.array([x_prev[sorted(adj[i])].mean() for i in keep])
            resp = x_cur[keep] - x_prev[keep]
            try:
                fit = ols_simple(pred, resp)
            except DegenerateInputError:
                fit = None
        fits.append(
            {
                "t": t,
                "n": int(keep.size),
                "slope": None if fit is None else fit.slope,
                "intercept": None if fit is None else fit.intercept,
                "stderr_slope": None if fit is None else fit.stderr_slope,
                "r_squared": None if fit is None else fit.r_squared,
            }
        )
        slopes.append(math.nan if fit is None else fit.slope)
    beta = np.array(slopes)
    finite = beta[np.isfinite(beta)]
    tests: dict[str, TestResult] = {}
    if finite.size:
        for name, data, alt in (("abs_slope_greater", np.abs(finite), "greater"), ("slope_two_sided", finite, "two-sided")):
            try:
                tests[name] = wilcoxon_signed_rank(data, alternative=alt)
            except DegenerateInputError:
                pass
    if finite.size >= 3:
        try:
            tests["slope_trend"] = spearman_rho(np.flatnonzero(np.isfinite(beta)) + 1, finite)
        except DegenerateInputError:
            pass
    summary = {
        "fits": fits,
        "mean_abs_slope": float(np.mean(np.abs(finite))) if finite.size else None,
        "fraction_positive": float(np.mean(finite > 0)) if finite.size else None,
    }
    return ExperimentReport(
        "P3", ["all"], "ols_slope", {"slope": MetricSeries(beta[None, :], t_start=1)}, tests,
        {k: t.rejects() for k, t in tests.items()}, summary,
        {"bin_duration": series.bin_duration, "bins": len(series.bins)},
    )


def empirical_p4(series: BinnedSeries) -> ExperimentReport:
    """Wasserstein-1 between consecutive bins' log-karma distributions over
    every author present in either bin (karma 0 before an author's first
    record), KS between first and last bins, Spearman trend and a one-sided
    Wilcoxon that the distances exceed zero."""
    if len(series.bins) < 2:
        raise InvalidParameterError("P4 needs at least two bins")
    w1 = []
    for t in range(1, len(series.bins)):
        n = len(series.bins[t].authors)
        w1.append(wasserstein1(_karma_at(series, t - 1, n), _karma_at(series, t, n)))
    w1a = np.array(w1)
    n_all = len(series.bins[-1].authors)
    tests: dict[str, TestResult] = {
        "first_vs_last": ks_two_sample(_karma_at(series, 0, n_all), _karma_at(series, len(series.bins) - 1, n_all))
    }
    if w1a.size >= 3:
        try:
            tests["w1_trend"] = spearman_rho(np.arange(1, w1a.size + 1), w1a)
        except DegenerateInputError:
            pass
    try:
        tests["w1_positive"] = wilcoxon_signed_rank(w1a, alternative="greater")
    except DegenerateInputError:
        pass
    summary = {"w1": w1a.tolist(), "mean_w1": float(w1a.mean())}
    return ExperimentReport(
        "P4", ["all"], "W1", {"W1": MetricSeries(w1a[None, :], t_start=1)}, tests,
        {k: t.rejects() for k, t in tests.items()}, summary,
        {"bin_duration": series.bin_duration, "bins": len(series.bins)},
    )
