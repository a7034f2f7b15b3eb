"""Nonparametric statistics used by the experiments and the log pipeline.

All rank tests use mid-ranks for ties and large-sample normal (or
chi-square) approximations with tie and continuity corrections. Tests on
very small samples still report their statistic but leave ``p_value`` as
``None``; below :data:`MIN_APPROX_SIZE` the approximation is not
trustworthy.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .errors import DegenerateInputError, InvalidParameterError

MIN_APPROX_SIZE = 5


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: float | None
    n: tuple[int, ...]
    details: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    @property
    def underpowered(self) -> bool:
        return self.p_value is None

    def rejects(self, level: float = 0.05) -> bool:
        return self.p_value is not None and self.p_value < level

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = list(self.n)
        return d


@dataclass(frozen=True)
class OlsFit:
    slope: float
    intercept: float
    stderr_slope: float
    r_squared: float
    n: int


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution (regularized upper gamma)."""
    if df < 1 or int(df) != df:
        raise InvalidParameterError(f"df must be a positive integer, got {df}")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def _sample(a, name: str = "sample") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InvalidParameterError(f"{name} must be nonempty")
    return arr


def _tie_term(values: np.ndarray) -> float:
    _, counts = np.unique(values, return_counts=True)
    counts = counts.astype(np.float64)
    return float(np.sum(counts**3 - counts))


def wasserstein1(a, b) -> float:
    """Earth mover's distance between two 1-D empirical distributions,
    computed as the integral of ``|F_a - F_b|`` over the merged support."""
    u = np.sort(_sample(a, "a"))
    v = np.sort(_sample(b, "b"))
    allv = np.sort(np.concatenate((u, v)))
    deltas = np.diff(allv)
    fu = np.searchsorted(u, allv[:-1], side="right") / u.size
    fv = np.searchsorted(v, allv[:-1], side="right") / v.size
    return float(np.sum(np.abs(fu - fv) * deltas))


def mann_whitney_u(a, b) -> TestResult:
    """Two-sided Mann-Whitney U.

    The statistic counts pairs with ``a_i < b_j`` (ties count one half), so
    ``U_a + U_b = |a||b|``.
    """
    x, y = _sample(a, "a"), _sample(b, "b")
    na, nb = x.size, y.size
    pooled = np.concatenate((x, y))
    ranks = rankdata(pooled)
    r_a = ranks[:na].sum()
    u = na * nb + na * (na + 1) / 2.0 - r_a
    mu = na * nb / 2.0
    big_n = na + nb
    var = na * nb / 12.0 * ((big_n + 1) - _tie_term(pooled) / (big_n * (big_n - 1)))
    z = 0.0
    if var > 0:
        z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
        z = math.copysign(z, u - mu)
    p = None
    if min(na, nb) >= MIN_APPROX_SIZE:
        p = min(1.0, 2.0 * normal_sf(abs(z))) if var > 0 else 1.0
    return TestResult("mann_whitney_u", float(u), p, (na, nb), {"z": z, "effect_r": z / math.sqrt(big_n)})


def kruskal_wallis(groups: Sequence) -> TestResult:
    """Kruskal-Wallis H with tie correction; p from chi-square(k - 1)."""
    if len(groups) < 2:
        raise InvalidParameterError("need at least two groups")
    samples = [_sample(g, f"group {i}") for i, g in enumerate(groups)]
    sizes = [s.size for s in samples]
    pooled = np.concatenate(samples)
    big_n = pooled.size
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for size in sizes:
        h += ranks[start : start + size].sum() ** 2 / size
        start += size
    h = 12.0 / (big_n * (big_n + 1)) * h - 3.0 * (big_n + 1)
    correction = 1.0 - _tie_term(pooled) / (big_n**3 - big_n) if big_n > 1 else 0.0
    if correction <= 0:
        return TestResult("kruskal_wallis", 0.0, 1.0, tuple(sizes))
    h /= correction
    h = max(h, 0.0)
    return TestResult("kruskal_wallis", float(h), chi2_sf(h, len(samples) - 1), tuple(sizes))


def wilcoxon_signed_rank(d, alternative: str = "two-sided") -> TestResult:
    """Wilcoxon signed-rank test on paired differences (zeros dropped).

    Two-sided: the statistic is the smaller of the positive and negative
    rank sums. One-sided (``"greater"`` / ``"less"``): the statistic is the
    positive rank sum, as usually tabulated for directional tests.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise InvalidParameterError(f"unknown alternative {alternative!r}")
    arr = _sample(d, "d")
    arr = arr[arr != 0]
    if arr.size == 0:
        raise DegenerateInputError("all differences are zero")
    n = arr.size
    mag = np.abs(arr)
    ranks = rankdata(mag)
    r_plus = float(ranks[arr > 0].sum())
    r_minus = float(ranks[arr < 0].sum())
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(mag) / 48.0
    sd = math.sqrt(var)
    if alternative == "two-sided":
        stat = min(r_plus, r_minus)
        z = max(abs(r_plus - mean) - 0.5, 0.0) / sd
        p = min(1.0, 2.0 * normal_sf(z))
    elif alternative == "greater":
        stat = r_plus
        z = (r_plus - mean - 0.5) / sd
        p = normal_sf(z)
    else:
        stat = r_plus
        z = (r_plus - mean + 0.5) / sd
        p = normal_cdf(z)
    if n < MIN_APPROX_SIZE:
        p = None
    details = {"r_plus": r_plus, "r_minus": r_minus, "z": z, "alternative": alternative}
    return TestResult("wilcoxon_signed_rank", stat, p, (n,), details)


def ks_two_sample(a, b) -> TestResult:
    """Two-sample Kolmogorov-Smirnov; p from the asymptotic Kolmogorov law
    at ``sqrt(nm / (n + m)) * D``."""
    x = np.sort(_sample(a, "a"))
    y = np.sort(_sample(b, "b"))
    allv = np.concatenate((x, y))
    fx = np.searchsorted(x, allv, side="right") / x.size
    fy = np.searchsorted(y, allv, side="right") / y.size
    d = float(np.max(np.abs(fx - fy)))
    en = x.size * y.size / (x.size + y.size)
    p = float(special.kolmogorov(math.sqrt(en) * d))
    return TestResult("ks_two_sample", d, min(max(p, 0.0), 1.0), (x.size, y.size))


def ols_simple(x, y) -> OlsFit:
    """Least-squares line ``y ~ intercept + slope * x``.

    ``stderr_slope`` is NaN when n = 2 (no residual degrees of freedom).
    """
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.size != ya.size:
        raise InvalidParameterError("x and y lengths differ")
    if xa.size < 2:
        raise InvalidParameterError("need at least two points")
    xm, ym = xa.mean(), ya.mean()
    dx, dy = xa - xm, ya - ym
    sxx = float(dx @ dx)
    if sxx == 0.0 or np.all(xa == xa[0]):
        raise DegenerateInputError("x is constant")
    sxy = float(dx @ dy)
    syy = float(dy @ dy)
    slope = sxy / sxx
    intercept = ym - slope * xm
    n = xa.size
    if n > 2:
        resid = ya - (intercept + slope * xa)
        stderr = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    else:
        stderr = math.nan
    r2 = 0.0 if syy == 0.0 else min(1.0, max(0.0, sxy * sxy / (sxx * syy)))
    return OlsFit(float(slope), float(intercept), stderr, r2, n)


def spearman_rho(x, y) -> TestResult:
    """Spearman rank correlation; two-sided p from Student's t with n - 2 df."""
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.size != ya.size:
        raise InvalidParameterError("x and y lengths differ")
    n = xa.size
    if n < 3:
        raise InvalidParameterError("spearman needs at least three pairs")
    rx, ry = rankdata(xa), rankdata(ya)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        raise DegenerateInputError("constant input has no rank correlation")
    rho = max(-1.0, min(1.0, float(rx @ ry) / denom))
    if abs(rho) >= 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = float(2.0 * special.stdtr(n - 2, -abs(t)))
    return TestResult("spearman_rho", rho, min(1.0, p), (n,))
