"""Limit laws of the rescaled extremes and the tests used against them.

The limiting point process with intensity ``c e^{-x} dx`` is represented as
the points ``-log(T_n / c)``, ``T_n = chi_0 + ... + chi_n`` with iid Exp(1)
``chi``; rank 0 is Gumbel(c) and ``log(T_k / T_{k-1})`` is Exp(k).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import DomainError, TooFewSamples

DEFAULT_LEVEL = 0.01
MIN_KS = 100


@dataclass
class TestResult:
    name: str
    statistic: float
    n_samples: int
    threshold: float
    passed: bool
    pvalue: float | None = None
    details: dict = field(default_factory=dict)
    trend_context: list | None = None

    # keep pytest from collecting this class
    __test__ = False

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def gumbel_cdf(c: float, x):
    """exp(-c e^{-x})."""
    if not c > 0:
        raise DomainError("c must be positive")
    x = np.asarray(x, dtype=float)
    out = np.exp(-c * np.exp(-x))
    return float(out) if out.ndim == 0 else out


def gumbel_ppf(c: float, u):
    u = np.asarray(u, dtype=float)
    return np.log(c) - np.log(-np.log(u))


def ks_test(samples, cdf, level: float = DEFAULT_LEVEL, name: str = "ks") -> TestResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic critical value."""
    x = np.asarray(samples, dtype=float)
    x = x[~np.isnan(x)]
    if len(x) < MIN_KS:
        raise TooFewSamples(f"KS test needs at least {MIN_KS} samples, got {len(x)}")
    res = sps.kstest(x, cdf)
    crit = float(sps.kstwobign.isf(level) / math.sqrt(len(x)))
    return TestResult(name, float(res.statistic), len(x), crit, bool(res.statistic <= crit),
                      pvalue=float(res.pvalue), details={"level": level})


def ks_distance(samples, cdf) -> float:
    """sup |F_n - F|, with -inf samples allowed (they sit below every x)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    F = cdf(x)
    F = np.where(np.isneginf(x), 0.0, F)
    up = np.arange(1, n + 1) / n - F
    down = F - np.arange(n) / n
    return float(max(up.max(), down.max()))


def poisson_dispersion(counts, expected=None, level: float = DEFAULT_LEVEL,
                       band: tuple[float, float] | None = None,
                       corr_band: float | None = None) -> TestResult:
    """Variance/mean ratio per interval and cross-interval correlations.

    ``counts`` has shape (replicas, intervals).  Without ``band`` the ratio
    passes when its normal-approximation interval contains 1; with ``band``
    it must lie inside the band.  Correlations pass when their interval
    contains 0 (or, with ``corr_band``, when they lie in +-corr_band).
    """
    C = np.asarray(counts, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    n, k = C.shape
    if n < 2:
        raise TooFewSamples("need at least two replicas")
    means = C.mean(axis=0)
    var = C.var(axis=0, ddof=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(means > 0, var / means, 0.0)
    z = sps.norm.isf(level / 2)
    se = math.sqrt(2.0 / (n - 1))  # sd of the dispersion index under Poisson
    if band is None:
        ok_ratio = np.abs(ratio - 1.0) <= z * se
    else:
        ok_ratio = (ratio >= band[0]) & (ratio <= band[1])
    corr = np.corrcoef(C, rowvar=False) if k > 1 else np.ones((1, 1))
    off = [float(corr[i, j]) for i in range(k) for j in range(i + 1, k)]
    cb = corr_band if corr_band is not None else z / math.sqrt(n)
    ok_corr = all(abs(r) <= cb for r in off if np.isfinite(r))
    details = {"means": means.tolist(), "variances": var.tolist(), "ratios": ratio.tolist(),
               "correlations": off, "ratio_ok": ok_ratio.tolist(), "corr_ok": ok_corr}
    passed = bool(ok_ratio.all() and ok_corr and np.all(means > 0))
    if expected is not None:
        expected = np.asarray(expected, dtype=float)
        rel = np.abs(means - expected) / expected
        details["expected"] = expected.tolist()
        details["relative_mean_error"] = rel.tolist()
    stat = float(np.max(np.abs(ratio - 1.0)))
    return TestResult("poisson_dispersion", stat, n,
                      float(z * se if band is None else max(1 - band[0], band[1] - 1)),
                      passed, details=details)


def poisson_sum_test(counts, means, level: float = DEFAULT_LEVEL) -> TestResult:
    """Chi-square test of the summed counts against Poisson(sum of means)."""
    total = np.asarray(counts).sum(axis=1)
    lam = float(np.sum(means))
    kmax = int(max(total.max(), sps.poisson.isf(1e-6, lam)))
    observed = np.bincount(total, minlength=kmax + 1)[: kmax + 1].astype(float)
    probs = sps.poisson.pmf(np.arange(kmax + 1), lam)
    probs[-1] += sps.poisson.sf(kmax, lam)
    expected = probs * len(total)
    # merge sparse tail cells until every expected count is at least 5
    obs, exp_ = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= 5:
            obs.append(o_acc)
            exp_.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 and exp_:
        obs[-1] += o_acc
        exp_[-1] += e_acc
    stat, p = sps.chisquare(obs, exp_)
    return TestResult("poisson_sum", float(stat), len(total), level, bool(p > level),
                      pvalue=float(p), details={"lambda": lam})


def spacing_test(gaps, k: int, level: float = DEFAULT_LEVEL) -> TestResult:
    """KS test of rescaled gaps (X^(k-1) - X^(k)) / (sigma b) against Exp(k)."""
    if k < 1:
        raise DomainError("k must be at least 1")
    g = np.asarray(gaps, dtype=float)
    g = g[np.isfinite(g)]
    res = ks_test(g, sps.expon(scale=1.0 / k).cdf, level, name=f"spacing_{k}")
    res.details.update({"k": k, "mean": float(g.mean()), "target_mean": 1.0 / k})
    return res


def spacing_independence(gaps_a, gaps_b, level: float = DEFAULT_LEVEL) -> TestResult:
    """Sample correlation of two gap series with a normal-approximation interval around 0."""
    a = np.asarray(gaps_a, dtype=float)
    b = np.asarray(gaps_b, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b)
    r = float(np.corrcoef(a[ok], b[ok])[0, 1])
    crit = float(sps.norm.isf(level / 2) / math.sqrt(ok.sum()))
    return TestResult("spacing_independence", r, int(ok.sum()), crit, abs(r) <= crit)


def sample_limit_order_stats(c: float, ranks, rng: np.random.Generator, size: int | None = None):
    """Draws of -log(T_m / c) at the requested ranks m (strictly decreasing in m)."""
    if not c > 0:
        raise DomainError("c must be positive")
    ranks = np.asarray(ranks, dtype=np.int64)
    top = int(ranks.max()) + 1
    shape = (top,) if size is None else (size, top)
    T = np.cumsum(rng.exponential(1.0, size=shape), axis=-1)
    return -np.log(T[..., ranks] / c)


def limit_rank_cdf(c: float, m: int, x):
    """P(-log(T_m / c) <= x) = P(T_m >= c e^{-x}) with T_m ~ Gamma(m + 1)."""
    return sps.gamma.sf(c * np.exp(-np.asarray(x, dtype=float)), m + 1)


def trend_check(stats_by_t, band: float, cap: float) -> dict:
    """Nonincreasing within ``band`` along the grid and below ``cap`` at the end."""
    ts = sorted(stats_by_t)
    vals = [stats_by_t[t] for t in ts]
    steps = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
    monotone = all(s <= band for s in steps)
    final = vals[-1] <= cap
    return {"t": ts, "statistic": vals, "max_increase": max(steps) if steps else 0.0,
            "band": band, "cap": cap, "monotone": monotone, "final_below_cap": final,
            "passed": bool(monotone and final)}


def write_trend_csv(path, stats_by_t, name: str = "statistic") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", name])
        for t in sorted(stats_by_t):
            w.writerow([repr(float(t)), repr(float(stats_by_t[t]))])
