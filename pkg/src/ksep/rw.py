"""Continuous-time random walk on Z: transition tables by uniformization.

The law of a walk with jump rate ``rate`` and kernel ``p`` after time ``t``
is the Poisson mixture

    P_origin(zeta_t = .) = sum_n e^{-rt} (rt)^n / n! * p^n(origin, .)

The series is cut where both Poisson tails are below ``tol / 4``; the
discrete powers ``p^n`` are trimmed at their edges with a total budget of
``tol / 4``.  All discarded mass is accumulated into ``tail_bound``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .errors import ToleranceUnreachable
from .kernel import JumpKernel

DEFAULT_TOL = 1e-12
MAX_TERMS = 5_000_000
MAX_WINDOW = 20_000_000


@dataclass(frozen=True)
class TransitionTable:
    origin: int
    rate: float
    time: float
    lo: int
    values: np.ndarray
    tail_bound: float
    tol: float
    max_jumps: int = 0
    max_offset: int = 1

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def prob(self, z) -> np.ndarray | float:
        z = np.asarray(z)
        i = z - self.lo
        inside = (i >= 0) & (i < len(self.values))
        out = np.where(inside, self.values[np.clip(i, 0, len(self.values) - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, z) -> np.ndarray | float:
        """P(zeta <= z) for integer ``z``, with the missing mass ignored."""
        cum = np.concatenate(([0.0], np.cumsum(self.values)))
        z = np.asarray(z, dtype=np.int64)
        i = np.clip(z - self.lo + 1, 0, len(self.values))
        out = cum[i]
        return float(out) if out.ndim == 0 else out

    def magnitude_bound(self) -> int:
        """Largest |zeta - origin| the truncated series can produce."""
        return self.max_jumps * self.max_offset

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(
                f"# origin={self.origin} rate={self.rate!r} t={self.time!r} "
                f"tol={self.tol!r} tail_bound={self.tail_bound!r}\n"
            )
            w = csv.writer(fh)
            w.writerow(["site", "probability"])
            for z, v in zip(self.sites, self.values):
                w.writerow([int(z), repr(float(v))])


def _poisson_range(lam: float, tol: float) -> tuple[int, int, float]:
    if lam == 0.0:
        return 0, 0, 0.0
    n_hi = int(stats.poisson.isf(tol / 4, lam)) + 1
    n_lo = int(stats.poisson.ppf(tol / 4, lam))
    n_lo = max(n_lo - 1, 0)
    if n_hi > MAX_TERMS:
        raise ToleranceUnreachable(f"uniformization needs {n_hi} terms (cap {MAX_TERMS})")
    lost = float(stats.poisson.sf(n_hi, lam)) + (float(stats.poisson.cdf(n_lo - 1, lam)) if n_lo > 0 else 0.0)
    return n_lo, n_hi, lost


def _poisson_weights(lam: np.ndarray, n: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = n * np.log(lam) - lam - special.gammaln(n + 1.0)
    w = np.exp(logw)
    return np.where(lam == 0.0, (n == 0).astype(float), w)


def _trim(vec: np.ndarray, lo: int, budget: float) -> tuple[np.ndarray, int, float]:
    """Drop edge entries whose cumulative mass stays within ``budget``."""
    if budget <= 0.0 or len(vec) < 3:
        return vec, lo, 0.0
    left = np.cumsum(vec)
    right = np.cumsum(vec[::-1])
    half = budget / 2
    a = int(np.searchsorted(left, half, side="right"))
    b = int(np.searchsorted(right, half, side="right"))
    a = min(a, len(vec) - 1)
    b = min(b, len(vec) - 1 - a)
    dropped = (left[a - 1] if a > 0 else 0.0) + (right[b - 1] if b > 0 else 0.0)
    return vec[a:len(vec) - b], lo + a, float(dropped)


def _powers(kernel: JumpKernel, n_hi: int, budget: float):
    """Yield (n, p^n(0, .), lo, trimmed_so_far) for n = 0..n_hi."""
    step = kernel.as_dense()
    R = kernel.max_offset
    vec = np.array([1.0])
    lo = 0
    trimmed = 0.0
    per_step = budget / max(n_hi, 1)
    for n in range(n_hi + 1):
        yield n, vec, lo, trimmed
        vec = np.convolve(vec, step)
        lo -= R
        vec, lo, d = _trim(vec, lo, per_step)
        trimmed += d
        if len(vec) > MAX_WINDOW:
            raise ToleranceUnreachable("transition window exceeds cap")


def transition_probs(kernel: JumpKernel, rate: float, t: float, origin: int = 0,
                     tol: float = DEFAULT_TOL) -> TransitionTable:
    """Law of zeta_t started at ``origin`` for a rate-``rate`` walk."""
    if t < 0 or rate <= 0:
        raise ValueError("need t >= 0 and rate > 0")
    if not 0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    return transition_batch(kernel, rate, [t], origin, tol)[0]


def transition_batch(kernel: JumpKernel, rate: float, times, origin: int = 0,
                     tol: float = DEFAULT_TOL) -> list[TransitionTable]:
    """Tables for several times sharing one pass over the powers p^n."""
    times = [float(s) for s in times]
    if not times:
        return []
    lams = np.array([rate * s for s in times])
    ranges = [_poisson_range(lam, tol) for lam in lams]
    n_top = max(r[1] for r in ranges)
    R = kernel.max_offset
    # every table lives on a common grid [-n_top R, n_top R] until the end
    width = 2 * n_top * R + 1
    acc = np.zeros((len(times), width))
    n_lo = np.array([r[0] for r in ranges])
    n_hi = np.array([r[1] for r in ranges])
    trimmed = 0.0
    chunk: list[tuple[int, int, np.ndarray]] = []

    def flush():
        if not chunk:
            return
        ns = np.array([c[0] for c in chunk], dtype=float)
        c0 = min(c[1] for c in chunk)
        c1 = max(c[1] + len(c[2]) for c in chunk)
        block = np.zeros((len(chunk), c1 - c0))
        for i, (_, lo, vec) in enumerate(chunk):
            block[i, lo - c0:lo - c0 + len(vec)] = vec
        W = _poisson_weights(lams[:, None], ns[None, :])
        active = (ns[None, :] >= n_lo[:, None]) & (ns[None, :] <= n_hi[:, None])
        W = np.where(active, W, 0.0)
        off = n_top * R
        acc[:, c0 + off:c1 + off] += W @ block
        chunk.clear()

    for n, vec, lo, trimmed in _powers(kernel, n_top, tol / 4):
        if n >= n_lo.min():
            chunk.append((n, lo, vec))
        if len(chunk) >= 256:
            flush()
    flush()

    tables = []
    for j, s in enumerate(times):
        vals = acc[j]
        nz = np.nonzero(vals > 0.0)[0]
        if len(nz) == 0:
            nz = np.array([n_top * R])
        a, b = int(nz[0]), int(nz[-1])
        v = vals[a:b + 1].copy()
        lo = a - n_top * R + origin
        lost = ranges[j][2] + trimmed
        tables.append(TransitionTable(
            origin=origin, rate=float(rate), time=s, lo=lo, values=v,
            tail_bound=float(max(lost, 1.0 - v.sum(), 0.0)), tol=tol,
            max_jumps=int(n_hi[j]), max_offset=R,
        ))
    return tables


def survival(table: TransitionTable, y: float) -> float:
    """P(zeta > y) with the floor convention on real thresholds."""
    if math.isinf(y):
        return 0.0 if y > 0 else 1.0
    return float(table.values.sum() - table.cdf(math.floor(y)))


def positive_part_mean(table: TransitionTable, m: int) -> float:
    """E[(zeta - m)_+] for a table with origin 0."""
    z = table.sites
    return float(np.sum(np.clip(z - m, 0, None) * table.values))


def positive_part_mean_error(table: TransitionTable, m: int) -> float:
    return table.tail_bound * (table.magnitude_bound() + abs(m) + abs(table.origin))


def chernoff_tail(kernel: JumpKernel, lam: float, z: float) -> float:
    """Bound on P_0(zeta >= z) after Poisson(lam) jumps (z > 0)."""
    if z <= 0:
        return 1.0
    if lam == 0:
        return 0.0

    def logb(r):
        return -r * z + lam * (kernel.mgf(r) - 1.0)

    rmax = 30.0 / kernel.max_offset
    res = optimize.minimize_scalar(logb, bounds=(1e-9, rmax), method="bounded")
    return float(min(1.0, math.exp(min(res.fun, logb(rmax), 0.0))))


def chernoff_sum(kernel: JumpKernel, lam: float, z0: float) -> float:
    """Bound on sum_{z >= z0, z integer} P_0(zeta >= z)."""
    z0 = math.ceil(z0)

    def logb(r):
        return -r * z0 + lam * (kernel.mgf(r) - 1.0) - math.log1p(-math.exp(-r))

    rmax = 30.0 / kernel.max_offset
    res = optimize.minimize_scalar(logb, bounds=(1e-6, rmax), method="bounded")
    return float(math.exp(min(res.fun, logb(rmax))))


def quantile_radius(kernel: JumpKernel, lam: float, eps: float) -> int:
    """Smallest integer R with P_0(|zeta| >= R) <= eps by the Chernoff bound."""
    if lam == 0:
        return 1
    R = max(1, int(math.sqrt(lam) * math.sqrt(moment2(kernel))))
    while 2 * chernoff_tail(kernel, lam, R) > eps:
        R = int(R * 1.25) + 1
    return R


def moment2(kernel: JumpKernel) -> float:
    return sum(q * y * y for y, q in kernel.pairs())


def sample_increment_path(kernel: JumpKernel, rate: float, t: float, origin: int,
                          rng: np.random.Generator) -> int:
    """One draw of zeta_t started at ``origin``."""
    n = rng.poisson(rate * t)
    if n == 0:
        return int(origin)
    steps = rng.choice(np.asarray(kernel.offsets), size=n, p=np.asarray(kernel.probs))
    return int(origin + steps.sum())


def sample_endpoints(kernel: JumpKernel, rate: float, t: float, origin: int,
                     rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent draws of zeta_t; vectorized form of the above."""
    counts = rng.poisson(rate * t, size=size)
    total = int(counts.sum())
    out = np.full(size, origin, dtype=np.int64)
    if total == 0:
        return out
    steps = rng.choice(np.asarray(kernel.offsets), size=total, p=np.asarray(kernel.probs))
    ends = np.cumsum(counts)
    csum = np.concatenate(([0], np.cumsum(steps)))
    out += csum[ends] - csum[ends - counts]
    return out
