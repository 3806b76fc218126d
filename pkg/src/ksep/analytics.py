"""Intensities, limit intensities and the correlation functionals kappa, tau.

Walk laws come from :mod:`ksep.rw`.  The walk in ``kappa``/``tau`` jumps at
rate 1; intensities use the rate-K marginal of a single particle.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rw
from .errors import DomainError, OverlappingIntervals
from .kernel import JumpKernel
from .profiles import DeterministicStep, InitialProfile, mean_occupation_vector
from .scaling import ScalingMap

INF = math.inf


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of disjoint half-open intervals (a, b], kept sorted and merged."""

    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = sorted((float(a), float(b)) for a, b in self.components)
        merged: list[list[float]] = []
        for a, b in ivs:
            if not a < b:
                raise ValueError(f"empty interval ({a}, {b}]")
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        object.__setattr__(self, "components", tuple((a, b) for a, b in merged))

    @classmethod
    def of(cls, *intervals) -> "IntervalUnion":
        return cls(tuple(intervals))

    @classmethod
    def disjoint(cls, intervals) -> "IntervalUnion":
        """Like :meth:`of` but refuses overlapping input."""
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise OverlappingIntervals(f"({a0}, {b0}] and ({a1}, {b1}] overlap")
        return cls(tuple(ivs))

    @classmethod
    def lattice(cls, lo: float, hi: float) -> "IntervalUnion":
        """The integers lo..hi (either end may be infinite)."""
        return cls((((lo - 1) if math.isfinite(lo) else lo, hi),))

    @property
    def inf(self) -> float:
        return self.components[0][0]

    @property
    def sup(self) -> float:
        return self.components[-1][1]

    def lattice_ranges(self) -> list[tuple[float, float]]:
        """Integer ranges [lo, hi] making up the set's intersection with Z."""
        out = []
        for a, b in self.components:
            lo = math.floor(a) + 1 if math.isfinite(a) else -INF
            hi = math.floor(b) if math.isfinite(b) else INF
            if lo <= hi:
                out.append((lo, hi))
        return out

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.components:
            out |= (x > a) & (x <= b)
        return out

    def lam(self) -> float:
        """lambda(set) for lambda(a, b] = e^{-a} - e^{-b}."""
        return float(sum(math.exp(-a) - math.exp(-b) for a, b in self.components))

    def preimage(self, vmap: ScalingMap) -> "IntervalUnion":
        return IntervalUnion(tuple((vmap.inverse(a), vmap.inverse(b)) for a, b in self.components))

    def to_list(self) -> list:
        return [[_num(a), _num(b)] for a, b in self.components]


def _num(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _as_union(S) -> IntervalUnion:
    if isinstance(S, IntervalUnion):
        return S
    if isinstance(S, tuple) and len(S) == 2 and not isinstance(S[0], tuple):
        return IntervalUnion.of(S)
    return IntervalUnion(tuple(S))


def _mass(table: rw.TransitionTable, lo, hi, shift) -> np.ndarray:
    """P_0(zeta in [lo - shift, hi - shift]) for an array of shifts."""
    total = table.values.sum()
    up = total if math.isinf(hi) else table.cdf(np.asarray(hi - shift, dtype=np.int64))
    down = 0.0 if math.isinf(lo) else table.cdf(np.asarray(lo - 1 - shift, dtype=np.int64))
    return np.broadcast_to(np.asarray(up - down, dtype=float), np.shape(shift)).copy()


def hitting_prob(table: rw.TransitionTable, S: IntervalUnion, xs) -> np.ndarray:
    """P_x(zeta in S) for each start x, with ``table`` started at 0."""
    xs = np.asarray(xs, dtype=np.int64)
    out = np.zeros(xs.shape)
    for lo, hi in S.lattice_ranges():
        out += _mass(table, lo, hi, xs)
    return out


# --- intensities -----------------------------------------------------------

def intensity(profile: InitialProfile, kernel: JumpKernel, K: int, t: float, S,
              route: str = "sum", tol: float = rw.DEFAULT_TOL) -> float:
    """Expected particle count in ``S`` at time ``t``.

    ``route="sum"`` adds mean occupations against the rate-K walk law.
    ``route="step"`` uses the positive-part form, valid for deterministic steps.
    """
    S = _as_union(S)
    table = rw.transition_probs(kernel, K, t, tol=tol)
    if route == "step":
        return _intensity_step(profile, table, S)
    if route != "sum":
        raise ValueError(f"unknown route {route!r}")
    if math.isinf(profile.L) and math.isinf(S.inf):
        raise DomainError("infinite profile mass in a set unbounded below")
    total = 0.0
    for lo, hi in S.lattice_ranges():
        # P_x(zeta in [lo, hi]) vanishes (in the table) once x < lo - table.hi
        x_min = -profile.L + 1 if math.isfinite(profile.L) else lo - table.hi
        x_min = max(x_min, lo - table.hi) if math.isfinite(lo) else x_min
        x_min = int(x_min)
        xs = np.arange(x_min, 1)
        if len(xs) == 0:
            continue
        m = mean_occupation_vector(profile, x_min, 0)
        total += float(np.dot(m, _mass(table, lo, hi, xs)))
    return total


def _step_tail(profile: DeterministicStep, table: rw.TransitionTable, y: float) -> float:
    """mu(y, inf) = j E[(zeta - floor y)_+] - j E[(zeta - floor y - L)_+]."""
    if math.isinf(y):
        if y > 0:
            return 0.0
        return profile.layers * float(profile.L)
    m = math.floor(y)
    out = rw.positive_part_mean(table, m)
    if math.isfinite(profile.L):
        out -= rw.positive_part_mean(table, m + int(profile.L))
    return profile.layers * out


def _intensity_step(profile, table, S: IntervalUnion) -> float:
    if not isinstance(profile, DeterministicStep):
        raise DomainError("the positive-part route needs a deterministic step")
    if math.isinf(profile.L) and math.isinf(S.inf):
        raise DomainError("infinite profile mass in a set unbounded below")
    return float(sum(_step_tail(profile, table, a) - _step_tail(profile, table, b)
                     for a, b in S.components))


def limit_intensity(case: str, c_nu: float, sigma: float, K: int, S,
                    psi: float | None = None) -> float:
    """Mean measure of the limiting Poisson process on ``S``."""
    lam = _as_union(S).lam()
    if case == "full":
        return K * sigma * lam
    if case == "psi":
        if psi is None or not psi > 0:
            raise DomainError("psi must lie in (0, inf]")
        return c_nu * sigma * (1.0 - math.exp(-psi / sigma)) * lam
    if case == "block":
        return c_nu * lam
    raise ValueError(f"unknown case {case!r}")


def mean_convergence_ratio(profile: InitialProfile, kernel: JumpKernel, K: int, t: float,
                           vmap: ScalingMap, S, c_nu: float) -> float:
    """mu^{nu_L}(v^{-1}S) / ((c_nu / K) mu^L(v^{-1}S)) at time t/K."""
    pre = _as_union(S).preimage(vmap)
    num = intensity(profile, kernel, K, t / K, pre)
    step = DeterministicStep(K, profile.L)
    den = (c_nu / K) * intensity(step, kernel, K, t / K, pre)
    return num / den


# --- factorial counts --------------------------------------------------------

def falling_factorial_count(k: int, n: int) -> int:
    """(k)_n = k (k-1) ... (k-n+1); zero when n > k."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.perm(k, n) if n <= k else 0


# --- kappa and tau -----------------------------------------------------------

@dataclass
class KappaTauReport:
    kappa: float
    tau: float
    quad_error: float
    truncation_error: float
    t: float
    A: list = field(default_factory=list)
    B: list = field(default_factory=list)
    panels: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _boundaries(S: IntervalUnion) -> list[float]:
    out = []
    for lo, hi in S.lattice_ranges():
        out += [v for v in (lo, hi) if math.isfinite(v)]
    return out


def _simpson(f0, f1, f2, h):
    return h / 6.0 * (f0 + 4.0 * f1 + f2)


def adaptive_simpson(batch, t: float, tol: float, min_panels: int = 64,
                     max_levels: int = 12):
    """Integrate over [0, t] with level-synchronous adaptive Simpson.

    ``batch(s_array)`` evaluates the integrand at many nodes at once.
    Returns (value, error_estimate, accepted_panels).
    """
    if t == 0:
        return 0.0, 0.0, 0
    edges = np.linspace(0.0, t, min_panels + 1)
    a, b = edges[:-1], edges[1:]
    nodes = np.unique(np.concatenate([edges, (a + b) / 2, a + (b - a) / 4, a + 3 * (b - a) / 4]))
    cache = dict(zip(nodes.tolist(), batch(nodes)))
    total = 0.0
    err = 0.0
    accepted = 0
    for level in range(max_levels + 1):
        h = b - a
        m = (a + b) / 2
        q1, q3 = a + h / 4, a + 3 * h / 4
        fa = np.array([cache[v] for v in a.tolist()])
        fb = np.array([cache[v] for v in b.tolist()])
        fm = np.array([cache[v] for v in m.tolist()])
        f1 = np.array([cache[v] for v in q1.tolist()])
        f3 = np.array([cache[v] for v in q3.tolist()])
        coarse = _simpson(fa, fm, fb, h)
        fine = _simpson(fa, f1, fm, h / 2) + _simpson(fm, f3, fb, h / 2)
        est = np.abs(fine - coarse) / 15.0
        ok = est <= tol * h / t
        if level == max_levels:
            ok[:] = True
        total += float(np.sum(fine[ok] + (fine[ok] - coarse[ok]) / 15.0))
        err += float(np.sum(est[ok]))
        accepted += int(ok.sum())
        if ok.all():
            break
        na = np.concatenate([a[~ok], m[~ok]])
        nb = np.concatenate([m[~ok], b[~ok]])
        new = np.concatenate([na + (nb - na) / 4, na + 3 * (nb - na) / 4])
        new = np.unique(new[[v not in cache for v in new.tolist()]])
        if len(new):
            cache.update(zip(new.tolist(), batch(new)))
        a, b = na, nb
    return total, err, accepted


def _tables_at(kernel, times, tol):
    times = np.asarray(times, dtype=float)
    uniq = np.unique(np.concatenate([times]))
    tabs = rw.transition_batch(kernel, 1.0, uniq, tol=tol)
    return dict(zip(uniq.tolist(), tabs))


def _kappa_integrand(kernel, t, A, B, xs, tol):
    offs = np.asarray(kernel.offsets, dtype=np.int64)
    probs = np.asarray(kernel.probs, dtype=float)
    worst = [0.0]

    def batch(ss):
        ss = np.asarray(ss, dtype=float)
        comp = np.maximum(t - ss, 0.0)
        tabs = _tables_at(kernel, np.concatenate([ss, comp]), tol)
        out = np.empty(len(ss))
        for i, (s, c) in enumerate(zip(ss.tolist(), comp.tolist())):
            ts, tc = tabs[s], tabs[c]
            worst[0] = max(worst[0], ts.tail_bound, tc.tail_bound)
            f = hitting_prob(ts, B, xs)
            g = hitting_prob(tc, A, xs)
            val = 0.0
            for y, q in zip(offs, probs):
                fy = hitting_prob(ts, B, xs + y)
                gy = hitting_prob(tc, A, xs + y)
                val += q * float(np.sum((f - fy) ** 2 * g * gy))
            out[i] = val
        return out

    return batch, worst


def _x_window(kernel, t, bounds, tol):
    n_hi = rw._poisson_range(t, tol)[1] if t > 0 else 0
    W = (n_hi + 1) * kernel.max_offset
    return np.arange(int(min(bounds)) - W, int(max(bounds)) + W + 1)


def kappa(kernel: JumpKernel, t: float, A, B, quad_tol: float = 1e-10,
          tol: float = rw.DEFAULT_TOL) -> tuple[float, float, float, int]:
    """kappa_t(A, B) as (value, quad_error, truncation_error, panels)."""
    A, B = _as_union(A), _as_union(B)
    if t == 0:
        return 0.0, 0.0, 0.0, 0
    bounds = _boundaries(B)
    if not bounds:
        return 0.0, 0.0, 0.0, 0  # B covers Z or nothing: differences vanish
    xs = _x_window(kernel, t, bounds, tol)
    batch, worst = _kappa_integrand(kernel, t, A, B, xs, tol)
    val, qerr, panels = adaptive_simpson(batch, t, quad_tol)
    m1 = sum(q * abs(y) for y, q in kernel.pairs())
    trunc = t * worst[0] * 12.0 * m1 * len(bounds)
    return max(val, 0.0), qerr, trunc, panels


def tau(kernel: JumpKernel, t: float, A, B, tol: float = rw.DEFAULT_TOL) -> tuple[float, float]:
    """tau_t(A, B) as (value, truncation_error)."""
    A, B = _as_union(A), _as_union(B)
    up = math.isinf(A.sup) and math.isinf(B.sup)
    down = math.isinf(A.inf) and math.isinf(B.inf)
    if up or down:
        raise DomainError("tau diverges: A and B share an unbounded end")
    table = rw.transition_probs(kernel, 1.0, t, tol=tol)
    R = max(abs(table.lo), abs(table.hi)) + 1
    bl = [v for v in (B.inf, B.sup) if math.isfinite(v)]
    total = 0.0
    count = 0
    for lo, hi in A.lattice_ranges():
        lo = max(lo, math.floor(min(bl)) - R) if math.isinf(lo) else lo
        hi = min(hi, math.floor(max(bl)) + R) if math.isinf(hi) else hi
        if lo > hi:
            continue
        xs = np.arange(int(lo), int(hi) + 1)
        total += float(np.sum(hitting_prob(table, B, xs) ** 2))
        count += len(xs)
    return total, 2.0 * table.tail_bound * max(count, 1)


def kappa_tau(kernel: JumpKernel, t: float, A, B, quad_tol: float = 1e-10,
              tol: float = rw.DEFAULT_TOL) -> KappaTauReport:
    A, B = _as_union(A), _as_union(B)
    k, qerr, trunc, panels = kappa(kernel, t, A, B, quad_tol, tol)
    tv, terr = tau(kernel, t, A, B, tol)
    return KappaTauReport(kappa=k, tau=tv, quad_error=qerr, truncation_error=trunc + terr,
                          t=float(t), A=A.to_list(), B=B.to_list(), panels=panels)


def kappabound2_check(kernel: JumpKernel, t: float, b: float, L: float,
                      quad_tol: float = 1e-10, tol: float = rw.DEFAULT_TOL) -> dict:
    """Both sides of the bound on kappa_t((b, inf), (-L, 0])."""
    if not b > 0:
        raise DomainError("b must be positive")
    A = IntervalUnion.of((b, INF))
    B = IntervalUnion.of((-L, 0.0))
    lhs, lerr, ltr, _ = kappa(kernel, t, A, B, quad_tol, tol)
    if t == 0:
        integral, ierr = 0.0, 0.0
    else:
        bounds = [0] + ([-int(L)] if math.isfinite(L) else [])
        xs = _x_window(kernel, t, bounds, tol)
        half = IntervalUnion.of((b / 2, INF))

        def batch(ss):
            ss = np.asarray(ss, dtype=float)
            comp = np.maximum(t - ss, 0.0)
            tabs = _tables_at(kernel, np.concatenate([ss, comp]), tol)
            out = np.empty(len(ss))
            for i, (s, c) in enumerate(zip(ss.tolist(), comp.tolist())):
                ts = tabs[s]
                # P_x(zeta_s = z) = p_s(z - x)
                d = ts.prob(-xs)
                if math.isfinite(L):
                    d = d - ts.prob(-int(L) - xs)
                g = hitting_prob(tabs[c], half, xs)
                out[i] = float(np.sum(d * d * g * g))
            return out

        integral, ierr, _ = adaptive_simpson(batch, t, quad_tol)
    rhs = kernel.sigma ** 2 * integral + 8.0 * kernel.m4 * t / b ** 2
    return {"t": t, "b": b, "L": _num(float(L)), "lhs": lhs, "rhs": rhs,
            "integral": integral, "error": lerr + ltr + kernel.sigma ** 2 * ierr,
            "holds": bool(lhs <= rhs + 1e-9)}


def tau_bound_check(profile: DeterministicStep, kernel: JumpKernel, K: int, t: float, A,
                    tol: float = rw.DEFAULT_TOL) -> dict:
    """Both sides of max(tau_t(A, H), tau_t(H, A)) <= mu_{t/K}(A) P_0(zeta_t > a) / K."""
    if not isinstance(profile, DeterministicStep) or profile.layers != K:
        raise DomainError("needs a {0, K}-valued step profile")
    if not math.isfinite(profile.L):
        raise DomainError("needs a finite block length")
    A = _as_union(A)
    a = A.inf
    if math.isinf(a):
        raise DomainError("A must be bounded below")
    H = IntervalUnion.of((-profile.L, 0.0))
    t1, e1 = tau(kernel, t, A, H, tol)
    t2, e2 = tau(kernel, t, H, A, tol)
    lhs = max(t1, t2)
    mu = intensity(profile, kernel, K, t / K, A, tol=tol)
    table = rw.transition_probs(kernel, 1.0, t, tol=tol)
    rhs = mu * rw.survival(table, a) / K
    return {"t": t, "K": K, "L": int(profile.L), "A": A.to_list(), "lhs": lhs, "rhs": rhs,
            "tau_A_H": t1, "tau_H_A": t2, "error": e1 + e2,
            "holds": bool(lhs <= rhs + 1e-9)}


# --- default check grids -------------------------------------------------------

KAPPA_BOUND_POINTS = ((1.0, 2.0, 3), (2.0, 4.0, 5), (5.0, 10.0, 10), (5.0, 20.0, 10),
                      (10.0, 5.0, 10), (20.0, 15.0, 20), (50.0, 20.0, 30), (100.0, 30.0, 50),
                      (200.0, 40.0, 60), (400.0, 60.0, 100))
TAU_BOUND_POINTS = ((1.0, 1, 5, 3.0), (2.0, 2, 4, 1.0), (5.0, 1, 10, 4.0), (5.0, 3, 6, 0.0),
                    (10.0, 2, 10, 6.5), (20.0, 1, 15, 2.0), (50.0, 2, 20, 10.0),
                    (100.0, 3, 25, 15.0), (200.0, 1, 30, 30.0), (400.0, 2, 40, 20.0))
ROUTE_POINTS = ((1.0, 0.3), (10.0, -2.5), (100.0, 5.0), (1000.0, 40.2), (0.5, 0.0),
                (5.0, 1.7), (50.0, -10.0), (200.0, 12.5), (2000.0, 60.0), (4000.0, -30.0))


def kappa_bound_suite(kernel: JumpKernel, points=KAPPA_BOUND_POINTS) -> list[dict]:
    """``kappabound2_check`` at each (t, b, L)."""
    return [kappabound2_check(kernel, t, b, L) for t, b, L in points]


def tau_bound_suite(kernel: JumpKernel, points=TAU_BOUND_POINTS) -> list[dict]:
    """``tau_bound_check`` for the {0, K} step of length L with A = (a, inf), per (t, K, L, a)."""
    return [tau_bound_check(DeterministicStep(K, L), kernel, K, t, [(a, INF)])
            for t, K, L, a in points]


def route_agreement(kernel: JumpKernel, K: int, points=ROUTE_POINTS, rel_tol: float = 1e-8) -> list[dict]:
    """Sum and positive-part routes for mu_t((y, inf)) of the untruncated full step."""
    step = DeterministicStep(K)
    out = []
    for t, y in points:
        s = intensity(step, kernel, K, t, [(y, INF)], route="sum")
        p = intensity(step, kernel, K, t, [(y, INF)], route="step")
        rel = abs(s - p) / max(abs(p), 1e-300)
        out.append({"t": t, "y": y, "K": K, "sum": s, "step": p, "rel_error": rel,
                    "holds": bool(rel < rel_tol)})
    return out
