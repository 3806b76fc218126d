"""Exact finite-state checks for the n-particle semigroup comparisons.

Sites are ``0 .. m-1`` with a symmetric kernel ``P`` (zero diagonal, row
sums at most one, not necessarily translation invariant).  ``V`` is the
n-particle K-SEP generator on Omega_n^K and ``U`` the generator of n
independent walks at rate K on the full product space.  Walk laws
``P_x(zeta_t in A)`` below always refer to the rate-1 walk with generator
``P - diag(rowsum P)``.

Every ``check_*`` function returns a :class:`Report` with the computed
quantities, the smallest slack and a pass flag; nothing is asserted here.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate, linalg, sparse, stats

from .errors import DomainError, NotPositiveDefinite, TooLarge

STATE_CAP = 2_000_000
UNIF_TOL = 1e-12
PD_TOL = -1e-10


# --- kernels on a finite site set -------------------------------------------

@dataclass(frozen=True)
class SiteKernel:
    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DomainError("kernel must be a square matrix")
        if np.any(P < 0) or np.any(np.diag(P) != 0) or not np.allclose(P, P.T, atol=0):
            raise DomainError("kernel must be nonnegative, symmetric, with zero diagonal")
        if np.any(P.sum(axis=1) > 1 + 1e-12):
            raise DomainError("kernel rows must sum to at most 1")
        object.__setattr__(self, "P", P)
        w, Q = np.linalg.eigh(self.generator())
        object.__setattr__(self, "_eig", (w, Q))

    @property
    def m(self) -> int:
        return self.P.shape[0]

    @classmethod
    def path(cls, m: int) -> "SiteKernel":
        P = np.zeros((m, m))
        for x in range(m - 1):
            P[x, x + 1] = P[x + 1, x] = 0.5
        return cls(P)

    @classmethod
    def torus(cls, m: int) -> "SiteKernel":
        if m < 3:
            raise DomainError("a torus needs at least 3 sites")
        P = np.zeros((m, m))
        for x in range(m):
            P[x, (x + 1) % m] = P[(x + 1) % m, x] = 0.5
        return cls(P)

    @classmethod
    def random(cls, m: int, rng: np.random.Generator, density: float = 0.6) -> "SiteKernel":
        """Random symmetric rates on a connected graph (a path plus extra edges)."""
        W = np.zeros((m, m))
        for x in range(m - 1):
            W[x, x + 1] = rng.uniform(0.2, 1.0)
        for x in range(m):
            for y in range(x + 2, m):
                if rng.random() < density:
                    W[x, y] = rng.uniform(0.0, 1.0)
        W = W + W.T
        W /= W.sum(axis=1).max()
        return cls(W)

    def generator(self) -> np.ndarray:
        return self.P - np.diag(self.P.sum(axis=1))

    def walk(self, t: float) -> np.ndarray:
        """Matrix of P_x(zeta_t = y) for the rate-1 walk."""
        if t == 0:
            return np.eye(self.m)
        w, Q = self._eig
        return (Q * np.exp(t * w)) @ Q.T

    def hit(self, t: float, A) -> np.ndarray:
        """Vector x -> P_x(zeta_t in A)."""
        return self.walk(t) @ _mask(A, self.m)

    def to_dict(self) -> dict:
        return {"m": self.m, "P": self.P.tolist()}


def _mask(A, m: int) -> np.ndarray:
    out = np.zeros(m)
    out[list(A)] = 1.0
    return out


# --- state spaces and generators ---------------------------------------------

@dataclass
class MultiParticleSpace:
    m: int
    n: int
    K: int
    states: np.ndarray
    index: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.states)

    def flat(self) -> np.ndarray:
        """Position of each state inside the full product space sites^n."""
        return np.ravel_multi_index(self.states.T, (self.m,) * self.n) if self.n else np.zeros(1, int)

    def distinct_mask(self) -> np.ndarray:
        """True on Omega_n^1 (all coordinates distinct)."""
        s = np.sort(self.states, axis=1)
        return np.all(np.diff(s, axis=1) != 0, axis=1) if self.n > 1 else np.ones(self.size, bool)


def build_space(m: int, n: int, K: int, cap: int = STATE_CAP) -> MultiParticleSpace:
    """Enumerate Omega_n^K over sites 0..m-1 in lexicographic order."""
    if m * K < n:
        raise DomainError(f"{n} particles do not fit on {m} sites with cap {K}")
    if m ** n > cap * 8:
        raise TooLarge(f"product space of size {m ** n} is too large to enumerate")
    grid = np.array(list(itertools.product(range(m), repeat=n)), dtype=np.int64).reshape(-1, n)
    if K < n and n > 1:
        counts = np.stack([(grid == grid[:, [i]]).sum(axis=1) for i in range(n)], axis=1)
        grid = grid[counts.max(axis=1) <= K]
    if len(grid) > cap:
        raise TooLarge(f"|Omega| = {len(grid)} exceeds cap {cap}")
    index = {tuple(s): i for i, s in enumerate(grid.tolist())}
    return MultiParticleSpace(m, n, K, grid, index)


@dataclass
class GeneratorMatrix:
    matrix: sparse.csr_matrix
    tag: str
    K: int
    space: MultiParticleSpace

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _generator(space: MultiParticleSpace, kernel: SiteKernel, K: int, exclusion: bool,
               tag: str) -> GeneratorMatrix:
    rows, cols, vals = [], [], []
    P = kernel.P
    for a, x in enumerate(space.states.tolist()):
        out = 0.0
        for i, xi in enumerate(x):
            for y in np.nonzero(P[xi])[0].tolist():
                if exclusion:
                    rate = P[xi, y] * (K - x.count(y))
                else:
                    rate = K * P[xi, y]
                if rate <= 0:
                    continue
                z = list(x)
                z[i] = y
                rows.append(a)
                cols.append(space.index[tuple(z)])
                vals.append(rate)
                out += rate
        rows.append(a)
        cols.append(a)
        vals.append(-out)
    M = sparse.csr_matrix((vals, (rows, cols)), shape=(space.size, space.size))
    M.sum_duplicates()
    return GeneratorMatrix(M, tag, K, space)


def generator_V(space: MultiParticleSpace, kernel: SiteKernel) -> GeneratorMatrix:
    """K-SEP generator on Omega_n^K: particle i jumps x_i -> y at rate p(x_i, y)(K - #{j: x_j = y})."""
    return _generator(space, kernel, space.K, True, "V")


def generator_U(kernel: SiteKernel, n: int, K: int) -> GeneratorMatrix:
    """Independent rate-K walkers on the full product space sites^n."""
    space = build_space(kernel.m, n, n)
    return _generator(space, kernel, K, False, "U")


def apply_semigroup(gen: GeneratorMatrix | sparse.spmatrix, t: float, f,
                    tol: float = UNIF_TOL, transpose: bool = False):
    """exp(t G) f (or exp(t G^T) f) by uniformization.

    Returns (values, error_bound); the bound is the dropped Poisson mass
    times the sup (or l1, for the transpose) norm of ``f``.
    """
    G = gen.matrix if isinstance(gen, GeneratorMatrix) else sparse.csr_matrix(gen)
    if transpose:
        G = G.T.tocsr()
    f = np.asarray(f, dtype=float)
    if t == 0:
        return f.copy(), 0.0
    lam = float(np.max(-G.diagonal()))
    if lam == 0:
        return f.copy(), 0.0
    Pm = sparse.identity(G.shape[0], format="csr") + G / lam
    mu = lam * t
    n_hi = int(stats.poisson.isf(tol / 2, mu)) + 1
    n_lo = max(int(stats.poisson.ppf(tol / 2, mu)) - 1, 0)
    ks = np.arange(n_hi + 1)
    w = stats.poisson.pmf(ks, mu)
    out = np.zeros_like(f)
    v = f.copy()
    for k in range(n_hi + 1):
        if k >= n_lo:
            out += w[k] * v
        v = Pm @ v
    lost = float(stats.poisson.sf(n_hi, mu)) + (float(stats.poisson.cdf(n_lo - 1, mu)) if n_lo else 0.0)
    norm = np.abs(f).sum() if transpose else np.abs(f).max()
    return out, lost * norm


def expm_apply(gen: GeneratorMatrix, t: float, f) -> np.ndarray:
    """Dense matrix exponential oracle."""
    return linalg.expm(t * gen.dense()) @ np.asarray(f, dtype=float)


def apply_U(kernel: SiteKernel, n: int, K: int, t: float, f: np.ndarray) -> np.ndarray:
    """U_n^K(t) f for ``f`` given as an n-dimensional array over sites^n."""
    W = kernel.walk(K * t)
    out = np.asarray(f, dtype=float)
    for axis in range(n):
        out = np.moveaxis(np.tensordot(W, out, axes=([1], [axis])), 0, axis)
    return out


def box_indicator(m: int, sets) -> np.ndarray:
    """1_{B_1 x ... x B_n} as an array over sites^n."""
    out = np.ones(())
    for B in sets:
        out = np.multiply.outer(out, _mask(B, m))
    return out


# --- reports -------------------------------------------------------------------

@dataclass
class Report:
    name: str
    instance: dict
    quantities: dict
    slack: float
    passed: bool
    notes: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "instance": self.instance, "quantities": self.quantities,
                "slack": self.slack, "passed": self.passed, "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, Fraction):
        return str(v)
    raise TypeError(type(v))


# --- positive definiteness -----------------------------------------------------

def is_symmetric(f: np.ndarray) -> bool:
    return all(np.array_equal(f, np.transpose(f, perm))
               for perm in itertools.permutations(range(f.ndim)))


def is_positive_definite(f: np.ndarray, tol: float = PD_TOL) -> bool:
    """Quadratic form of every variable pair is PSD on zero-sum vectors."""
    f = np.asarray(f, dtype=float)
    n = f.ndim
    if n < 2:
        return True
    m = f.shape[0]
    Q = np.eye(m) - 1.0 / m
    for i, j in itertools.combinations(range(n), 2):
        rest = [k for k in range(n) if k not in (i, j)]
        g = np.moveaxis(f, (i, j), (0, 1)).reshape(m, m, -1)
        for c in range(g.shape[2]):
            M = g[:, :, c]
            M = (M + M.T) / 2
            if np.linalg.eigvalsh(Q @ M @ Q).min() < tol:
                return False
    return True


# --- semigroup comparisons ---------------------------------------------------------

def check_VU(space: MultiParticleSpace, kernel: SiteKernel, t_grid, f: np.ndarray,
             tol: float = 1e-10) -> Report:
    """V_n^K(t) f <= U_n^K(t) f on Omega_n^K for a symmetric positive-definite f."""
    f = np.asarray(f, dtype=float)
    if not is_symmetric(f):
        raise NotPositiveDefinite("f is not symmetric")
    if not is_positive_definite(f):
        raise NotPositiveDefinite("f is not positive definite in each pair of variables")
    V = generator_V(space, kernel)
    flat = space.flat()
    fo = f.reshape(-1)[flat]
    slacks = {}
    for t in t_grid:
        v, err = apply_semigroup(V, t, fo)
        u = apply_U(kernel, space.n, space.K, t, f).reshape(-1)[flat]
        slacks[float(t)] = float((u - v).min())
    worst = min(slacks.values())
    return Report("VU", {"m": kernel.m, "n": space.n, "K": space.K},
                  {"slack_by_t": slacks}, worst, worst >= -tol)


def check_negative_association(space: MultiParticleSpace, kernel: SiteKernel, A, t: float,
                               tol: float = 1e-10) -> Report:
    """P(all n tracked particles in A at time t/K) <= prod_k P_{x_k}(zeta_t in A)."""
    n, K = space.n, space.K
    V = generator_V(space, kernel)
    lhs, _ = apply_semigroup(V, t / K, np.all(np.isin(space.states, list(A)), axis=1).astype(float))
    hit = kernel.hit(t, A)
    rhs = np.prod(hit[space.states], axis=1)
    slack = float((rhs - lhs).min())
    return Report("negative_association", {"m": kernel.m, "n": n, "K": K, "A": sorted(A), "t": t},
                  {"max_lhs": float(lhs.max()), "max_rhs": float(rhs.max())}, slack, slack >= -tol)


def _pair_term(kernel: SiteKernel, states: np.ndarray, a: np.ndarray) -> np.ndarray:
    """sum_{i<j} p(x_i, x_j) (a(x_i) - a(x_j))^2 prod_{k != i, j} a(x_k)."""
    n = states.shape[1]
    out = np.zeros(len(states))
    for i, j in itertools.combinations(range(n), 2):
        xi, xj = states[:, i], states[:, j]
        term = kernel.P[xi, xj] * (a[xi] - a[xj]) ** 2
        for k in range(n):
            if k not in (i, j):
                term = term * a[states[:, k]]
        out += term
    return out


def difference_formula_rhs(space: MultiParticleSpace, kernel: SiteKernel, A, t: float,
                           V: GeneratorMatrix | None = None, epsabs: float = 1e-13):
    """(1/K) int_0^t V_n^K((t-s)/K) [pair term at s] ds, by adaptive quadrature.

    Returns (values on Omega, quadrature error estimate).
    """
    K = space.K
    V = generator_V(space, kernel) if V is None else V
    if t == 0:
        return np.zeros(space.size), 0.0

    def integrand(s):
        g = _pair_term(kernel, space.states, kernel.hit(s, A))
        v, _ = apply_semigroup(V, (t - s) / K, g)
        return v

    val, err = integrate.quad_vec(integrand, 0.0, t, epsabs=epsabs, epsrel=1e-12, limit=400)
    return val / K, float(err) / K


def check_difference_formula(space: MultiParticleSpace, kernel: SiteKernel, A, t: float,
                             tol: float = 1e-8) -> Report:
    """[U(t/K) - V(t/K)] 1_{A^n} by matrix exponentials against the quadrature form.

    The quadrature side carries the prefactor 1/K; the same integral
    without it is reported as ``gap_without_1_over_K``.
    """
    K, n = space.K, space.n
    V = generator_V(space, kernel)
    flat = space.flat()
    ind = box_indicator(kernel.m, [A] * n)
    lhs = apply_U(kernel, n, K, t / K, ind).reshape(-1)[flat] - expm_apply(V, t / K, ind.reshape(-1)[flat])
    rhs, qerr = difference_formula_rhs(space, kernel, A, t, V)
    gap = float(np.abs(lhs - rhs).max())
    gap_raw = float(np.abs(lhs - K * rhs).max())
    return Report("difference_formula", {"m": kernel.m, "n": n, "K": K, "A": sorted(A), "t": t},
                  {"max_abs_lhs": float(np.abs(lhs).max()), "max_gap": gap, "quad_error": qerr,
                   "gap_without_1_over_K": gap_raw},
                  tol - gap, gap <= tol)


# --- finite-instance kappa and tau -----------------------------------------------

def kappa_finite(kernel: SiteKernel, t: float, A, B, epsabs: float = 1e-14) -> float:
    """kappa_t(A, B) with sums over the finite site set."""
    if t == 0:
        return 0.0
    P = kernel.P

    def integrand(s):
        f = kernel.hit(s, B)
        g = kernel.hit(t - s, A)
        D = (f[:, None] - f[None, :]) ** 2
        return float(np.sum(P * D * np.outer(g, g)))

    val, _ = integrate.quad(integrand, 0.0, t, epsabs=epsabs, epsrel=1e-12, limit=400)
    return val


def tau_finite(kernel: SiteKernel, t: float, A, B) -> float:
    """tau_t(A, B) = sum_{x in A} P_x(zeta_t in B)^2."""
    h = kernel.hit(t, B)
    return float(np.sum(h[list(A)] ** 2))


def inner(kernel: SiteKernel, t: float, B, A) -> float:
    """<1_B, U_1^1(t) 1_A> = sum_{x in B} P_x(zeta_t in A)."""
    return float(np.sum(kernel.hit(t, A)[list(B)]))


# --- factorial moments of the occupation process -----------------------------------

def h_count(states: np.ndarray, H, K: int) -> np.ndarray:
    """Number of label choices j with ((x_1, j_1), ..., (x_M, j_M)) distinct in H x [K]."""
    H = set(H)
    out = np.zeros(len(states))
    for a, x in enumerate(states.tolist()):
        if not all(v in H for v in x):
            continue
        val = 1
        for z in set(x):
            c = x.count(z)
            val *= math.perm(K, c) if c <= K else 0
        out[a] = val
    return out


def occupation_space(m: int, K: int, total: int | None = None) -> np.ndarray:
    grid = np.array(list(itertools.product(range(K + 1), repeat=m)), dtype=np.int64)
    if total is not None:
        grid = grid[grid.sum(axis=1) == total]
    return grid


def occupation_law(kernel: SiteKernel, K: int, init: dict, t: float):
    """Exact law at time t of the K-SEP occupation chain on the finite sites.

    ``init`` maps occupation tuples to probabilities.  Returns
    (states, probabilities) over all reachable particle totals.
    """
    totals = sorted({sum(k) for k in init})
    all_states, all_probs = [], []
    for N in totals:
        S = occupation_space(kernel.m, K, N)
        index = {tuple(s): i for i, s in enumerate(S.tolist())}
        rows, cols, vals = [], [], []
        for a, eta in enumerate(S.tolist()):
            out = 0.0
            for x in range(kernel.m):
                if eta[x] == 0:
                    continue
                for y in np.nonzero(kernel.P[x])[0].tolist():
                    r = kernel.P[x, y] * eta[x] * (K - eta[y])
                    if r <= 0:
                        continue
                    z = list(eta)
                    z[x] -= 1
                    z[y] += 1
                    rows.append(a)
                    cols.append(index[tuple(z)])
                    vals.append(r)
                    out += r
            rows.append(a)
            cols.append(a)
            vals.append(-out)
        G = sparse.csr_matrix((vals, (rows, cols)), shape=(len(S), len(S)))
        p0 = np.zeros(len(S))
        for k, q in init.items():
            if sum(k) == N:
                p0[index[tuple(k)]] += q
        pt, _ = apply_semigroup(G, t, p0, transpose=True)
        all_states.append(S)
        all_probs.append(pt)
    return np.concatenate(all_states), np.concatenate(all_probs)


def factorial_moment(states: np.ndarray, probs: np.ndarray, sets, ns) -> float:
    """E[prod_k (N(A_k))_{n_k}] under the given occupation law."""
    val = np.ones(len(states))
    for A, n in zip(sets, ns):
        c = states[:, list(A)].sum(axis=1)
        val *= np.array([math.perm(int(k), n) if n <= k else 0 for k in c], dtype=float)
    return float(np.dot(val, probs))


def _product_law(marginals) -> dict:
    law = {}
    for combo in itertools.product(*[range(len(q)) for q in marginals]):
        p = 1.0
        for x, k in enumerate(combo):
            p *= marginals[x][k]
        if p > 0:
            law[combo] = law.get(combo, 0.0) + p
    return law


def mean_measure(kernel: SiteKernel, t: float, mean_occ: np.ndarray, A) -> float:
    """mu_{t/K}(A) = sum_x E[eta(x)] P_x(zeta_t in A)."""
    return float(np.dot(mean_occ, kernel.hit(t, A)))


def check_factorial_bound(kernel: SiteKernel, K: int, H, sets, ns, t: float,
                          tol: float = 1e-9) -> Report:
    """Both inequalities for the {0, K}-valued profile K 1_H at time t/K.

    The expected factorial product is computed twice: through the
    n-particle semigroup weighted by the label count ``h`` and through the
    full occupation chain.  ``A`` is the hull of the sets on the site line.
    """
    H = sorted(H)
    sets = [sorted(A) for A in sets]
    M = int(sum(ns))
    if M > 4:
        raise TooLarge("factorial checks are limited to M <= 4")
    for A1, A2 in itertools.combinations(sets, 2):
        if set(A1) & set(A2):
            raise DomainError("the sets must be disjoint")
    boxes = [A for A, n in zip(sets, ns) for _ in range(n)]
    hull = list(range(min(min(A) for A in sets), max(max(A) for A in sets) + 1))
    eta = np.zeros(kernel.m)
    eta[H] = K
    mus = [mean_measure(kernel, t, eta, A) for A in sets]
    mu_hull = mean_measure(kernel, t, eta, hull)
    prod_mu = float(np.prod([mu ** n for mu, n in zip(mus, ns)]))

    space = build_space(kernel.m, M, K)
    V = generator_V(space, kernel)
    F = box_indicator(kernel.m, boxes).reshape(-1)[space.flat()]
    VF, verr = apply_semigroup(V, t / K, F)
    h = h_count(space.states, H, K)
    E_sg = float(np.dot(h, VF))
    U_part = K ** M * float(np.sum(apply_U(kernel, M, K, t / K, box_indicator(kernel.m, boxes))
                                   [tuple(np.ix_(*[H] * M))]))

    S, p = occupation_law(kernel, K, {tuple(int(v) for v in eta): 1.0}, t / K)
    E_occ = factorial_moment(S, p, sets, ns)

    kap = kappa_finite(kernel, t, hull, H)
    tau = tau_finite(kernel, t, hull, H)
    pref = K ** 2 * math.comb(M, 2) * mu_hull ** (M - 2) if M >= 2 else 0.0
    bound = pref * (kap + tau)
    bound_corr = pref * (kap / K + tau)
    diff = prod_mu - E_occ
    slack = min(diff, bound - diff)
    q = {"prod_mu": prod_mu, "E_occupation": E_occ, "E_semigroup": E_sg,
         "mu_via_U": U_part, "diff": diff, "bound": bound, "bound_with_1_over_K": bound_corr,
         "kappa": kap, "tau": tau, "mu_hull": mu_hull,
         "route_gap": abs(E_sg - E_occ), "mu_gap": abs(U_part - prod_mu)}
    ok = diff >= -tol and diff <= bound + tol
    return Report("factorial_bound",
                  {"m": kernel.m, "K": K, "H": H, "sets": sets, "ns": list(ns), "t": t},
                  q, slack, ok)


def check_semigroup_route(kernel: SiteKernel, K: int, H, sets, ns, t: float,
                        tol: float = 1e-10) -> Report:
    """Semigroup representation of the factorial-moment gap against the occupation chain."""
    r = check_factorial_bound(kernel, K, H, sets, ns, t)
    q = r.quantities
    gap = max(q["route_gap"], q["mu_gap"])
    return Report("semigroup_route", r.instance, {k: q[k] for k in
                  ("E_occupation", "E_semigroup", "prod_mu", "mu_via_U", "route_gap", "mu_gap")},
                  tol - gap, gap <= tol)


def check_nto2(alpha, beta, n: int) -> Report:
    """Brute-force pair-sum identity; exact when the inputs are rational.

    The identity needs ``alpha`` to vanish on the diagonal; the report
    carries the diagonal mass so a failure can be attributed.
    """
    alpha = [[_exact(v) for v in row] for row in alpha]
    beta = [_exact(v) for v in beta]
    m = len(beta)
    if n < 2:
        raise DomainError("n must be at least 2")
    lhs = Fraction(0) if _all_fraction(alpha, beta) else 0.0
    for x in itertools.product(range(m), repeat=n):
        for i, j in itertools.combinations(range(n), 2):
            term = alpha[x[i]][x[j]]
            for k in range(n):
                if k not in (i, j):
                    term = term * beta[x[k]]
            lhs += term
    off = sum(alpha[x][y] for x in range(m) for y in range(m) if x != y)
    diag = sum(alpha[x][x] for x in range(m))
    rhs = math.comb(n, 2) * off * sum(beta) ** (n - 2)
    exact = isinstance(lhs, Fraction)
    gap = abs(lhs - rhs)
    ok = gap == 0 if exact else gap <= 1e-12 * max(1.0, abs(float(rhs)))
    return Report("nto2", {"m": m, "n": n, "exact": exact},
                  {"lhs": lhs, "rhs": rhs, "diagonal_mass": diag},
                  -float(gap), bool(ok))


def _exact(v):
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, np.integer):
        return Fraction(int(v))
    return float(v)


def _all_fraction(alpha, beta) -> bool:
    return all(isinstance(v, Fraction) for row in alpha for v in row) and \
        all(isinstance(v, Fraction) for v in beta)


def check_product_measure_bound(kernel: SiteKernel, K: int, marginals, A, n: int, t: float,
                                eta_below=None, tol: float = 1e-9) -> Report:
    """Sandwich for a product initial law versus chi = K 1_{nu > 0}, at time t/K.

    ``marginals[x]`` is the law of eta(x) on 0..K.  If ``eta_below`` is a
    deterministic profile with eta_below <= chi, its monotonicity pair is
    checked as well.
    """
    marginals = [np.asarray(q, dtype=float) for q in marginals]
    if len(marginals) != kernel.m or any(len(q) != K + 1 for q in marginals):
        raise DomainError("need one law on 0..K per site")
    A = sorted(A)
    law = _product_law(marginals)
    S, p = occupation_law(kernel, K, law, t / K)
    mean_occ = np.array([np.dot(np.arange(K + 1), q) for q in marginals])
    mu_nu = mean_measure(kernel, t, mean_occ, A)
    diff_nu = mu_nu ** n - factorial_moment(S, p, [A], [n])

    support = [x for x, q in enumerate(marginals) if q[0] < 1.0]
    chi = np.zeros(kernel.m, dtype=np.int64)
    chi[support] = K
    Sc, pc = occupation_law(kernel, K, {tuple(chi.tolist()): 1.0}, t / K)
    mu_chi = mean_measure(kernel, t, chi.astype(float), A)
    diff_chi = mu_chi ** n - factorial_moment(Sc, pc, [A], [n])

    tau = tau_finite(kernel, t, support, A)
    lower = -K ** 2 * math.comb(n, 2) * mu_chi ** (n - 2) * tau if n >= 2 else 0.0
    q = {"mu_nu": mu_nu, "mu_chi": mu_chi, "diff_nu": diff_nu, "diff_chi": diff_chi,
         "lower": lower, "tau": tau}
    slack = min(diff_nu - lower, diff_chi - diff_nu)
    if eta_below is not None:
        eta = np.asarray(eta_below, dtype=np.int64)
        if np.any(eta > chi):
            raise DomainError("eta_below must lie below chi")
        Se, pe = occupation_law(kernel, K, {tuple(eta.tolist()): 1.0}, t / K)
        mu_eta = mean_measure(kernel, t, eta.astype(float), A)
        diff_eta = mu_eta ** n - factorial_moment(Se, pe, [A], [n])
        q["diff_eta"] = diff_eta
        slack = min(slack, diff_eta, diff_chi - diff_eta)
    return Report("product_measure_bound",
                  {"m": kernel.m, "K": K, "A": A, "n": n, "t": t,
                   "marginals": [q_.tolist() for q_ in marginals]},
                  q, slack, slack >= -tol)


# --- sums combining U and V ------------------------------------------------------

def _sum_terms(space, kernel, t, A, Bs, h=None):
    """Pieces shared by the sum-symmetry, kappa/tau and sandwich checks (time t/K)."""
    n, K, m = space.n, space.K, kernel.m
    V = generator_V(space, kernel)
    flat = space.flat()
    fA = box_indicator(m, [A] * n)
    g = box_indicator(m, Bs)
    UfA = apply_U(kernel, n, K, t / K, fA)
    Ug = apply_U(kernel, n, K, t / K, g)
    VfA, _ = apply_semigroup(V, t / K, fA.reshape(-1)[flat])
    Vg, _ = apply_semigroup(V, t / K, g.reshape(-1)[flat])
    full = build_space(m, n, n)
    distinct_full = full.distinct_mask()
    distinct = space.distinct_mask()
    return dict(V=V, flat=flat, fA=fA.reshape(-1), g=g.reshape(-1), UfA=UfA.reshape(-1),
                Ug=Ug.reshape(-1), VfA=VfA, Vg=Vg, distinct_full=distinct_full,
                distinct=distinct)


def check_sum_symmetry(space: MultiParticleSpace, kernel: SiteKernel, A, Bs, t: float,
                      h: np.ndarray | None = None, tol: float = 1e-10) -> Report:
    """0 <= sum f1 U g - sum_Omega f2 V g <= the two-term bound, at time t/K.

    f1 = 1_{A^n}, f2 = h f1 with 0 <= h <= 1 and h = 1 on Omega^1
    (default: K^{-n} times the label count over A), g = 1_{B_1 x ... x B_n}.
    """
    n, K = space.n, space.K
    T = _sum_terms(space, kernel, t, A, Bs)
    if h is None:
        h = h_count(space.states, A, K) / K ** n
        h[~np.isin(space.states, list(A)).all(axis=1)] = 1.0
    f2 = h * T["fA"][T["flat"]]
    quantity = float(np.dot(T["fA"], T["Ug"]) - np.dot(f2, T["Vg"]))
    on_omega1 = float(np.dot(T["g"][T["flat"]][T["distinct"]],
                             (T["UfA"][T["flat"]] - T["VfA"])[T["distinct"]]))
    off = float(np.dot(T["g"][~T["distinct_full"]], T["UfA"][~T["distinct_full"]]))
    bound = on_omega1 + off
    slack = min(quantity, bound - quantity)
    return Report("sum_symmetry", {"m": kernel.m, "n": n, "K": K, "A": sorted(A),
                                  "Bs": [sorted(B) for B in Bs], "t": t},
                  {"quantity": quantity, "bound": bound, "omega1_part": on_omega1,
                   "off_part": off}, slack, slack >= -tol)


def check_kappa_tau_partial_sums(space: MultiParticleSpace, kernel: SiteKernel, A, Bs, t: float,
                         tol: float = 1e-10) -> Report:
    """Omega^1 and off-Omega^1 partial sums against their kappa and tau bounds."""
    n, K = space.n, space.K
    B = sorted(set().union(*map(set, Bs)))
    T = _sum_terms(space, kernel, t, A, Bs)
    part1 = float(np.dot(T["g"][T["flat"]][T["distinct"]],
                         (T["UfA"][T["flat"]] - T["VfA"])[T["distinct"]]))
    part2 = float(np.dot(T["g"][~T["distinct_full"]], T["UfA"][~T["distinct_full"]]))
    ip = inner(kernel, t, B, A)
    pref = math.comb(n, 2) * ip ** (n - 2)
    kap = kappa_finite(kernel, t, B, A)
    tau = tau_finite(kernel, t, B, A)
    q = {"omega1_sum": part1, "kappa_bound": pref * kap, "kappa_bound_with_1_over_K": pref * kap / K,
         "off_sum": part2, "tau_bound": pref * tau, "kappa": kap, "tau": tau}
    slack = min(pref * kap - part1, pref * tau - part2)
    return Report("kappa_tau_partial_sums", {"m": kernel.m, "n": n, "K": K, "A": sorted(A),
                                     "Bs": [sorted(b) for b in Bs], "t": t},
                  q, slack, slack >= -tol)


def check_sum_sandwich(space: MultiParticleSpace, kernel: SiteKernel, A, Bs, t: float,
                  h: np.ndarray | None = None, tol: float = 1e-10) -> Report:
    """0 <= sum_{A^n} U g - sum_{Omega cap A^n} h V g <= C(n,2) <1_B,U 1_A>^{n-2}(kappa + tau)."""
    n, K = space.n, space.K
    B = sorted(set().union(*map(set, Bs)))
    T = _sum_terms(space, kernel, t, A, Bs)
    if h is None:
        h = h_count(space.states, A, K) / K ** n
    inA = np.isin(space.states, list(A)).all(axis=1)
    quantity = float(np.dot(T["fA"], T["Ug"]) - np.dot((h * inA), T["Vg"]))
    ip = inner(kernel, t, B, A)
    kap = kappa_finite(kernel, t, B, A)
    tau = tau_finite(kernel, t, B, A)
    bound = math.comb(n, 2) * ip ** (n - 2) * (kap + tau)
    slack = min(quantity, bound - quantity)
    return Report("sum_sandwich", {"m": kernel.m, "n": n, "K": K, "A": sorted(A),
                              "Bs": [sorted(b) for b in Bs], "t": t},
                  {"quantity": quantity, "bound": bound, "kappa": kap, "tau": tau},
                  slack, slack >= -tol)


# --- default verification suite -----------------------------------------------------

T_GRID = (0.1, 0.5, 1.0, 5.0)


@dataclass(frozen=True)
class Instance:
    graph: str
    m: int
    n: int
    K: int
    A: tuple

    def kernel(self) -> SiteKernel:
        return SiteKernel.path(self.m) if self.graph == "path" else SiteKernel.torus(self.m)

    def to_dict(self) -> dict:
        return {"graph": self.graph, "m": self.m, "n": self.n, "K": self.K, "A": list(self.A)}


def random_instances(rng: np.random.Generator, count: int, max_sites: int = 7) -> list[Instance]:
    """Path or torus graphs with 3..max_sites sites, n <= 3, K <= 3 and a proper subset A."""
    out = []
    for _ in range(count):
        graph = str(rng.choice(["path", "torus"]))
        m = int(rng.integers(3, max_sites + 1))
        n = int(rng.integers(1, 4))
        K = int(rng.integers(1, 4))
        size = int(rng.integers(1, m))
        A = tuple(sorted(int(a) for a in rng.choice(m, size=size, replace=False)))
        out.append(Instance(graph, m, n, K, A))
    return out


def _tag(report: Report, inst: Instance) -> Report:
    report.instance = {**inst.to_dict(), **report.instance}
    return report


def semigroup_suite(seed: int = 0, count: int = 20, t_grid=T_GRID, tol: float = 1e-8) -> list[Report]:
    """V <= U on 1_{A^n} and the two-route difference formula on random instances."""
    rng = np.random.default_rng(seed)
    reports = []
    for inst in random_instances(rng, count):
        kern = inst.kernel()
        space = build_space(inst.m, inst.n, inst.K)
        f = box_indicator(inst.m, [inst.A] * inst.n)
        reports.append(_tag(check_VU(space, kern, t_grid, f), inst))
        for t in t_grid:
            reports.append(_tag(check_difference_formula(space, kern, inst.A, t, tol), inst))
    return reports


FACTORIAL_CASES = (
    ([[3, 4]], [1]), ([[3, 4]], [2]), ([[3], [4, 5]], [1, 1]), ([[3], [4, 5]], [2, 1]),
    ([[3, 4, 5]], [3]), ([[4], [5]], [2, 2]), ([[3, 4, 5]], [4]),
)


def factorial_suite(times=(0.5, 2.0), tol: float = 1e-9) -> list[Report]:
    """Deterministic-profile factorial bounds (M <= 4) on a six-site path, H = {0, 1, 2}."""
    kern = SiteKernel.path(6)
    H = [0, 1, 2]
    reports = []
    for K in (1, 2, 3):
        for t in times:
            for sets, ns in FACTORIAL_CASES:
                reports.append(check_factorial_bound(kern, K, H, sets, ns, t, tol))
    return reports


def product_suite(times=(0.5, 2.0), tol: float = 1e-9) -> list[Report]:
    """Binomial-marginal sandwich on a five-site path with support {0, 1}."""
    kern = SiteKernel.path(5)
    reports = []
    for K in (1, 2, 3):
        for alpha in (0.3, 0.7):
            law = stats.binom.pmf(np.arange(K + 1), K, alpha)
            empty = np.eye(K + 1)[0]
            marg = [law, law, empty, empty, empty]
            below = [K, max(K - 1, 0), 0, 0, 0]
            for t in times:
                for n in (2, 3):
                    reports.append(check_product_measure_bound(kern, K, marg, [3, 4], n, t,
                                                               eta_below=below, tol=tol))
    return reports


def identity_suite(seed: int = 0) -> list[Report]:
    """Pair-sum identity with rational inputs and a zero diagonal."""
    rng = np.random.default_rng(seed)
    reports = []
    for m in (2, 3, 4):
        for n in (2, 3, 4):
            a = [[Fraction(int(rng.integers(0, 9)), 8) if x != y else Fraction(0)
                  for y in range(m)] for x in range(m)]
            b = [Fraction(int(rng.integers(0, 9)), 8) for _ in range(m)]
            reports.append(check_nto2(a, b, n))
    return reports


def sum_suite(times=(0.5, 2.0)) -> list[Report]:
    """Sum symmetry, kappa/tau partial-sum bounds, the sum sandwich and negative association."""
    kern = SiteKernel.path(5)
    reports = []
    for K in (1, 2, 3):
        for n in (2, 3):
            space = build_space(5, n, K)
            Bs = [[3, 4]] + [[2, 3, 4]] * (n - 1)
            for t in times:
                reports.append(check_sum_symmetry(space, kern, [0, 1], Bs, t))
                reports.append(check_kappa_tau_partial_sums(space, kern, [0, 1], Bs, t))
                reports.append(check_sum_sandwich(space, kern, [0, 1], Bs, t))
                reports.append(check_negative_association(space, kern, [3, 4], t))
            reports.append(check_semigroup_route(kern, K, [0, 1], [[3, 4]], [n], times[-1]))
    return reports


def default_suite(seed: int = 0, count: int = 20) -> list[Report]:
    """Every finite-instance check used by the command-line verifier."""
    return (semigroup_suite(seed, count) + factorial_suite() + product_suite()
            + identity_suite(seed) + sum_suite())
