"""Step initial conditions: deterministic L-steps and product measures.

All profiles are supported on the nonpositive sites.  ``L`` is the block
length of the truncation (sites ``-L < x <= 0``); ``math.inf`` means no
truncation.  Residues of periodic laws are indexed by ``(-x) mod r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .state import Configuration


class InitialProfile:
    K: int
    L: float

    def marginal(self, x: int) -> np.ndarray:
        """Law of eta(x) as a probability vector over 0..K."""
        raise NotImplementedError

    def truncated(self, L) -> "InitialProfile":
        raise NotImplementedError

    def in_block(self, x: int) -> bool:
        return x <= 0 and x > -self.L

    @property
    def is_deterministic(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class DeterministicStep(InitialProfile):
    K: int
    L: float = math.inf
    layers: int | None = None

    def __post_init__(self):
        j = self.K if self.layers is None else self.layers
        if not 1 <= j <= self.K:
            raise ValueError("layers must lie in 1..K")
        object.__setattr__(self, "layers", j)

    @property
    def is_deterministic(self) -> bool:
        return True

    def marginal(self, x):
        out = np.zeros(self.K + 1)
        out[self.layers if self.in_block(x) else 0] = 1.0
        return out

    def truncated(self, L):
        return DeterministicStep(self.K, min(self.L, L), self.layers)

    def to_dict(self):
        return {"variant": "step", "K": self.K, "L": _jsonable(self.L), "layers": self.layers}


@dataclass(frozen=True)
class ProductPeriodic(InitialProfile):
    K: int
    laws: tuple[tuple[float, ...], ...]
    L: float = math.inf

    def __post_init__(self):
        laws = tuple(tuple(float(q) for q in law) for law in self.laws)
        if not laws:
            raise ValueError("need at least one residue law")
        for law in laws:
            if len(law) != self.K + 1 or min(law) < 0 or abs(sum(law) - 1) > 1e-12:
                raise ValueError(f"each law must be a distribution on 0..{self.K}")
        object.__setattr__(self, "laws", laws)

    @classmethod
    def from_means(cls, K: int, means, L=math.inf) -> "ProductPeriodic":
        """Two-point laws on {floor(m), ceil(m)} with the given means."""
        laws = []
        for m in means:
            if not 0 <= m <= K:
                raise ValueError("means must lie in [0, K]")
            law = [0.0] * (K + 1)
            lo = math.floor(m)
            frac = m - lo
            law[lo] += 1 - frac
            if frac > 0:
                law[lo + 1] += frac
            laws.append(tuple(law))
        return cls(K, tuple(laws), L)

    @property
    def period(self) -> int:
        return len(self.laws)

    def marginal(self, x):
        if not self.in_block(x):
            out = np.zeros(self.K + 1)
            out[0] = 1.0
            return out
        return np.array(self.laws[(-x) % self.period])

    def truncated(self, L):
        return ProductPeriodic(self.K, self.laws, min(self.L, L))

    def to_dict(self):
        return {"variant": "periodic", "K": self.K, "L": _jsonable(self.L),
                "laws": [list(law) for law in self.laws]}


@dataclass(frozen=True)
class BinomialStep(InitialProfile):
    K: int
    alpha: float
    L: float = math.inf

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")

    def marginal(self, x):
        if not self.in_block(x):
            out = np.zeros(self.K + 1)
            out[0] = 1.0
            return out
        return stats.binom.pmf(np.arange(self.K + 1), self.K, self.alpha)

    def truncated(self, L):
        return BinomialStep(self.K, self.alpha, min(self.L, L))

    def to_dict(self):
        return {"variant": "binomial", "K": self.K, "L": _jsonable(self.L), "alpha": self.alpha}


def _jsonable(L):
    return "inf" if math.isinf(L) else int(L)


def mean_occupation(profile: InitialProfile, x: int) -> float:
    if isinstance(profile, DeterministicStep):
        return float(profile.layers) if profile.in_block(x) else 0.0
    if isinstance(profile, BinomialStep):
        return profile.K * profile.alpha if profile.in_block(x) else 0.0
    law = profile.marginal(x)
    return float(np.dot(np.arange(len(law)), law))


def mean_occupation_vector(profile: InitialProfile, lo: int, hi: int) -> np.ndarray:
    return np.array([mean_occupation(profile, x) for x in range(lo, hi + 1)])


def c_nu(profile: InitialProfile) -> float:
    """Cesaro mean density behind the origin (of the untruncated law)."""
    if isinstance(profile, DeterministicStep):
        return float(profile.layers)
    if isinstance(profile, BinomialStep):
        return profile.K * profile.alpha
    if isinstance(profile, ProductPeriodic):
        k = np.arange(profile.K + 1)
        return float(np.mean([np.dot(k, law) for law in profile.laws]))
    raise TypeError(f"unsupported profile {type(profile).__name__}")


def cesaro_average(profile: InitialProfile, k: int) -> float:
    """(1/k) sum_{x<k} E[eta(-x)] ignoring truncation."""
    full = profile.truncated(math.inf) if not math.isinf(profile.L) else profile
    base = type(full)
    if base is ProductPeriodic:
        full = ProductPeriodic(full.K, full.laws, math.inf)
    return float(np.mean([mean_occupation(full, -x) for x in range(k)]))


def sample_configuration(profile: InitialProfile, L_truncation, rng: np.random.Generator) -> Configuration:
    """Independent site draws on (-L, 0], zeros elsewhere."""
    L = min(profile.L, L_truncation)
    if math.isinf(L):
        raise ValueError("simulation needs a finite truncation")
    L = int(L)
    lo = -L + 1
    if isinstance(profile, DeterministicStep):
        occ = np.full(L, profile.layers, dtype=np.int64)
    elif isinstance(profile, BinomialStep):
        occ = rng.binomial(profile.K, profile.alpha, size=L).astype(np.int64)
    else:
        occ = np.empty(L, dtype=np.int64)
        vals = np.arange(profile.K + 1)
        for r, law in enumerate(profile.laws):
            idx = np.arange(r, L, profile.period)  # distance from the origin
            occ[L - 1 - idx] = rng.choice(vals, size=len(idx), p=law)
    return Configuration(lo, occ, profile.K)


def profile_from_dict(spec: dict) -> InitialProfile:
    variant = spec["variant"]
    K = int(spec["K"])
    L = spec.get("L", "inf")
    L = math.inf if L in ("inf", None, math.inf) else int(L)
    if variant == "step":
        return DeterministicStep(K, L, spec.get("layers"))
    if variant == "binomial":
        return BinomialStep(K, float(spec["alpha"]), L)
    if variant == "periodic":
        if "laws" in spec:
            return ProductPeriodic(K, tuple(tuple(law) for law in spec["laws"]), L)
        return ProductPeriodic.from_means(K, spec["means"], L)
    raise ValueError(f"unknown profile variant {variant!r}")
