"""Symmetric, translation-invariant jump kernels p(0, .) on the integers.

Only finitely supported kernels are accepted.  An infinite-range kernel
has to be cut at some tail mass ``eps`` and renormalized by the caller;
the cut is recorded in ``truncation_eps`` and echoed into manifests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import AsymmetricKernel, KernelError, MassAtZero, NotNormalized, Reducible

NORM_TOL = 1e-12


@dataclass(frozen=True)
class JumpKernel:
    offsets: tuple[int, ...]
    probs: tuple[float, ...]
    truncation_eps: float = 0.0

    def __post_init__(self):
        offsets = tuple(int(y) for y in self.offsets)
        probs = tuple(float(q) for q in self.probs)
        if not offsets or len(offsets) != len(probs):
            raise KernelError("offsets and probs must be nonempty and aligned")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def nearest_neighbor(cls) -> "JumpKernel":
        return cls((-1, 1), (0.5, 0.5))

    @classmethod
    def from_pairs(cls, pairs, truncation_eps: float = 0.0) -> "JumpKernel":
        pairs = list(pairs)
        return cls(tuple(y for y, _ in pairs), tuple(q for _, q in pairs), truncation_eps)

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.offsets, self.probs))

    @property
    def max_offset(self) -> int:
        return max(abs(y) for y in self.offsets)

    @property
    def variance(self) -> float:
        return moment(self, 2)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def m4(self) -> float:
        return moment(self, 4)

    @property
    def mgf_radius(self) -> float:
        # finite support: every r works; report 1 by convention
        return 1.0

    def as_dense(self) -> np.ndarray:
        """Probabilities on offsets -R..R as a dense vector of length 2R+1."""
        R = self.max_offset
        out = np.zeros(2 * R + 1)
        for y, q in zip(self.offsets, self.probs):
            out[y + R] += q
        return out

    def mgf(self, r: float) -> float:
        return float(sum(q * math.exp(r * y) for y, q in zip(self.offsets, self.probs)))

    def to_dict(self) -> dict:
        return {
            "pairs": [[y, q] for y, q in zip(self.offsets, self.probs)],
            "truncation_eps": self.truncation_eps,
        }


@dataclass
class ValidationReport:
    checks: dict[str, bool] = field(default_factory=dict)
    messages: dict[str, str] = field(default_factory=dict)
    sigma: float | None = None
    m4: float | None = None
    mgf_radius: float | None = None
    truncation_eps: float = 0.0

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _collapse(kernel: JumpKernel) -> dict[int, float]:
    mass: dict[int, float] = {}
    for y, q in zip(kernel.offsets, kernel.probs):
        mass[y] = mass.get(y, 0.0) + q
    return mass


def validate(kernel: JumpKernel, strict: bool = True) -> ValidationReport:
    """Check the standing assumptions on ``kernel``.

    Every clause is evaluated and recorded.  With ``strict`` the first
    failing clause is raised as its dedicated exception.
    """
    mass = _collapse(kernel)
    rep = ValidationReport(truncation_eps=kernel.truncation_eps)
    failures: list[KernelError] = []

    nonneg = all(q >= 0 for q in kernel.probs)
    total = sum(mass.values())
    rep.checks["normalized"] = nonneg and abs(total - 1.0) <= NORM_TOL
    if not rep.checks["normalized"]:
        msg = f"probabilities must be nonnegative and sum to 1 (sum={total!r})"
        rep.messages["normalized"] = msg
        failures.append(NotNormalized(msg))

    rep.checks["no_mass_at_zero"] = mass.get(0, 0.0) == 0.0
    if not rep.checks["no_mass_at_zero"]:
        msg = f"p(0,0) must be 0, got {mass[0]!r}"
        rep.messages["no_mass_at_zero"] = msg
        failures.append(MassAtZero(msg))

    asym = [y for y, q in mass.items() if abs(q - mass.get(-y, 0.0)) > NORM_TOL]
    rep.checks["symmetric"] = not asym
    if asym:
        y = min(asym, key=abs)
        msg = f"p(0,{y})={mass[y]!r} differs from p(0,{-y})={mass.get(-y, 0.0)!r}"
        rep.messages["symmetric"] = msg
        failures.append(AsymmetricKernel(msg))

    support = [abs(y) for y, q in mass.items() if q > 0 and y != 0]
    g = reduce(math.gcd, support, 0)
    rep.checks["irreducible"] = g == 1
    if g != 1:
        msg = f"support generates {g}Z, not Z"
        rep.messages["irreducible"] = msg
        failures.append(Reducible(msg))

    if rep.ok:
        rep.sigma = kernel.sigma
        rep.m4 = kernel.m4
        rep.mgf_radius = kernel.mgf_radius
    elif strict:
        raise failures[0]
    return rep


def moment(kernel: JumpKernel, k: int) -> float:
    """Sum of y**k p(0, y); odd moments of a symmetric kernel are exactly 0."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    mass = _collapse(kernel)
    if k % 2 == 1 and all(abs(mass.get(-y, 0.0) - q) <= NORM_TOL for y, q in mass.items()):
        return 0.0
    return float(sum(q * float(y) ** k for y, q in mass.items()))
