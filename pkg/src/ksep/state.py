"""Occupation configurations and particle snapshots."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Configuration:
    """Occupation numbers ``occ`` on the window ``lo .. lo + len(occ) - 1``."""

    lo: int
    occ: np.ndarray
    K: int

    def __post_init__(self):
        self.occ = np.asarray(self.occ, dtype=np.int64)
        if self.occ.ndim != 1:
            raise ValueError("occ must be one-dimensional")
        if len(self.occ) and (self.occ.min() < 0 or self.occ.max() > self.K):
            raise ValueError(f"occupations must lie in 0..{self.K}")

    @property
    def hi(self) -> int:
        return self.lo + len(self.occ) - 1

    @property
    def total(self) -> int:
        return int(self.occ.sum())

    def at(self, x: int) -> int:
        i = x - self.lo
        return int(self.occ[i]) if 0 <= i < len(self.occ) else 0

    def positions(self) -> np.ndarray:
        """Particle positions, nonincreasing, one entry per particle."""
        sites = np.arange(self.lo, self.lo + len(self.occ))
        return np.repeat(sites, self.occ)[::-1].copy()

    @classmethod
    def from_sites(cls, occupation: dict[int, int], K: int) -> "Configuration":
        if not occupation:
            return cls(0, np.zeros(0, dtype=np.int64), K)
        lo, hi = min(occupation), max(occupation)
        occ = np.zeros(hi - lo + 1, dtype=np.int64)
        for x, c in occupation.items():
            occ[x - lo] = c
        return cls(lo, occ, K)


@dataclass
class ParticleSnapshot:
    time: float
    positions: np.ndarray

    def __post_init__(self):
        self.positions = np.sort(np.asarray(self.positions, dtype=np.int64))[::-1].copy()

    @property
    def total(self) -> int:
        return len(self.positions)

    @classmethod
    def from_configuration(cls, config: Configuration, time: float) -> "ParticleSnapshot":
        return cls(time, config.positions())

    def occupation(self) -> dict[int, int]:
        vals, counts = np.unique(self.positions, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}
