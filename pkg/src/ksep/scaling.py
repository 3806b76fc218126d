"""Centering/scaling families and the affine maps v(x) = x/(sigma b) - a."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ScalingMap:
    sigma: float
    a: float
    b: float
    kind: str = "time"
    t: float | None = None
    L: int | None = None

    def __post_init__(self):
        if not self.b > 0 or not self.sigma > 0:
            raise DomainError("sigma and b must be positive")

    @property
    def scale(self) -> float:
        return self.sigma * self.b

    def forward(self, x):
        return x / self.scale - self.a

    def inverse(self, u):
        if isinstance(u, float) and math.isinf(u):
            return u
        return self.scale * (u + self.a)

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "a": self.a, "b": self.b, "kind": self.kind,
                "t": self.t, "L": self.L}


def time_centering(t: float) -> tuple[float, float]:
    """(a_t, b_t) for t > 1."""
    if not t > 1:
        raise DomainError(f"time map needs t > 1, got {t!r}")
    lt = math.log(t)
    return math.log(t / (SQRT_2PI * lt)), math.sqrt(t / lt)


def block_centering(t: float, L: int) -> tuple[float, float]:
    """(a_{t,L}, b_{t,L}) for L >= 2."""
    if L < 2:
        raise DomainError(f"block map needs L >= 2, got {L!r}")
    if not t > 0:
        raise DomainError("block map needs t > 0")
    l2 = math.log(L * L)
    return math.log(L * L / math.sqrt(2.0 * math.pi * l2)), math.sqrt(t / l2)


def make_time_map(sigma: float, t: float) -> ScalingMap:
    a, b = time_centering(t)
    return ScalingMap(sigma=sigma, a=a, b=b, kind="time", t=t)


def make_block_map(sigma: float, t: float, L: int) -> ScalingMap:
    a, b = block_centering(t, L)
    return ScalingMap(sigma=sigma, a=a, b=b, kind="block", t=t, L=int(L))


def preimage_interval(vmap: ScalingMap, interval: tuple[float, float]) -> tuple[float, float]:
    """v^{-1}(x, y] = (v^{-1}(x), v^{-1}(y)]; infinite endpoints pass through."""
    x, y = interval
    if not x < y:
        raise ValueError("need x < y for a half-open interval (x, y]")
    return vmap.inverse(float(x)), vmap.inverse(float(y))
