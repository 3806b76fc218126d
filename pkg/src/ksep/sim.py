"""Event-driven simulation of K-SEP: direct generator and stirring modes."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _engine
from .errors import OverlappingIntervals, ResourceExceeded, WindowExit
from .kernel import JumpKernel
from .profiles import InitialProfile, sample_configuration
from .scaling import ScalingMap
from .state import Configuration, ParticleSnapshot

__all__ = [
    "Configuration", "ParticleSnapshot", "StirringState", "simulate_direct",
    "simulate_direct_times", "simulate_stirring", "order_statistics",
    "rescaled_counts", "replica_generators", "run_replicas", "ReplicaResults",
    "write_snapshots_csv",
]

MAX_SITES = 50_000_000


@dataclass
class StirringState:
    """Current site of every tracked label; ``origin`` is its start site."""

    origin: np.ndarray
    slot: np.ndarray
    site: np.ndarray

    def occupation(self, lo: int, hi: int) -> np.ndarray:
        return np.bincount(self.site - lo, minlength=hi - lo + 1)[: hi - lo + 1]


def _kernel_arrays(kernel: JumpKernel):
    return np.asarray(kernel.offsets, dtype=np.int64), np.asarray(kernel.probs, dtype=float)


def _raise_status(status: int, events: int):
    if status == _engine.TOO_LARGE:
        raise ResourceExceeded(f"window exceeded {MAX_SITES} sites after {events} events")
    if status == _engine.RATE_MISMATCH:
        raise AssertionError(f"total rate drifted from the recomputed sum after {events} events")
    if status == _engine.OCCUPANCY:
        raise AssertionError(f"occupancy bound violated after {events} events")


def simulate_direct_times(config0: Configuration, kernel: JumpKernel, K: int, times,
                          rng: np.random.Generator, debug: bool = False,
                          keep: int | None = None, max_sites: int = MAX_SITES):
    """Snapshots at each of the nondecreasing ``times`` from one trajectory.

    ``keep`` limits each snapshot to the top ``keep`` ranks.
    Returns (snapshots, events).
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be nonnegative and nondecreasing")
    if config0.K != K:
        raise ValueError("configuration K differs from K")
    offs, probs = _kernel_arrays(kernel)
    n = config0.total if keep is None else min(keep, config0.total)
    out = np.zeros((len(times), n), dtype=np.int64)
    status, events, _ = _engine.run_direct(
        config0.occ, config0.lo, offs, probs, K, times, rng, max_sites, debug, out)
    _raise_status(status, events)
    return [ParticleSnapshot(float(s), out[j]) for j, s in enumerate(times)], int(events)


def simulate_direct(config0: Configuration, kernel: JumpKernel, K: int, t_end: float,
                    rng: np.random.Generator, debug: bool = False) -> ParticleSnapshot:
    """Sample the K-SEP configuration at ``t_end`` started from ``config0``."""
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    snaps, _ = simulate_direct_times(config0, kernel, K, [t_end], rng, debug=debug)
    return snaps[0]


def simulate_stirring(config0: Configuration, kernel: JumpKernel, K: int, t_end: float,
                      rng: np.random.Generator, window: tuple[int, int] | None = None):
    """Stirring construction on the fixed window ``[lo, hi]``.

    Labels start in the lowest slots of their sites.  Raises ``WindowExit``
    when a label reaches one of the two boundary sites.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    lo, hi = window if window is not None else (config0.lo, config0.hi)
    W = hi - lo + 1
    slots = -np.ones((W, K), dtype=np.int64)
    origin = []
    slot = []
    for x in range(config0.lo, config0.hi + 1):
        c = config0.at(x)
        if c and not lo < x < hi:
            raise WindowExit(f"initial particle at {x} is not inside ({lo}, {hi})")
        for a in range(c):
            slots[x - lo, a] = len(origin)
            origin.append(x)
            slot.append(a)
    offs, probs = _kernel_arrays(kernel)
    pos = offs > 0
    status, events, where = _engine.run_stirring(
        slots, offs[pos], probs[pos] / probs[pos].sum(), K, float(t_end), rng)
    if status == _engine.WINDOW_EXIT:
        raise WindowExit(f"a label reached the window boundary after {events} swaps")
    state = StirringState(np.array(origin, dtype=np.int64), np.array(slot, dtype=np.int64),
                          where + lo)
    return ParticleSnapshot(float(t_end), state.site), state


def order_statistics(snapshot: ParticleSnapshot, m_max: int) -> np.ndarray:
    """X^(0), ..., X^(m_max); ranks beyond the particle count are -inf."""
    out = np.full(m_max + 1, -np.inf)
    k = min(m_max + 1, snapshot.total)
    out[:k] = snapshot.positions[:k]
    return out


def _check_disjoint(intervals):
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    for a, b in ivs:
        if not a < b:
            raise ValueError(f"empty interval ({a}, {b}]")
    for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
        if a1 < b0:
            raise OverlappingIntervals(f"({a0}, {b0}] and ({a1}, {b1}] overlap")


def rescaled_counts(snapshot: ParticleSnapshot, vmap: ScalingMap, intervals) -> np.ndarray:
    """Number of particles with v(X) in each half-open interval (a, b]."""
    _check_disjoint(intervals)
    return counts_from_positions(snapshot.positions, vmap, intervals)


def counts_from_positions(positions, vmap: ScalingMap, intervals) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    pos = pos[np.isfinite(pos)]
    out = np.zeros(len(intervals), dtype=np.int64)
    for i, (a, b) in enumerate(intervals):
        # compare in lattice units to keep the half-open endpoint exact
        xa, xb = vmap.inverse(float(a)), vmap.inverse(float(b))
        out[i] = int(np.count_nonzero((pos > xa) & (pos <= xb)))
    return out


def replica_generators(seed: int, n: int, key: tuple = ()) -> list[np.random.Generator]:
    """Independent counter-based streams, one per replica.

    ``key`` separates families of streams drawn from the same seed.
    """
    root = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return [np.random.Generator(np.random.Philox(s)) for s in root.spawn(n)]


@dataclass
class ReplicaResults:
    """Top ``keep`` order statistics per replica and time (-inf padded)."""

    times: np.ndarray
    top: np.ndarray
    totals: np.ndarray
    events: np.ndarray
    seed: int
    L_sim: int
    K: int

    def snapshot(self, replica: int, j: int) -> ParticleSnapshot:
        row = self.top[replica, j]
        return ParticleSnapshot(float(self.times[j]), row[np.isfinite(row)].astype(np.int64))

    def order_stat(self, m: int) -> np.ndarray:
        """X^(m) for every replica and time."""
        return self.top[:, :, m]


def run_replicas(profile: InitialProfile, kernel: JumpKernel, times, n_replicas: int,
                 seed: int, L_sim: int, keep: int = 64, threads: int = 1,
                 key: tuple = ()) -> ReplicaResults:
    """Independent replicas from quenched samples of ``profile`` truncated at ``L_sim``.

    Replica ``i`` always uses stream ``i`` of ``seed``; results do not
    depend on ``threads``.
    """
    times = np.asarray(sorted(float(s) for s in times))
    gens = replica_generators(seed, n_replicas, key)
    top = np.full((n_replicas, len(times), keep), -np.inf)
    totals = np.zeros(n_replicas, dtype=np.int64)
    events = np.zeros(n_replicas, dtype=np.int64)
    K = profile.K

    def work(idx):
        for i in idx:
            g = gens[i]
            cfg = sample_configuration(profile, L_sim, g)
            snaps, ev = simulate_direct_times(cfg, kernel, K, times, g, keep=keep)
            totals[i] = cfg.total
            events[i] = ev
            for j, s in enumerate(snaps):
                top[i, j, :s.total] = s.positions

    chunks = np.array_split(np.arange(n_replicas), max(1, threads) * 4)
    if threads <= 1:
        for c in chunks:
            work(c)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, chunks))
    return ReplicaResults(times, top, totals, events, seed, int(L_sim), K)


def write_snapshots_csv(path, results: ReplicaResults, m_max: int | None = None) -> None:
    """Rows (replica, time, rank m, position); -inf ranks are omitted."""
    m_max = results.top.shape[2] - 1 if m_max is None else m_max
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "time", "m", "position"])
        for i in range(results.top.shape[0]):
            for j, s in enumerate(results.times):
                for m in range(min(m_max + 1, results.top.shape[2])):
                    x = results.top[i, j, m]
                    if math.isinf(x):
                        break
                    w.writerow([i, repr(float(s)), m, int(x)])
