"""Compiled inner loops for the direct and stirring simulations.

Both loops report failures through an integer status instead of raising,
so the Python wrappers can map them onto the package exceptions.
"""
from __future__ import annotations

import numpy as np
from numba import njit

OK = 0
RATE_MISMATCH = 1
OCCUPANCY = 2
TOO_LARGE = 3
WINDOW_EXIT = 4


@njit(nogil=True, cache=True, error_model="numpy")
def _site_rate(occ, i, offs, probs, K):
    c = occ[i]
    if c == 0:
        return 0.0
    s = 0.0
    for k in range(offs.shape[0]):
        s += probs[k] * (K - occ[i + offs[k]])
    return c * s


@njit(nogil=True, cache=True, error_model="numpy")
def _tree_set(tree, P, i, v):
    n = P + i
    tree[n] = v
    n >>= 1
    while n >= 1:
        tree[n] = tree[2 * n] + tree[2 * n + 1]
        n >>= 1


@njit(nogil=True, cache=True, error_model="numpy")
def _tree_refresh(tree, P, occ, offs, probs, K, a, b):
    """Recompute leaves a..b and their ancestors level by level."""
    for i in range(a, b + 1):
        tree[P + i] = _site_rate(occ, i, offs, probs, K)
    lo = (P + a) >> 1
    hi = (P + b) >> 1
    while lo >= 1:
        for n in range(lo, hi + 1):
            tree[n] = tree[2 * n] + tree[2 * n + 1]
        lo >>= 1
        hi >>= 1


@njit(nogil=True, cache=True, error_model="numpy")
def _tree_build(occ, offs, probs, K, P):
    tree = np.zeros(2 * P)
    for i in range(occ.shape[0]):
        tree[P + i] = _site_rate(occ, i, offs, probs, K)
    for n in range(P - 1, 0, -1):
        tree[n] = tree[2 * n] + tree[2 * n + 1]
    return tree


@njit(nogil=True, cache=True, error_model="numpy")
def _tree_find(tree, P, u):
    n = 1
    while n < P:
        left = tree[2 * n]
        if u < left:
            n = 2 * n
        else:
            u -= left
            n = 2 * n + 1
    return n - P


@njit(nogil=True, cache=True, error_model="numpy")
def _next_pow2(w):
    P = 1
    while P < w:
        P *= 2
    return P


@njit(nogil=True, cache=True, error_model="numpy")
def _record(occ, lo, out_row):
    m = 0
    for i in range(occ.shape[0] - 1, -1, -1):
        for _ in range(occ[i]):
            if m < out_row.shape[0]:
                out_row[m] = lo + i
            m += 1


@njit(nogil=True, cache=True, error_model="numpy")
def run_direct(occ0, lo0, offs, probs, K, times, gen, max_sites, debug, out):
    """Rejection-free kinetic Monte Carlo for K-SEP.

    ``out[j, :]`` receives the particle positions (nonincreasing) at
    ``times[j]``; only the first ``out.shape[1]`` ranks are kept.
    Returns (status, events, final_window_size).
    """
    R = 0
    for k in range(offs.shape[0]):
        if abs(offs[k]) > R:
            R = abs(offs[k])
    # pad so that every occupied index is at distance >= R from the edges
    pad = max(4 * R, 16)
    W = occ0.shape[0] + 2 * pad
    occ = np.zeros(W, dtype=np.int64)
    occ[pad:pad + occ0.shape[0]] = occ0
    lo = lo0 - pad
    P = _next_pow2(W)
    tree = _tree_build(occ, offs, probs, K, P)
    weights = np.empty(offs.shape[0])

    t = 0.0
    j = 0
    nt = times.shape[0]
    events = 0
    while j < nt:
        total = tree[1]
        if total > 0.0:
            dt = gen.exponential(1.0 / total)
        else:
            dt = np.inf
        while j < nt and t + dt > times[j]:
            _record(occ, lo, out[j])
            j += 1
        if j == nt:
            break
        t += dt

        # source site
        x = -1
        while x < 0 or tree[P + x] <= 0.0 or x >= W:
            x = _tree_find(tree, P, gen.random() * total)
        # target offset
        s = 0.0
        for k in range(offs.shape[0]):
            weights[k] = probs[k] * (K - occ[x + offs[k]])
            s += weights[k]
        u = gen.random() * s
        kk = 0
        while kk < offs.shape[0] - 1 and (u >= weights[kk] or weights[kk] == 0.0):
            u -= weights[kk]
            kk += 1
        y = x + offs[kk]
        occ[x] -= 1
        occ[y] += 1
        events += 1
        if debug and (occ[y] > K or occ[x] < 0):
            return OCCUPANCY, events, W

        if y < 2 * R or y >= W - 2 * R:
            # grow the window by doubling on the side that was reached
            if 2 * W > max_sites:
                return TOO_LARGE, events, W
            new = np.zeros(2 * W, dtype=np.int64)
            if y < 2 * R:
                new[W:] = occ
                lo -= W
                x += W
                y += W
            else:
                new[:W] = occ
            occ = new
            W = 2 * W
            P = _next_pow2(W)
            tree = _tree_build(occ, offs, probs, K, P)
        else:
            # |y - x| <= R, so the touched sites form one block
            _tree_refresh(tree, P, occ, offs, probs, K, min(x, y) - R, max(x, y) + R)

        if debug:
            full = 0.0
            for z in range(W):
                full += _site_rate(occ, z, offs, probs, K)
            if abs(full - tree[1]) > 1e-9:
                return RATE_MISMATCH, events, W
    return OK, events, W


@njit(nogil=True, cache=True, error_model="numpy")
def run_stirring(slots, pos_offs, pos_probs, K, t_end, gen):
    """Stirring dynamics on a fixed window.

    ``slots[i, a]`` holds the label in slot ``a`` of window site ``i``
    (-1 for a hole).  Each unordered pair {i, i+y} carries a clock of rate
    K^2 p(y); the clocks are realized by thinning a constant-rate clock.
    ``pos_offs``/``pos_probs`` are the positive offsets and p(y) / sum.
    Returns (status, events, labels_site_index).
    """
    W = slots.shape[0]
    n_labels = 0
    for i in range(W):
        for a in range(K):
            if slots[i, a] >= 0:
                n_labels += 1
    where = np.empty(n_labels, dtype=np.int64)
    for i in range(W):
        for a in range(K):
            if slots[i, a] >= 0:
                where[slots[i, a]] = i
    rate = K * K * W * 0.5  # sum over unordered pairs of K^2 p, before thinning
    cum = np.cumsum(pos_probs)
    t = 0.0
    events = 0
    while True:
        t += gen.exponential(1.0 / rate)
        if t > t_end:
            break
        i = int(gen.random() * W)
        u = gen.random() * cum[-1]
        k = 0
        while k < cum.shape[0] - 1 and u >= cum[k]:
            k += 1
        j = i + pos_offs[k]
        if j >= W:
            continue
        a = int(gen.random() * K)
        b = int(gen.random() * K)
        la = slots[i, a]
        lb = slots[j, b]
        slots[i, a] = lb
        slots[j, b] = la
        events += 1
        if la >= 0:
            where[la] = j
            if j == W - 1:
                return WINDOW_EXIT, events, where
        if lb >= 0:
            where[lb] = i
            if i == 0:
                return WINDOW_EXIT, events, where
    return OK, events, where
