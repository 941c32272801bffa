"""Compiled inner loops over Cayley-graph neighbor tables.

``nbr[i, j]`` is the ball index of ``g_i s_j`` (or -1 outside the ball).  Sites
of the outer sphere are the indices ``>= sphere_start``.
"""

import heapq

import numpy as np
from numba import njit

# status codes shared with the Python layer
TERMINATED = 0
SURVIVED = 1
TRUNCATED = 2
OVERFLOW = 3


@njit(cache=True)
def dependence_levels(nbr, w, steps):
    """Levels ``M_0..M_steps`` of the dependence process as a ``(steps+1, N)`` uint8 array.

    Returns ``(levels, overflow)``; ``overflow`` is set when an open bond leaves
    the region from a site of the current level.
    """
    n, m = nbr.shape
    levels = np.zeros((steps + 1, n), dtype=np.uint8)
    levels[0, 0] = 1
    overflow = False
    for t in range(1, steps + 1):
        prev = levels[t - 1]
        cur = levels[t]
        for f in range(n):
            if prev[f]:
                for j in range(m):
                    if w[f, j]:
                        h = nbr[f, j]
                        if h < 0:
                            overflow = True
                        else:
                            cur[h] ^= 1
    return levels, overflow


@njit(cache=True)
def cluster_levels(nbr, x, steps):
    """Levels ``M'_0..M'_steps`` of the cluster exploration (open walks of length n)."""
    n, m = nbr.shape
    levels = np.zeros((steps + 1, n), dtype=np.uint8)
    levels[0, 0] = 1
    overflow = False
    for t in range(1, steps + 1):
        prev = levels[t - 1]
        cur = levels[t]
        for f in range(n):
            if prev[f]:
                for j in range(m):
                    h = nbr[f, j]
                    if h < 0:
                        overflow = True
                    elif x[h]:
                        cur[h] = 1
    return levels, overflow


@njit(cache=True)
def _run_until(nbr, bitsrc, sphere_start, max_steps, dependence):
    # shared driver: iterate until the cumulative set stops growing or meets the sphere
    n, m = nbr.shape
    prev = np.zeros(n, dtype=np.uint8)
    cum = np.zeros(n, dtype=np.uint8)
    prev[0] = 1
    cum[0] = 1
    if sphere_start == 0:
        return SURVIVED, 0
    t = 0
    while t < max_steps:
        t += 1
        cur = np.zeros(n, dtype=np.uint8)
        for f in range(n):
            if prev[f]:
                for j in range(m):
                    h = nbr[f, j]
                    if dependence:
                        if bitsrc[f, j]:
                            if h < 0:
                                return OVERFLOW, t
                            cur[h] ^= 1
                    else:
                        if h < 0:
                            return OVERFLOW, t
                        if bitsrc[h, 0]:
                            cur[h] = 1
        grew = False
        hit = False
        for h in range(n):
            if cur[h] and not cum[h]:
                cum[h] = 1
                grew = True
                if h >= sphere_start:
                    hit = True
        if hit:
            return SURVIVED, t
        if not grew:
            return TERMINATED, t - 1
        prev = cur
    return TRUNCATED, t


@njit(cache=True)
def dependence_outcomes(nbr, w_batch, sphere_start, max_steps):
    """Status and step per environment of ``w_batch`` (shape ``(B, N, m)``)."""
    b = w_batch.shape[0]
    status = np.empty(b, dtype=np.int64)
    step = np.empty(b, dtype=np.int64)
    for i in range(b):
        s, t = _run_until(nbr, w_batch[i], sphere_start, max_steps, True)
        status[i] = s
        step[i] = t
    return status, step


@njit(cache=True)
def cluster_outcomes(nbr, x_batch, sphere_start, max_steps):
    b, n = x_batch.shape
    status = np.empty(b, dtype=np.int64)
    step = np.empty(b, dtype=np.int64)
    col = np.empty((n, 1), dtype=np.uint8)
    for i in range(b):
        col[:, 0] = x_batch[i]
        s, t = _run_until(nbr, col, sphere_start, max_steps, False)
        status[i] = s
        step[i] = t
    return status, step


@njit(cache=True)
def bottleneck_to_sphere(nbr, u, sphere_start):
    """Smallest ``p`` such that sites with ``u < p`` connect ``e`` to the sphere.

    Minimax path cost over paths from the identity (whose own value is ignored)
    to an index ``>= sphere_start``; survival at ``p`` holds iff ``p > value``.
    """
    n, m = nbr.shape
    if sphere_start == 0:
        return -1.0
    best = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.uint8)
    best[0] = -1.0
    heap = [(-1.0, 0)]
    while len(heap) > 0:
        d, f = heapq.heappop(heap)
        if done[f]:
            continue
        done[f] = 1
        if f >= sphere_start:
            return d
        for j in range(m):
            h = nbr[f, j]
            if h >= 0 and not done[h]:
                c = max(d, u[h])
                if c < best[h]:
                    best[h] = c
                    heapq.heappush(heap, (c, h))
    return np.inf


@njit(cache=True)
def bottlenecks(nbr, u_batch, sphere_start):
    b = u_batch.shape[0]
    out = np.empty(b)
    for i in range(b):
        out[i] = bottleneck_to_sphere(nbr, u_batch[i], sphere_start)
    return out


@njit(cache=True)
def walk_parity_counts(nbr, w, length, budget):
    """Endpoint parities of open walks of the given length, by explicit enumeration.

    Depth-first over every walk; ``budget`` bounds the number of steps taken.
    Returns ``(parity array, steps used, exceeded flag)``.
    """
    n, m = nbr.shape
    parity = np.zeros(n, dtype=np.uint8)
    if length == 0:
        parity[0] = 1
        return parity, 0, False
    stack_site = np.empty(length + 1, dtype=np.int64)
    stack_gen = np.empty(length + 1, dtype=np.int64)
    stack_site[0] = 0
    stack_gen[0] = 0
    depth = 0
    used = 0
    while depth >= 0:
        j = stack_gen[depth]
        if j >= m:
            depth -= 1
            continue
        stack_gen[depth] = j + 1
        f = stack_site[depth]
        if not w[f, j]:
            continue
        h = nbr[f, j]
        used += 1
        if used > budget:
            return parity, used, True
        if h < 0:
            return parity, used, True
        if depth + 1 == length:
            parity[h] ^= 1
        else:
            depth += 1
            stack_site[depth] = h
            stack_gen[depth] = 0
    return parity, used, False
