"""Hot graph kernels: color-refinement signatures, hop distances, greedy
matching and greedy independent sets.

Each kernel has a numba ``@njit`` implementation and a pure-numpy fallback
producing bit-identical output; :mod:`poolexp._backend` decides which one the
public wrappers dispatch to. All kernels work on CSR adjacency (``indptr``,
``indices``) with neighbor lists sorted by node id, which fixes the iteration
order of the greedy algorithms.
"""

import numpy as np

from ._backend import USE_NUMBA

if USE_NUMBA:
    from numba import njit
else:  # pragma: no cover - exercised via POOLEXP_BACKEND=numpy runs

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# Refinement signatures
# ---------------------------------------------------------------------------
# Row v is [own color | sorted neighbor colors], left-padded with -1 up to a
# common width so rows of equal-signature nodes are bytewise equal.


@njit(cache=True)
def _wl_signatures_numba(indptr, indices, colors, max_deg):
    n = indptr.size - 1
    width = max_deg + 1
    sig = np.full((n, width), -1, dtype=np.int64)
    for v in range(n):
        sig[v, 0] = colors[v]
        start = indptr[v]
        deg = indptr[v + 1] - start
        for j in range(deg):
            sig[v, 1 + j] = colors[indices[start + j]]
        # insertion sort over the full neighbor block, -1 pads sort to front
        for j in range(2, width):
            key = sig[v, j]
            i = j - 1
            while i >= 1 and sig[v, i] > key:
                sig[v, i + 1] = sig[v, i]
                i -= 1
            sig[v, i + 1] = key
    return sig


def _wl_signatures_numpy(indptr, indices, colors, max_deg):
    n = indptr.size - 1
    deg = np.diff(indptr)
    sig = np.full((n, max_deg + 1), -1, dtype=np.int64)
    sig[:, 0] = colors
    if indices.size:
        rows = np.repeat(np.arange(n), deg)
        offsets = np.arange(indices.size) - np.repeat(indptr[:-1], deg)
        sig[rows, offsets + 1] = colors[indices]
        sig[:, 1:].sort(axis=1)
    return sig


def wl_signatures(indptr, indices, colors, max_deg):
    """One refinement step's raw signatures, one canonical row per node."""
    if USE_NUMBA:
        return _wl_signatures_numba(indptr, indices, colors, max_deg)
    return _wl_signatures_numpy(indptr, indices, colors, max_deg)


# ---------------------------------------------------------------------------
# Hop distances
# ---------------------------------------------------------------------------
# Entries beyond `cap` hops (or unreachable) are left at the sentinel n + 1.


@njit(cache=True)
def _hop_matrix_numba(indptr, indices, cap):
    n = indptr.size - 1
    sentinel = n + 1
    dist = np.full((n, n), sentinel, dtype=np.int32)
    queue = np.empty(n, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[s, v]
            if dv >= cap:
                continue
            for e in range(indptr[v], indptr[v + 1]):
                u = indices[e]
                if dist[s, u] > dv + 1:
                    dist[s, u] = dv + 1
                    queue[tail] = u
                    tail += 1
    return dist


def _hop_matrix_numpy(indptr, indices, cap):
    n = indptr.size - 1
    sentinel = n + 1
    # float32 so the frontier expansion runs through BLAS
    adj = np.zeros((n, n), dtype=np.float32)
    if indices.size:
        rows = np.repeat(np.arange(n), np.diff(indptr))
        adj[rows, indices] = 1.0
    dist = np.full((n, n), sentinel, dtype=np.int32)
    np.fill_diagonal(dist, 0)
    reached = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=np.float32)
    for d in range(1, cap + 1):
        nxt = ((frontier @ adj) > 0) & ~reached
        if not nxt.any():
            break
        dist[nxt] = d
        reached |= nxt
        frontier = nxt.astype(np.float32)
    return dist


def hop_matrix(indptr, indices, cap):
    """All-pairs hop distances up to ``cap``; farther pairs get n + 1."""
    if USE_NUMBA:
        return _hop_matrix_numba(indptr, indices, np.int64(cap))
    return _hop_matrix_numpy(indptr, indices, cap)


# ---------------------------------------------------------------------------
# Greedy heavy-edge matching (unit weights)
# ---------------------------------------------------------------------------
# Scan vertices by ascending id; match each free vertex with its lowest-index
# free neighbor, else freeze it as a singleton. match[v] == v marks singletons.


@njit(cache=True)
def _greedy_matching_numba(indptr, indices):
    n = indptr.size - 1
    match = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        if match[v] >= 0:
            continue
        partner = -1
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if u != v and match[u] < 0:
                partner = u
                break
        if partner >= 0:
            match[v] = partner
            match[partner] = v
        else:
            match[v] = v
    return match


def _greedy_matching_numpy(indptr, indices):
    n = indptr.size - 1
    match = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        if match[v] >= 0:
            continue
        partner = -1
        for u in indices[indptr[v]:indptr[v + 1]]:
            if u != v and match[u] < 0:
                partner = u
                break
        if partner >= 0:
            match[v] = partner
            match[partner] = v
        else:
            match[v] = v
    return match


def greedy_matching(indptr, indices):
    if USE_NUMBA:
        return _greedy_matching_numba(indptr, indices)
    return _greedy_matching_numpy(indptr, indices)


# ---------------------------------------------------------------------------
# Greedy maximal independent set
# ---------------------------------------------------------------------------
# `order` is the scan order; a node is selected unless a previously selected
# node blocks it, so the output is maximal by construction.


@njit(cache=True)
def _greedy_mis_numba(indptr, indices, order):
    n = indptr.size - 1
    selected = np.zeros(n, dtype=np.bool_)
    blocked = np.zeros(n, dtype=np.bool_)
    for i in range(order.size):
        v = order[i]
        if blocked[v]:
            continue
        selected[v] = True
        blocked[v] = True
        for e in range(indptr[v], indptr[v + 1]):
            blocked[indices[e]] = True
    return selected


def _greedy_mis_numpy(indptr, indices, order):
    n = indptr.size - 1
    selected = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    for v in order:
        if blocked[v]:
            continue
        selected[v] = True
        blocked[v] = True
        blocked[indices[indptr[v]:indptr[v + 1]]] = True
    return selected


def greedy_mis(indptr, indices, order):
    if USE_NUMBA:
        return _greedy_mis_numba(indptr, indices, order)
    return _greedy_mis_numpy(indptr, indices, order)
