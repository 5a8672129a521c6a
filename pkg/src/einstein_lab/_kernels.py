"""Hot inner loops: BFS distances and random-walk simulation.

Two interchangeable implementations are provided for each kernel: a
numba ``@njit`` version and a vectorized pure-numpy version.  The module
level dispatch picks numba when it is importable, unless the environment
variable ``EINSTEIN_LAB_NUMBA`` is set to ``0``/``false``/``off``, in
which case the numpy path is used.  Both paths are bit-identical: they
share the same counter-based generator (splitmix64-style finalizer keyed
by ``(seed, walk, step)``) and the same neighbour-selection rule, so a
simulation result does not depend on which path ran it.
"""

import os

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53


def _env_wants_numba() -> bool:
    val = os.environ.get("EINSTEIN_LAB_NUMBA", "").strip().lower()
    return val not in {"0", "false", "off", "no"}


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA and _env_wants_numba()


# -- counter-based generator ------------------------------------------------
#
# stream_key(seed, walk) = mix(seed ^ mix((walk+1) * GAMMA))
# u(seed, walk, step)    = mix(stream_key + (step+1) * GAMMA) >> 11, scaled
#
# mix is the splitmix64 finalizer; every quantity is a wrapping uint64.
# The scalar, vector and jitted versions below must stay in lockstep.


def _mix_py(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def stream_key_py(seed: int, walk: int) -> int:
    return _mix_py((seed & _MASK) ^ _mix_py(((walk + 1) * _GAMMA) & _MASK))


def u01_py(seed: int, walk: int, step: int) -> float:
    key = stream_key_py(seed, walk)
    word = _mix_py((key + ((step + 1) * _GAMMA) & _MASK) & _MASK)
    return (word >> 11) * _INV53


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def stream_keys_np(seed: int, walks: np.ndarray) -> np.ndarray:
    w = walks.astype(np.uint64)
    pre = _mix_np((w + np.uint64(1)) * np.uint64(_GAMMA))
    return _mix_np(np.uint64(seed & _MASK) ^ pre)


def _u01_np(keys: np.ndarray, step: int) -> np.ndarray:
    term = np.uint64(((step + 1) * _GAMMA) & _MASK)
    word = _mix_np(keys + term)
    return (word >> np.uint64(11)).astype(np.float64) * _INV53


# -- BFS distances -----------------------------------------------------------


def bfs_distances_numpy(indptr, indices, source, n):
    """Hop distances from ``source``; frontier expansion with gathers."""
    dist = np.full(n, -1, dtype=np.int32)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        # flat gather of all neighbour slices without a per-vertex loop:
        # position j of group i maps to starts[i] + (j - exclusive_cum[i])
        excl = np.cumsum(counts) - counts
        flat = np.arange(total, dtype=np.int64) + np.repeat(starts - excl, counts)
        nbrs = indices[flat]
        nbrs = nbrs[dist[nbrs] < 0]
        if nbrs.size:
            nbrs = np.unique(nbrs)
            dist[nbrs] = level + 1
        frontier = nbrs
        level += 1
    return dist


def multi_source_distances_numpy(indptr, indices, sources, n):
    dist = np.full(n, -1, dtype=np.int32)
    dist[sources] = 0
    frontier = np.asarray(sources, dtype=np.int64)
    level = 0
    while frontier.size:
        nxt = []
        for v in frontier:
            nxt.append(indices[indptr[v]:indptr[v + 1]])
        nbrs = np.concatenate(nxt) if nxt else np.empty(0, dtype=indices.dtype)
        nbrs = nbrs[dist[nbrs] < 0]
        if nbrs.size:
            nbrs = np.unique(nbrs)
            dist[nbrs] = level + 1
        frontier = nbrs
        level += 1
    return dist


# -- walk simulation ---------------------------------------------------------
#
# ``aug`` is the per-row cumulative transition profile shifted by the row
# index: aug[k] = source_vertex(k) + cum_prob(k), with the last entry of
# each row forced to source_vertex + 1.0 exactly.  Neighbour choice at
# vertex v with uniform u is the first k in row v with aug[k] > v + u,
# clamped to the row end.  Both paths implement exactly this rule.


def build_transition_profile(indptr, indices, weights, mu):
    """aug array shared by both simulation paths."""
    n = indptr.shape[0] - 1
    aug = np.empty(weights.shape[0], dtype=np.float64)
    for v in range(n):
        lo, hi = indptr[v], indptr[v + 1]
        if lo == hi:
            continue
        cum = np.cumsum(weights[lo:hi]) / mu[v]
        cum[-1] = 1.0
        aug[lo:hi] = v + cum
    return aug


def simulate_exits_numpy(indptr, indices, aug, in_region, start, n_walks,
                         step_cap, seed):
    """Simulate ``n_walks`` killed walks from ``start``; vectorized over walks.

    Returns (steps, exit_vertex); exit_vertex is -1 for capped walks and
    steps then equals step_cap.
    """
    steps = np.full(n_walks, step_cap, dtype=np.int64)
    exit_vertex = np.full(n_walks, -1, dtype=np.int64)
    wid = np.arange(n_walks, dtype=np.int64)
    keys = stream_keys_np(seed, wid)
    pos = np.full(n_walks, start, dtype=np.int64)
    active = wid
    for t in range(step_cap):
        if active.size == 0:
            break
        u = _u01_np(keys[active], t)
        key = pos[active].astype(np.float64) + u
        k = np.searchsorted(aug, key, side="right")
        k = np.minimum(k, indptr[pos[active] + 1] - 1)
        nxt = indices[k].astype(np.int64)
        pos[active] = nxt
        out = ~in_region[nxt]
        if out.any():
            done = active[out]
            steps[done] = t + 1
            exit_vertex[done] = nxt[out]
            active = active[~out]
    return steps, exit_vertex


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _mix_nb(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    @numba.njit(cache=True)
    def _stream_key_nb(seed, walk):
        pre = _mix_nb((walk + np.uint64(1)) * np.uint64(_GAMMA))
        return _mix_nb(seed ^ pre)

    @numba.njit(cache=True)
    def bfs_distances_numba(indptr, indices, source, n):
        dist = np.full(n, -1, dtype=np.int32)
        queue = np.empty(n, dtype=np.int64)
        head = 0
        tail = 0
        queue[tail] = source
        tail += 1
        dist[source] = 0
        while head < tail:
            v = queue[head]
            head += 1
            dv = dist[v]
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue[tail] = w
                    tail += 1
        return dist

    @numba.njit(cache=True)
    def simulate_exits_numba(indptr, indices, aug, in_region, start, n_walks,
                             step_cap, seed):
        steps = np.full(n_walks, step_cap, dtype=np.int64)
        exit_vertex = np.full(n_walks, -1, dtype=np.int64)
        useed = np.uint64(seed)
        for w in range(n_walks):
            key = _stream_key_nb(useed, np.uint64(w))
            v = start
            for t in range(step_cap):
                term = (np.uint64(t) + np.uint64(1)) * np.uint64(_GAMMA)
                word = _mix_nb(key + term)
                u = np.float64(word >> np.uint64(11)) * _INV53
                target = np.float64(v) + u
                k = indptr[v]
                last = indptr[v + 1] - 1
                while k < last and aug[k] <= target:
                    k += 1
                v = indices[k]
                if not in_region[v]:
                    steps[w] = t + 1
                    exit_vertex[w] = v
                    break
        return steps, exit_vertex

else:  # pragma: no cover - exercised only when numba is absent
    bfs_distances_numba = None
    simulate_exits_numba = None


if USING_NUMBA:
    bfs_distances = bfs_distances_numba
    simulate_exits = simulate_exits_numba
else:
    bfs_distances = bfs_distances_numpy
    simulate_exits = simulate_exits_numpy
