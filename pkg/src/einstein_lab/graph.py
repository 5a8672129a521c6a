"""Weighted-graph core: metric structure, boundaries, and vertex shrinking.

A :class:`WeightedGraph` is an immutable symmetric weighted adjacency with
the vertex measure mu(x) = sum of incident edge weights (a self-loop counts
once).  The random walk it induces moves to neighbour y with probability
mu_xy / mu(x).  Distances are hop counts (weights play no metric role), and
balls are open: B(x, R) = {y : d(x, y) < R}.
"""

import threading
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import GraphFormatError


@dataclass(frozen=True)
class BallSpec:
    center: int
    radius: int


@dataclass(frozen=True)
class AnnulusSpec:
    center: int
    inner: int
    outer: int

    def __post_init__(self):
        if not (self.outer > self.inner >= 0):
            raise ValueError("annulus requires R > r >= 0")


class WeightedGraph:
    """Immutable connected graph with symmetric positive edge weights.

    Safe to share across threads: all arrays are frozen after construction
    and every operation is a pure read.  Per-center distance arrays are
    cached; concurrent fill-or-read is harmless because BFS is
    deterministic, so racing fills write identical values.
    """

    def __init__(self, vertex_count, edges):
        n = int(vertex_count)
        if n <= 0:
            raise GraphFormatError("vertex_count must be positive")
        canon = {}
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge ({u},{v}) out of range")
            if not (w > 0.0):
                raise GraphFormatError(f"edge ({u},{v}) has non-positive weight")
            key = (u, v) if u <= v else (v, u)
            if key in canon:
                raise GraphFormatError(f"duplicate edge {key}")
            canon[key] = w
        self.vertex_count = n
        self.edges = sorted((u, v, w) for (u, v), w in canon.items())

        rows = []
        cols = []
        vals = []
        for u, v, w in self.edges:
            rows.append(u)
            cols.append(v)
            vals.append(w)
            if u != v:
                rows.append(v)
                cols.append(u)
                vals.append(w)
        order = np.lexsort((np.asarray(cols), np.asarray(rows)))
        rows = np.asarray(rows, dtype=np.int64)[order]
        cols = np.asarray(cols, dtype=np.int64)[order]
        vals = np.asarray(vals, dtype=np.float64)[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, rows + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.indices = cols
        self.weights = vals
        self.mu = np.zeros(n, dtype=np.float64)
        np.add.at(self.mu, rows, vals)
        if np.any(self.mu <= 0):
            raise GraphFormatError("isolated vertex (graph must be connected)")

        for arr in (self.indptr, self.indices, self.weights, self.mu):
            arr.setflags(write=False)

        self._dist_cache = {}
        self._dist_lock = threading.Lock()
        self._profile = None
        self._ecc_all = None

        dist0 = self.distances(0)
        if int(dist0.min()) < 0:
            raise GraphFormatError("graph is not connected")

    # -- basic accessors ----------------------------------------------------

    def check_vertex(self, x):
        x = int(x)
        if not (0 <= x < self.vertex_count):
            raise ValueError(f"vertex id {x} out of range")
        return x

    def neighbors(self, x):
        x = self.check_vertex(x)
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def total_measure(self):
        return float(self.mu.sum())

    def transition_profile(self):
        """Cumulative transition rows shared by the walk kernels."""
        if self._profile is None:
            self._profile = _kernels.build_transition_profile(
                self.indptr, self.indices, self.weights, self.mu
            )
            self._profile.setflags(write=False)
        return self._profile

    # -- metric structure ----------------------------------------------------

    def distances(self, x):
        """Hop distances from x to every vertex (BFS; weights ignored)."""
        x = self.check_vertex(x)
        cached = self._dist_cache.get(x)
        if cached is not None:
            return cached
        dist = _kernels.bfs_distances(
            self.indptr, self.indices, x, self.vertex_count
        )
        dist.setflags(write=False)
        with self._dist_lock:
            self._dist_cache.setdefault(x, dist)
        return self._dist_cache[x]

    def eccentricity(self, x):
        return int(self.distances(x).max())


def distances(g, x):
    return g.distances(x)


def eccentricities(g):
    """Eccentricity of every vertex (BFS per vertex, cached once)."""
    if g._ecc_all is None:
        out = np.empty(g.vertex_count, dtype=np.int64)
        for v in range(g.vertex_count):
            dist = _kernels.bfs_distances(g.indptr, g.indices, v,
                                          g.vertex_count)
            out[v] = dist.max()
        out.setflags(write=False)
        g._ecc_all = out
    return g._ecc_all


def host_frontier(g):
    """Vertices where the host was truncated.

    A cut vertex shows two signals at once: it lost neighbours (degree
    below the host maximum) and it sits metrically extremal (maximal
    eccentricity).  Either signal alone misfires - gasket outer edges
    attain the maximal eccentricity but keep full degree, and fractal
    trees carry legitimate low-degree tips deep inside - so the frontier
    is their intersection: path endpoints, box corners, the far corners
    of a gasket, the extreme tips of a fractal tree.  Degree-regular
    hosts have an empty frontier.
    """
    ecc = eccentricities(g)
    deg = np.diff(g.indptr)
    mask = (deg < deg.max()) & (ecc == ecc.max())
    return np.flatnonzero(mask).astype(np.int64)


def ball(g, x, radius=None):
    """Open ball {y : d(x,y) < radius} as a sorted vertex array.

    Accepts either (center, radius) or a BallSpec.
    """
    if isinstance(x, BallSpec):
        x, radius = x.center, x.radius
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return np.empty(0, dtype=np.int64)
    d = g.distances(x)
    return np.flatnonzero(d < radius).astype(np.int64)


def sphere(g, x, radius):
    """Distance shell {y : d(x,y) = radius}."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    d = g.distances(x)
    return np.flatnonzero(d == radius).astype(np.int64)


def volume(g, x, radius=None):
    """mu-measure V(x,R) of the open ball; accepts a BallSpec."""
    return float(g.mu[ball(g, x, radius)].sum())


def annulus_volume(g, x, r=None, R=None):
    """v(x,r,R) = V(x,R) - V(x,r); accepts an AnnulusSpec."""
    if isinstance(x, AnnulusSpec):
        x, r, R = x.center, x.inner, x.outer
    if not (R > r >= 0):
        raise ValueError("annulus requires R > r >= 0")
    return volume(g, x, R) - volume(g, x, r)


def closure(g, A):
    """A together with every vertex adjacent to A."""
    A = np.asarray(A, dtype=np.int64)
    if A.size == 0:
        raise ValueError("closure of the empty set")
    mark = np.zeros(g.vertex_count, dtype=bool)
    mark[A] = True
    for x in A:
        mark[g.neighbors(x)] = True
    return np.flatnonzero(mark).astype(np.int64)


def boundary(g, A):
    """External boundary: closure(A) minus A."""
    A = np.asarray(A, dtype=np.int64)
    clo = closure(g, A)
    inA = np.zeros(g.vertex_count, dtype=bool)
    inA[A] = True
    return clo[~inA[clo]]


@dataclass(frozen=True)
class ShrinkResult:
    graph: WeightedGraph
    a: int
    old_to_new: np.ndarray


def shrink(g, A):
    """Contract the vertex set A into a single new vertex ``a``.

    Edges inside the complement are kept unchanged; an edge x-a receives
    the summed weight of all former edges from x into A; edges internal
    to A are dropped.  The returned mapping sends removed vertices to -1.
    """
    A = np.asarray(A, dtype=np.int64)
    if A.size == 0:
        raise ValueError("cannot shrink the empty set")
    if A.size >= g.vertex_count:
        raise ValueError("cannot shrink the whole vertex set")
    inA = np.zeros(g.vertex_count, dtype=bool)
    inA[A] = True
    keep = np.flatnonzero(~inA)
    old_to_new = np.full(g.vertex_count, -1, dtype=np.int64)
    old_to_new[keep] = np.arange(keep.size, dtype=np.int64)
    a = int(keep.size)

    cross = {}
    edges = []
    for u, v, w in g.edges:
        iu, iv = inA[u], inA[v]
        if iu and iv:
            continue
        if not iu and not iv:
            edges.append((int(old_to_new[u]), int(old_to_new[v]), w))
        else:
            x = v if iu else u
            nx = int(old_to_new[x])
            cross[nx] = cross.get(nx, 0.0) + w
    for nx, w in sorted(cross.items()):
        edges.append((nx, a, w))
    return ShrinkResult(WeightedGraph(a + 1, edges), a, old_to_new)


def check_p0(g):
    """Smallest one-step transition probability min mu_xy / mu(x).

    Also verifies the degree bound |{y : y ~ x}| <= 1/p0 that the minimum
    implies for every vertex.
    """
    p0 = 1.0
    for x in range(g.vertex_count):
        lo, hi = g.indptr[x], g.indptr[x + 1]
        p0 = min(p0, float(g.weights[lo:hi].min() / g.mu[x]))
    for x in range(g.vertex_count):
        deg = int(g.indptr[x + 1] - g.indptr[x])
        if deg > 1.0 / p0 + 1e-9:
            raise AssertionError(f"degree bound violated at vertex {x}")
    return p0


# -- text format -------------------------------------------------------------
#
# First line "n m", then m lines "u v w" (0-based ids, decimal weight).
# Lines starting with '#' are comments.  save() writes edges sorted by
# (min, max) endpoint, which makes load/save a byte-stable round trip on
# canonical files.


def save(g, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{g.vertex_count} {len(g.edges)}\n")
        for u, v, w in g.edges:
            f.write(f"{u} {v} {w!r}\n")


def load(path):
    with open(path, "r", encoding="utf-8") as f:
        lines = [
            ln.strip() for ln in f
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
    if not lines:
        raise GraphFormatError(f"{path}: empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphFormatError(f"{path}: header must be 'n m'")
    n, m = int(head[0]), int(head[1])
    if len(lines) - 1 != m:
        raise GraphFormatError(
            f"{path}: expected {m} edge lines, found {len(lines) - 1}"
        )
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise GraphFormatError(f"{path}: bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return WeightedGraph(n, edges)
