r"""Exact solvers for the potential theory of the reversible walk.

All quantities reduce to linear systems in the weighted Dirichlet
Laplacian restricted to a region A:

    M = (D - W)|_A,   D = diag(mu),   W = symmetric edge weights.

M is the matrix of mu(x)(I - P^A) on A, so the Green kernel of the
killed walk is simply g^A = M^{-1} (symmetric), visit counts are
G^A(y,z) = g^A(y,z) mu(z), and exit times solve M E = mu|_A.

Ball conventions.  Balls are open, B(x,R) = {d < R}.  The annulus
resistance rho(x,r,R) is measured between the *inner surface* of the
annulus and the exterior: the closed ball {d <= r} is the source pole
and Gamma \ B(x,R) the sink.  With this convention the shells between
consecutive radii tile without overlap, which makes the series law
rho(x,R,4R) >= rho(x,R,2R) + rho(x,2R,4R) an exact cut identity on every
graph (cutting at the sphere S(x,2R) and shorting it can only lower the
resistance).  Set-valued resistances rho(A, Gamma \ B) take their poles
literally.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, MarginError, UnreachableError
from .graph import ball, boundary, sphere, volume

DIRECT_SOLVE_LIMIT = 5000
SOLVE_TOL = 1e-10
EIGEN_TOL = 1e-9
EIGEN_MAXITER = 10_000


# -- linear algebra plumbing -------------------------------------------------


def _weight_matrix(g):
    return sp.csr_matrix(
        (g.weights, g.indices, g.indptr),
        shape=(g.vertex_count, g.vertex_count),
    )


def _dirichlet_matrix(g, region):
    """(D - W) restricted to ``region`` (rows and columns)."""
    W = _weight_matrix(g)
    sub = W[region][:, region]
    return sp.diags(g.mu[region]) - sub


def _make_solver(M, checked=True):
    """Return solve(b) honouring the residual contract.

    Direct sparse LU below DIRECT_SOLVE_LIMIT unknowns, preconditioned
    conjugate gradients above; the contract is the relative residual,
    not the method.  With ``checked`` every solve verifies its residual
    and raises instead of returning silently inaccurate values (extreme
    weight ratios can push even a pivoted LU past float64).
    """
    n = M.shape[0]
    M = M.tocsc()
    if n < DIRECT_SOLVE_LIMIT:
        lu = spla.splu(M)
        raw = lu.solve
    else:
        diag = M.diagonal()
        precond = spla.LinearOperator(M.shape, matvec=lambda v: v / diag)

        def raw(b):
            x, info = spla.cg(M, b, rtol=1e-12, atol=0.0, maxiter=20_000,
                              M=precond)
            if info != 0:
                raise ConvergenceError(f"CG failed on {n} unknowns",
                                       iterations=info)
            return x

    if not checked:
        return raw

    def solve(b):
        x = raw(b)
        res = _relative_residual(M, x, b)
        if res > SOLVE_TOL:
            raise ConvergenceError(
                f"linear solve on {n} unknowns missed the residual "
                f"contract", residual=res)
        return x

    return solve


def _relative_residual(M, x, b):
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return 0.0
    return float(np.linalg.norm(M @ x - b) / bnorm)


def _as_vertex_set(g, A):
    A = np.unique(np.asarray(A, dtype=np.int64))
    if A.size and (A[0] < 0 or A[-1] >= g.vertex_count):
        raise ValueError("vertex id out of range")
    return A


def _require_proper_ball(g, x, R, what="ball"):
    B = ball(g, x, R)
    if B.size == 0:
        raise MarginError(f"{what} B({x},{R}) is empty")
    if B.size == g.vertex_count:
        raise MarginError(f"{what} B({x},{R}) covers the whole host graph")
    return B


# -- Dirichlet potentials and resistance -------------------------------------


@dataclass(frozen=True)
class PotentialField:
    values: np.ndarray        # one value per vertex; 1 on source, 0 on sink
    source: np.ndarray
    sink: np.ndarray
    residual: float


def dirichlet_potential(g, A, B_outer):
    """Capacity potential: 1 on A, 0 off B_outer, harmonic in between."""
    A = _as_vertex_set(g, A)
    B = _as_vertex_set(g, B_outer)
    if A.size == 0:
        raise ValueError("source set is empty")
    inB = np.zeros(g.vertex_count, dtype=bool)
    inB[B] = True
    if not inB[A].all():
        raise ValueError("source must lie inside B_outer")
    sink = np.flatnonzero(~inB).astype(np.int64)
    if sink.size == 0:
        raise ValueError("sink is empty (B_outer covers the host)")

    values = np.zeros(g.vertex_count, dtype=np.float64)
    values[A] = 1.0
    inA = np.zeros(g.vertex_count, dtype=bool)
    inA[A] = True
    interior = np.flatnonzero(inB & ~inA).astype(np.int64)
    residual = 0.0
    if interior.size:
        W = _weight_matrix(g)
        M = sp.diags(g.mu[interior]) - W[interior][:, interior]
        rhs = np.asarray(W[interior][:, A].sum(axis=1)).ravel()
        x = _make_solver(M)(rhs)
        residual = _relative_residual(M, x, rhs)
        values[interior] = x
    return PotentialField(values, A, sink, residual)


def current_out(g, A, values):
    """Total current leaving A: sum of mu_xy (u(x) - u(y)) over the cut."""
    inA = np.zeros(g.vertex_count, dtype=bool)
    inA[A] = True
    total = 0.0
    for x in A:
        lo, hi = g.indptr[x], g.indptr[x + 1]
        nbr = g.indices[lo:hi]
        w = g.weights[lo:hi]
        outside = ~inA[nbr]
        total += float(np.sum(w[outside] * (values[x] - values[nbr[outside]])))
    return total


def resistance(g, A, B_outer):
    """Effective resistance between A and the complement of B_outer."""
    field = dirichlet_potential(g, A, B_outer)
    current = current_out(g, field.source, field.values)
    if current <= 1e-300:
        raise UnreachableError("no current flows from source to sink")
    return 1.0 / current


def resistance_annulus(g, x, r, R):
    """rho(x,r,R): source is the closed ball {d <= r}, sink the exterior
    of B(x,R); the resistance of the annulus between its surfaces."""
    if not (R > r >= 0):
        raise ValueError("annulus requires R > r >= 0")
    x = g.check_vertex(x)
    B = _require_proper_ball(g, x, R, what="outer ball")
    source = ball(g, x, r + 1)      # {d <= r}
    return resistance(g, source, B)


def layered_lower_bound(g, A, B_outer):
    """Sum of shell-crossing reciprocals: a resistance lower bound.

    Shells are distance classes from A; shorting each class gives a
    series chain whose resistance sum_i 1/mu(E_i) can only be smaller
    than the true rho(A, complement of B_outer).
    """
    from ._kernels import multi_source_distances_numpy

    A = _as_vertex_set(g, A)
    B = _as_vertex_set(g, B_outer)
    if A.size == 0:
        raise ValueError("source set is empty")
    inB = np.zeros(g.vertex_count, dtype=bool)
    inB[B] = True
    sink = np.flatnonzero(~inB)
    if sink.size == 0:
        raise ValueError("sink is empty")
    dA = multi_source_distances_numpy(g.indptr, g.indices, A, g.vertex_count)
    L = int(dA[sink].min())
    if L <= 0:
        raise ValueError("source touches the sink")
    cross = np.zeros(L, dtype=np.float64)
    for u, v, w in g.edges:
        du, dv = int(dA[u]), int(dA[v])
        lo, hi = (du, dv) if du <= dv else (dv, du)
        if hi == lo + 1 and lo < L:
            cross[lo] += w
    if np.any(cross <= 0):
        raise UnreachableError("empty shell crossing")
    return float(np.sum(1.0 / cross))


def distance_to_complement(g, A, B_outer):
    """d(A, Gamma \\ B_outer): the shell count L used by the layered bound."""
    from ._kernels import multi_source_distances_numpy

    A = _as_vertex_set(g, A)
    B = _as_vertex_set(g, B_outer)
    inB = np.zeros(g.vertex_count, dtype=bool)
    inB[B] = True
    sink = np.flatnonzero(~inB)
    dA = multi_source_distances_numpy(g.indptr, g.indices, A, g.vertex_count)
    return int(dA[sink].min())


# -- Green operator -----------------------------------------------------------


class GreenOperator:
    """Factorized killed-walk solver for a region A, reusable across
    right-hand sides.  kernel(y,z) is g^A(y,z) = M^{-1}(y,z); it is
    exactly symmetric because M is."""

    def __init__(self, g, region):
        region = _as_vertex_set(g, region)
        if region.size == 0:
            raise ValueError("region is empty")
        if region.size == g.vertex_count:
            raise ValueError("region must be a proper subset (killed walk)")
        self.graph = g
        self.region = region
        self.size = int(region.size)
        self._loc = np.full(g.vertex_count, -1, dtype=np.int64)
        self._loc[region] = np.arange(self.size, dtype=np.int64)
        self._M = _dirichlet_matrix(g, region).tocsc()
        self._solve = _make_solver(self._M)
        self.mu = g.mu[region]
        self._columns = {}

    def local(self, v):
        i = int(self._loc[v])
        if i < 0:
            raise ValueError(f"vertex {v} not in region")
        return i

    def column(self, z):
        """g^A(., z) over the region, cached per z."""
        j = self.local(z)
        col = self._columns.get(j)
        if col is None:
            rhs = np.zeros(self.size)
            rhs[j] = 1.0
            col = self._solve(rhs)
            self._columns[j] = col
        return col

    def kernel(self, y, z):
        return float(self.column(z)[self.local(y)])

    def visits(self, y, z):
        """G^A(y,z): expected visits to z by the walk killed outside A."""
        return self.kernel(y, z) * float(self.graph.mu[z])

    def exit_times(self):
        """E_z(T_A) for z in the region: solves M E = mu."""
        return self._solve(self.mu.copy())

    def solve(self, rhs):
        return self._solve(rhs)


def green(g, A):
    return GreenOperator(g, A)


def green_kernel(op, y, z):
    return op.kernel(y, z)


# -- exit times ----------------------------------------------------------------


@dataclass(frozen=True)
class ExitTimeField:
    region: np.ndarray
    values: np.ndarray        # per vertex, 0 outside the region
    max_location: int
    max_value: float


def exit_time(g, A):
    op = GreenOperator(g, A)
    e = op.exit_times()
    values = np.zeros(g.vertex_count, dtype=np.float64)
    values[op.region] = e
    k = int(np.argmax(e))
    return ExitTimeField(op.region, values, int(op.region[k]), float(e[k]))


def mean_exit_time(g, x, R):
    """E(x,R): expected exit time of B(x,R) started at its center."""
    x = g.check_vertex(x)
    if R < 1:
        raise ValueError("radius must be >= 1")
    B = _require_proper_ball(g, x, R)
    op = GreenOperator(g, B)
    e = op.exit_times()
    return float(e[op.local(x)])


def max_exit_time(g, x, R):
    """Ebar(x,R): worst-case expected exit time over starting points."""
    x = g.check_vertex(x)
    B = _require_proper_ball(g, x, R)
    return exit_time(g, B).max_value


def exit_time_inverse(g, x, n):
    """Smallest R with E(x,R) >= n; exists by strict monotonicity in R.

    The comparison carries a 1e-6 relative tolerance: far above solver
    noise, far below the unit gap E(x,R+1) - E(x,R) >= 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    R = 1
    while True:
        if ball(g, x, R).size == g.vertex_count:
            raise MarginError(
                f"E(x,R) reaches {n} only beyond the host graph"
            )
        if mean_exit_time(g, x, R) >= n * (1.0 - 1e-6):
            return R
        R += 1


# -- smallest Dirichlet eigenvalue ---------------------------------------------


@dataclass(frozen=True)
class EigenResult:
    lam: float
    iterations: int
    residual: float


def lambda_min(g, A):
    """Smallest eigenvalue of (I - P^A)|_A via inverse iteration.

    The operator is conjugated by mu^{1/2} into a symmetric matrix; the
    eigenvalue is similarity-invariant, so the reported value belongs to
    the original operator.  Stops on the Rayleigh residual.
    """
    region = _as_vertex_set(g, A)
    if region.size == 0:
        raise ValueError("region is empty")
    if region.size == g.vertex_count:
        raise ValueError("region must be a proper subset")
    M = _dirichlet_matrix(g, region).tocsr()
    d = np.sqrt(g.mu[region])
    S = sp.diags(1.0 / d) @ M @ sp.diags(1.0 / d)
    S = S.tocsc()
    # inner solves only steer the iteration; the Rayleigh residual and
    # the positivity guard below are the actual quality contract
    solve = _make_solver(S, checked=False)

    v = np.ones(region.size) / np.sqrt(region.size)
    lam = 0.0
    res = np.inf
    for it in range(1, EIGEN_MAXITER + 1):
        w = solve(v)
        w /= np.linalg.norm(w)
        Sw = S @ w
        lam = float(w @ Sw)
        res = float(np.linalg.norm(Sw - lam * w))
        v = w
        if res <= EIGEN_TOL:
            if lam <= 0.0:
                # the operator is positive definite, so a non-positive
                # Rayleigh quotient means the eigenvalue sits below
                # float64 resolution (e.g. exponentially decaying
                # weights); report inability rather than garbage
                raise ConvergenceError(
                    "smallest eigenvalue below numerical resolution",
                    residual=res, iterations=it)
            return EigenResult(lam, it, res)
    raise ConvergenceError(
        f"inverse iteration did not converge in {EIGEN_MAXITER} steps",
        residual=res, iterations=EIGEN_MAXITER,
    )


# -- harmonic measure and Harnack-type constants -------------------------------


@dataclass(frozen=True)
class HarmonicMeasure:
    region: np.ndarray
    boundary: np.ndarray
    omega: np.ndarray         # shape (|region|, |boundary|), rows sum to 1

    def row(self, y):
        idx = np.searchsorted(self.region, y)
        if idx >= self.region.size or self.region[idx] != y:
            raise ValueError(f"vertex {y} not in region")
        return self.omega[idx]


def harmonic_measure(g, x, R):
    """Exit-position law omega(y,z) = P_y(walk leaves B(x,R) at z)."""
    x = g.check_vertex(x)
    B = _require_proper_ball(g, x, R)
    bnd = boundary(g, B)
    op = GreenOperator(g, B)
    W = _weight_matrix(g).tocsc()
    omega = np.empty((B.size, bnd.size), dtype=np.float64)
    for k, z in enumerate(bnd):
        col = W[:, int(z)].toarray().ravel()
        rhs = col[B]
        omega[:, k] = op.solve(rhs)
    return HarmonicMeasure(B, bnd, omega)


def harnack_constant(g, x, R):
    """Extremal Harnack ratio over non-negative functions harmonic in
    B(x,2R), maximised on the half ball B(x,R).

    Every such function is a non-negative combination of the exit
    kernels omega(., z), and a ratio of non-negative combinations is
    bounded by the extreme per-kernel ratio, so the maximum over kernels
    is the exact supremum over the cone.  Returns inf when a kernel
    vanishes somewhere on the half ball (flagging host disconnection).
    """
    if R < 1:
        raise ValueError("radius must be >= 1")
    hm = harmonic_measure(g, x, 2 * R)
    inner = ball(g, x, R)
    sel = np.isin(hm.region, inner)
    rows = hm.omega[sel]
    top = rows.max(axis=0)
    bot = rows.min(axis=0)
    H = 1.0
    for hi, lo in zip(top, bot):
        if lo <= 0.0:
            if hi > 0.0:
                return float("inf")
            continue
        H = max(H, hi / lo)
    return float(H)


def _green_ball_profile(g, x, R):
    """One Green solve on B(x,2R): kernel row at x, split annulus/ball."""
    x = g.check_vertex(x)
    B2 = _require_proper_ball(g, x, 2 * R, what="outer ball")
    inner = ball(g, x, R)
    op = GreenOperator(g, B2)
    gx = op.column(x)
    e2r = float(gx @ op.mu)          # E(x,2R) via the visit identity
    sel_inner = np.isin(B2, inner)
    inf_ball = float(gx[sel_inner].min())
    sup_ann = float(gx[~sel_inner].max()) if (~sel_inner).any() else np.nan
    return inf_ball, sup_ann, e2r


def hg_constant(g, x, R):
    """sup over the annulus of g^{B(x,2R)}(x,.) divided by the inf over
    B(x,R); the measured constant of the Green-kernel Harnack bound."""
    if R < 1:
        raise ValueError("radius must be >= 1")
    inf_ball, sup_ann, _ = _green_ball_profile(g, x, R)
    if np.isnan(sup_ann):
        raise MarginError("annulus B(x,2R) \\ B(x,R) is empty")
    return sup_ann / inf_ball


def g_condition(g, x, R):
    """Dimensionless Green bounds (lower, upper):
    (min over B(x,R) of g) V/E  and  (max over the annulus of g) V/E."""
    if R < 1:
        raise ValueError("radius must be >= 1")
    inf_ball, sup_ann, e2r = _green_ball_profile(g, x, R)
    if np.isnan(sup_ann):
        raise MarginError("annulus B(x,2R) \\ B(x,R) is empty")
    V = volume(g, x, R)
    return inf_ball * V / e2r, sup_ann * V / e2r
