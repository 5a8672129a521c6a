"""Sweep engine: measure lettered-condition constants, assert proved
inequalities, compute Einstein-relation statistics and fit exponents.

Validity margins.  A cell (x, R) is valid for a check with margin
multiplier m when the enlarged ball B(x, m*R) lies strictly inside the
host (see ball_inside_host); everything else is excluded with a
recorded reason.  Constant-free theorem inequalities are asserted at
1e-8 relative tolerance; constant-bearing statements are reported as
measured constants, never pass/failed.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, MarginError, UnreachableError
from .graph import (annulus_volume, ball, eccentricities, host_frontier,
                    shrink, sphere, volume)
from .potential import (
    GreenOperator,
    distance_to_complement,
    exit_time,
    g_condition,
    harnack_constant,
    hg_constant,
    lambda_min,
    layered_lower_bound,
    max_exit_time,
    mean_exit_time,
    resistance,
    resistance_annulus,
)

REL_TOL = 1e-8
REVERSIBILITY_TOL = 1e-12

# margin multiplier per check; time-comparison checks get the wider
# lmarkov-style margin, resistance doubling needs 4R, te<rv needs 5R
MARGINS = {
    "p0": 0, "VD": 2, "wVC": 2, "BC": 2,
    "TC": 3, "wTC": 3, "TD": 3, "Ebar": 2, "E_hom": 3,
    "ER": 2, "rho_v": 2, "H": 2, "HG": 2, "g": 2,
    "llrv": 2, "lrvb": 2, "lebar": 2, "lmarkov": 3, "lE<rm": 2,
    "cE<rm": 2, "lminE<rv": 2, "pra>l2": 2, "layered": 2, "crv>r2": 2,
    "te<rv": 5, "series": 4, "llcce": 2,
}

CONDITION_TAGS = ("BC", "VD", "wVC", "TC", "wTC", "TD", "ER", "rho_v",
                  "E_hom", "p0", "H", "Ebar", "HG", "g", "aVD", "adrv")


# -- grids --------------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    centers: tuple
    radii: tuple
    margins: dict = field(default_factory=lambda: dict(MARGINS))

    def margin(self, tag):
        return self.margins.get(tag, 2)


@dataclass(frozen=True)
class CellSkip:
    x: int
    R: int
    reason: str


def ball_inside_host(g, x, K):
    """True when B(x,K) lies strictly inside the host: the ball is a
    proper subset and stays off the truncation frontier (so no clipped
    neighbourhoods leak into the evaluation).  x itself may sit on the
    frontier - a distinguished corner is a legitimate blow-up point."""
    if g.eccentricity(x) < K:
        return False
    frontier = host_frontier(g)
    frontier = frontier[frontier != x]
    if frontier.size == 0:
        return True
    return int(g.distances(x)[frontier].min()) >= K


def valid_cells(g, grid, m):
    """Cells whose enlarged ball B(x, m*R) fits strictly inside the
    host, plus recorded exclusions."""
    cells, skipped = [], []
    for x in grid.centers:
        for R in grid.radii:
            if ball_inside_host(g, x, m * R):
                cells.append((int(x), int(R)))
            else:
                skipped.append(CellSkip(
                    int(x), int(R),
                    f"B({x},{m}*{R}) not strictly inside the host"))
    return cells, skipped


def radius_pairs(grid):
    """(r, R) pairs with R > r from the grid ladder, thin annuli excluded."""
    rs = sorted(set(grid.radii))
    return [(r, R) for i, r in enumerate(rs) for R in rs[i + 1:] if R - r >= 2]


def auto_centers(g, count=5):
    """Host center plus quarter-diagonal vertices, chosen intrinsically.

    The host center minimizes eccentricity (smallest id breaks ties).
    Far poles are picked greedily on the farthest sphere, and each
    quarter-diagonal is the median geodesic midpoint between the center
    and a pole; on lattice boxes this lands exactly on the diagonal
    (L/4, L/4)-type vertices.
    """
    ecc = eccentricities(g)
    c = int(np.argmin(ecc))
    D = int(ecc[c])
    dc = g.distances(c)
    far = np.flatnonzero(dc == D).astype(np.int64)
    poles = [int(far[0])]
    while len(poles) < min(4, far.size):
        dmats = [g.distances(p) for p in poles]
        score = np.min(np.stack([d[far] for d in dmats]), axis=0)
        cand = int(far[int(np.argmax(score))])
        if cand in poles:
            break
        poles.append(cand)
    h = D // 2
    out = [c]
    if h >= 1:
        for p in poles:
            dp = g.distances(p)
            mids = np.flatnonzero((dc == h) & (dp == D - h))
            if mids.size:
                out.append(int(mids[mids.size // 2]))
    seen, dedup = set(), []
    for v in out:
        if v not in seen:
            seen.add(v)
            dedup.append(v)
    return dedup[:count]


def dyadic_radii(g, centers, r0=2, m=2):
    """Dyadic ladder r0, 2*r0, ... while the margin m holds at every center."""
    ecc = min(g.eccentricity(x) for x in centers)
    radii = []
    R = r0
    while m * R <= ecc:
        radii.append(R)
        R *= 2
    return radii


def default_grid(g, centers=None, radii=None):
    centers = list(centers) if centers else auto_centers(g)
    radii = list(radii) if radii else dyadic_radii(g, centers)
    if not radii:
        raise MarginError("host graph too small for any valid radius")
    return SweepGrid(tuple(centers), tuple(radii))


# -- shared quantity cache -----------------------------------------------------


class QuantityCache:
    """Memo for exact quantities over one graph.

    Thread-safe: duplicate concurrent computations are benign because
    every quantity is a deterministic pure function of (graph, key).
    """

    def __init__(self, g):
        self.g = g
        self._vals = {}
        self._lock = threading.Lock()

    def _get(self, key, fn):
        with self._lock:
            if key in self._vals:
                return self._vals[key]
        val = fn()
        with self._lock:
            return self._vals.setdefault(key, val)

    def V(self, x, R):
        return self._get(("V", x, R), lambda: volume(self.g, x, R))

    def E(self, x, R):
        return self._get(("E", x, R), lambda: mean_exit_time(self.g, x, R))

    def Ebar(self, x, R):
        return self._get(("Eb", x, R), lambda: max_exit_time(self.g, x, R))

    def rho(self, x, r, R):
        return self._get(("rho", x, r, R),
                         lambda: resistance_annulus(self.g, x, r, R))

    def rho_set_balls(self, x, r, R):
        return self._get(
            ("rhoset", x, r, R),
            lambda: resistance(self.g, ball(self.g, x, r), ball(self.g, x, R)),
        )

    def lam(self, x, R):
        return self._get(("lam", x, R),
                         lambda: lambda_min(self.g, ball(self.g, x, R)).lam)

    def w(self, x, R):
        """rho(x,R,2R) * v(x,R,2R), the Einstein product."""
        return self.rho(x, R, 2 * R) * annulus_volume(self.g, x, R, 2 * R)

    def harnack(self, x, R):
        return self._get(("H", x, R), lambda: harnack_constant(self.g, x, R))

    def hg(self, x, R):
        return self._get(("HG", x, R), lambda: hg_constant(self.g, x, R))

    def gcond(self, x, R):
        return self._get(("g", x, R), lambda: g_condition(self.g, x, R))


def _map_cells(fn, items, threads):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- condition measurement ------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    tag: str
    constant: float
    extremizer: tuple | None
    cells: int
    note: str = ""
    details: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)


def _max_ratio_report(tag, triples, cells_evaluated):
    """triples: (ratio, extremizer, row); report the maximum."""
    if not triples:
        raise MarginError(f"no valid cells for condition {tag}")
    best = max(range(len(triples)), key=lambda i: triples[i][0])
    return ConditionReport(
        tag=tag,
        constant=float(triples[best][0]),
        extremizer=triples[best][1],
        cells=cells_evaluated,
        rows=[t[2] for t in triples],
    )


def measure_condition(g, grid, tag, cache=None, threads=1):
    """Empirical best constant for one lettered condition over the grid."""
    cache = cache or QuantityCache(g)
    m = grid.margin(tag)

    if tag == "p0":
        best = None
        for x in range(g.vertex_count):
            lo, hi = g.indptr[x], g.indptr[x + 1]
            k = int(np.argmin(g.weights[lo:hi]))
            val = float(g.weights[lo + k] / g.mu[x])
            if best is None or val < best[0]:
                best = (val, (x, int(g.indices[lo + k])))
        max_deg = max(int(g.indptr[x + 1] - g.indptr[x])
                      for x in range(g.vertex_count))
        return ConditionReport("p0", best[0], best[1], g.vertex_count,
                               details={"max_degree": max_deg,
                                        "degree_bound": 1.0 / best[0]})

    cells, skipped = valid_cells(g, grid, m)
    note = "; ".join(f"skip ({s.x},{s.R}): {s.reason}" for s in skipped)

    if tag in ("aVD", "adrv"):
        for A in (2, 4, 8, 16):
            need = 2 * A if tag == "adrv" else A
            sub = [(x, R) for (x, R) in cells
                   if ball_inside_host(g, x, need * R)]
            if not sub:
                break
            if tag == "aVD":
                ok = all(2 * cache.V(x, R) <= cache.V(x, A * R) * (1 + REL_TOL)
                         for x, R in sub)
            else:
                ok = all(2 * cache.w(x, R) <= cache.w(x, A * R) * (1 + REL_TOL)
                         for x, R in sub)
            if ok:
                return ConditionReport(tag, float(A), None, len(sub),
                                       note=note)
        return ConditionReport(tag, float("nan"), None, len(cells),
                               note=(note + "; " if note else "")
                               + "not achieved in range")

    if not cells:
        raise MarginError(f"no valid cells for condition {tag}")

    def ratio_rows(fn):
        out = []
        for res in _map_cells(fn, cells, threads):
            out.extend(res)
        return out

    if tag == "VD":
        def cell(c):
            x, R = c
            val = cache.V(x, 2 * R) / cache.V(x, R)
            return [(val, (x, R), (tag, x, R, R, "", val))]
        trips = ratio_rows(cell)
    elif tag == "wVC":
        def cell(c):
            x, R = c
            vx = cache.V(x, R)
            out = []
            for y in ball(g, x, R):
                val = vx / cache.V(int(y), R)
                out.append((val, (x, int(y), R), (tag, x, int(y), R, "", val)))
            return out
        trips = ratio_rows(cell)
    elif tag == "BC":
        def cell(c):
            x, R = c
            big = ball(g, x, 2 * R)
            uncovered = set(int(v) for v in big)
            K = 0
            while uncovered:
                u = min(uncovered)
                uncovered -= set(int(v) for v in ball(g, u, R))
                K += 1
            return [(float(K), (x, R), (tag, x, R, R, "greedy", float(K)))]
        trips = ratio_rows(cell)
    elif tag == "TC":
        def cell(c):
            x, R = c
            e2 = cache.E(x, 2 * R)
            return [
                (e2 / cache.E(int(y), R), (x, int(y), R),
                 (tag, x, int(y), R, "", e2 / cache.E(int(y), R)))
                for y in ball(g, x, R)
            ]
        trips = ratio_rows(cell)
    elif tag == "wTC":
        def cell(c):
            x, R = c
            ex = cache.E(x, R)
            return [
                (ex / cache.E(int(y), R), (x, int(y), R),
                 (tag, x, int(y), R, "", ex / cache.E(int(y), R)))
                for y in ball(g, x, R)
            ]
        trips = ratio_rows(cell)
    elif tag == "TD":
        def cell(c):
            x, R = c
            val = cache.E(x, 2 * R) / cache.E(x, R)
            return [(val, (x, R), (tag, x, R, R, "", val))]
        trips = ratio_rows(cell)
    elif tag == "Ebar":
        def cell(c):
            x, R = c
            val = cache.Ebar(x, R) / cache.E(x, R)
            return [(val, (x, R), (tag, x, R, R, "", val))]
        trips = ratio_rows(cell)
    elif tag == "E_hom":
        def cell(c):
            x, R = c
            ex = cache.E(x, R)
            out = []
            for y in grid.centers:
                if y == x or not ball_inside_host(g, y, m * R):
                    continue
                val = ex / cache.E(int(y), R)
                out.append((val, (x, int(y), R), (tag, x, int(y), R, "", val)))
            return out
        trips = ratio_rows(cell)
    elif tag == "rho_v":
        def cell(c):
            x, R = c
            wx = cache.w(x, R)
            out = []
            for y in grid.centers:
                if y == x or not ball_inside_host(g, y, m * R):
                    continue
                val = wx / cache.w(int(y), R)
                out.append((val, (x, int(y), R), (tag, x, int(y), R, "", val)))
            return out
        trips = ratio_rows(cell)
    elif tag == "ER":
        def cell(c):
            x, R = c
            q = cache.E(x, 2 * R) / cache.w(x, R)
            return [(q, (x, R), (tag, x, R, R, "Q", q))]
        trips = ratio_rows(cell)
        qs = [t[0] for t in trips]
        spread = max(qs) / min(qs)
        best = trips[int(np.argmax(qs))]
        return ConditionReport("ER", float(spread), best[1], len(cells),
                               note=note,
                               details={"min_Q": float(min(qs)),
                                        "max_Q": float(max(qs))},
                               rows=[t[2] for t in trips])
    elif tag == "H":
        def cell(c):
            x, R = c
            val = cache.harnack(x, R)
            return [(val, (x, R), (tag, x, R, R, "", val))]
        trips = ratio_rows(cell)
    elif tag == "HG":
        def cell(c):
            x, R = c
            val = cache.hg(x, R)
            return [(val, (x, R), (tag, x, R, R, "", val))]
        trips = ratio_rows(cell)
    elif tag == "g":
        def cell(c):
            x, R = c
            lo, hi = cache.gcond(x, R)
            return [(hi, lo, (x, R), (tag, x, R, R, "c_low", lo),
                     (tag, x, R, R, "C_high", hi))]
        raw = _map_cells(cell, cells, threads)
        flat = [r[0] for r in raw]
        los = [f[1] for f in flat]
        his = [f[0] for f in flat]
        k = int(np.argmax(his))
        rows = [f[3] for f in flat] + [f[4] for f in flat]
        return ConditionReport(
            "g", float(his[k]), flat[k][2], len(cells), note=note,
            details={"c_low_min": float(min(los)),
                     "C_high_max": float(max(his))},
            rows=rows,
        )
    else:
        raise ValueError(f"unknown condition tag {tag!r}")

    rep = _max_ratio_report(tag, trips, len(cells))
    return ConditionReport(rep.tag, rep.constant, rep.extremizer, rep.cells,
                           note=note, rows=rep.rows)


# -- inequality suite -----------------------------------------------------------


@dataclass(frozen=True)
class InequalityResult:
    check: str
    passed: bool | None        # None: constant-bearing, reported not asserted
    worst_slack: float
    witness: tuple | None
    constant: float | None
    cells: int
    rows: list = field(repr=False, default_factory=list)


def _rel_slack(lhs, rhs):
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return (rhs - lhs) / scale


class _Suite:
    """Accumulates (lhs <= rhs) observations for one named check."""

    def __init__(self, check, tol=REL_TOL):
        self.check = check
        self.tol = tol
        self.rows = []
        self.worst = math.inf
        self.witness = None

    def add(self, cell, lhs, rhs, detail=""):
        slack = _rel_slack(lhs, rhs)
        ok = slack >= -self.tol
        self.rows.append((self.check, *cell, detail, lhs, rhs, slack, ok))
        if slack < self.worst:
            self.worst = slack
            self.witness = cell
        return ok

    def guard(self, cell, fn):
        """Run one cell; solver breakdown becomes a failing data row
        (the suite reports, it never aborts mid-sweep)."""
        try:
            fn()
        except (ConvergenceError, UnreachableError, MarginError) as exc:
            self.rows.append((self.check, *cell, f"solver: {exc}",
                              math.nan, math.nan, -math.inf, False))
            self.worst = -math.inf
            self.witness = cell

    def result(self):
        if not self.rows:
            return InequalityResult(self.check, True, math.inf, None, None, 0)
        passed = all(r[-1] for r in self.rows)
        return InequalityResult(self.check, passed, self.worst, self.witness,
                                None, len(self.rows), self.rows)


def _cells3(cell):
    x, R = cell
    return (x, R, R)


def verify_inequalities(g, grid, cache=None, threads=1):
    """Run the proved-inequality suite; failures are data, not errors."""
    cache = cache or QuantityCache(g)
    results = []

    # reversibility of the stored weights: mu(x)P(x,y) == mu(y)P(y,x)
    rev = _Suite("reversibility", tol=REVERSIBILITY_TOL)
    worst = 0.0
    worst_pair = None
    for x in range(g.vertex_count):
        for k in range(int(g.indptr[x]), int(g.indptr[x + 1])):
            y = int(g.indices[k])
            wxy = float(g.weights[k])
            lo, hi = int(g.indptr[y]), int(g.indptr[y + 1])
            pos = np.searchsorted(g.indices[lo:hi], x)
            wyx = float(g.weights[lo + pos]) if pos < hi - lo and \
                int(g.indices[lo + pos]) == x else 0.0
            asym = abs(wxy - wyx) / max(wxy, wyx, 1e-300)
            if asym > worst:
                worst, worst_pair = asym, (x, y, 0)
    rev.add(worst_pair or (0, 0, 0), worst, 0.0, "max relative asymmetry")
    results.append(rev.result())

    def cells_for(tag):
        return valid_cells(g, grid, grid.margin(tag))[0]

    pairs = radius_pairs(grid)

    def pair_cells(tag):
        m = grid.margin(tag)
        out = []
        for x in grid.centers:
            for r, R in pairs:
                if ball_inside_host(g, x, max(m * r, R)):
                    out.append((x, r, R))
        return out

    # llrv: lambda(B) rho(A, complement B) mu(A) <= 1 on ball pairs
    s = _Suite("llrv")
    for x, r, R in pair_cells("llrv"):
        def llrv_cell(x=x, r=r, R=R):
            lhs = cache.lam(x, R) * cache.rho_set_balls(x, r, R) \
                * cache.V(x, r)
            s.add((x, r, R), lhs, 1.0)
        s.guard((x, r, R), llrv_cell)
    results.append(s.result())

    # lrvb: lambda(x,2R) rho(x,R,2R) V(x,R) <= 1
    s = _Suite("lrvb")
    for cell in cells_for("lrvb"):
        def lrvb_cell(cell=cell):
            x, R = cell
            lhs = cache.lam(x, 2 * R) * cache.rho(x, R, 2 * R) * cache.V(x, R)
            s.add(_cells3(cell), lhs, 1.0)
        s.guard(_cells3(cell), lrvb_cell)
    results.append(s.result())

    # lebar: 1/lambda(A) <= Ebar(A) on balls
    s = _Suite("lebar")
    for cell in cells_for("lebar"):
        x, R = cell
        for RR in (R, 2 * R):
            if g.eccentricity(x) < RR:
                continue

            def lebar_cell(x=x, RR=RR):
                s.add((x, RR, RR), 1.0 / cache.lam(x, RR), cache.Ebar(x, RR))
            s.guard((x, RR, RR), lebar_cell)
    results.append(s.result())

    # lmarkov superadditivity: E(x,R+r) >= E(x,R) + min_{y in S(x,R)} E(y,r)
    s = _Suite("lmarkov")
    for cell in cells_for("lmarkov"):
        x, R = cell
        for r in sorted({1, R // 2, R} - {0}):
            if not ball_inside_host(g, x, R + r):
                continue
            zs = sphere(g, x, R)
            if zs.size == 0:
                continue

            def lmarkov_cell(x=x, r=r, R=R, zs=zs):
                bump = min(cache.E(int(y), r) for y in zs)
                s.add((x, r, R), cache.E(x, R) + bump, cache.E(x, R + r))
            s.guard((x, r, R), lmarkov_cell)
    results.append(s.result())

    # lE<rm: E_x(T_A) <= rho({x}, complement A) mu(A) with A = B(x,R)
    s = _Suite("lE<rm")
    for cell in cells_for("lE<rm"):
        def le_rm_cell(cell=cell):
            x, R = cell
            op = GreenOperator(g, ball(g, x, R))
            s.add(_cells3(cell), cache.E(x, R),
                  op.kernel(x, x) * cache.V(x, R))
        s.guard(_cells3(cell), le_rm_cell)
    results.append(s.result())

    # cE<rm: on the shrunk graph, E_a(T_B) <= rho(A, complement B) v
    s = _Suite("cE<rm")
    for cell in cells_for("cE<rm"):
        def ce_rm_cell(cell=cell):
            x, R = cell
            A = ball(g, x, R)
            B = ball(g, x, 2 * R)
            sr = shrink(g, A)
            keep = sr.old_to_new[B]
            region = np.sort(np.append(keep[keep >= 0], sr.a))
            lhs = float(exit_time(sr.graph, region).values[sr.a])
            rhs = cache.rho_set_balls(x, R, 2 * R) \
                * annulus_volume(g, x, R, 2 * R)
            s.add(_cells3(cell), lhs, rhs)
        s.guard(_cells3(cell), ce_rm_cell)
    results.append(s.result())

    # lminE<rv: min_{z in S(x,3R/2)} E(z,R/2) <= rho(A, complement B) v
    s = _Suite("lminE<rv")
    for cell in cells_for("lminE<rv"):
        x, R = cell
        if R % 2:
            continue
        zs = sphere(g, x, 3 * R // 2)
        if zs.size == 0:
            continue

        def lmin_cell(cell=cell, zs=zs):
            x, R = cell
            lhs = min(cache.E(int(z), R // 2) for z in zs)
            rhs = cache.rho_set_balls(x, R, 2 * R) \
                * annulus_volume(g, x, R, 2 * R)
            s.add(_cells3(cell), lhs, rhs)
        s.guard(_cells3(cell), lmin_cell)
    results.append(s.result())

    # pra>l2 and the layered shell bound
    s_p = _Suite("pra>l2")
    s_l = _Suite("layered")
    for x, r, R in pair_cells("pra>l2"):
        def pra_cell(x=x, r=r, R=R):
            A = ball(g, x, r)
            B = ball(g, x, R)
            vol_ann = annulus_volume(g, x, r, R)
            lay = layered_lower_bound(g, A, B)
            L = distance_to_complement(g, A, B)
            s_l.add((x, r, R), lay, cache.rho_set_balls(x, r, R),
                    "bound<=rho")
            s_p.add((x, r, R), float(L * L), lay * vol_ann)
        s_p.guard((x, r, R), pra_cell)
    results.append(s_p.result())
    results.append(s_l.result())

    # crv>r2: rho(x,r,R) v(x,r,R) >= (R-r)^2
    s = _Suite("crv>r2")
    for x, r, R in pair_cells("crv>r2"):
        def crv_cell(x=x, r=r, R=R):
            rhs = cache.rho(x, r, R) * annulus_volume(g, x, r, R)
            s.add((x, r, R), float((R - r) ** 2), rhs)
        s.guard((x, r, R), crv_cell)
    results.append(s.result())

    # te<rv: E(x,2R) <= C rho(x,R,5R) v(x,R,5R); constant reported
    rows = []
    best = None
    for cell in cells_for("te<rv"):
        x, R = cell
        try:
            val = cache.E(x, 2 * R) / (cache.rho(x, R, 5 * R)
                                       * annulus_volume(g, x, R, 5 * R))
        except (ConvergenceError, UnreachableError, MarginError) as exc:
            rows.append(("te<rv", x, R, R, f"solver: {exc}",
                         math.nan, math.nan, math.nan, False))
            continue
        rows.append(("te<rv", x, R, R, "C", val, math.nan, math.nan, True))
        if best is None or val > best[0]:
            best = (val, _cells3(cell))
    results.append(InequalityResult(
        "te<rv", None, math.inf, best[1] if best else None,
        best[0] if best else None, len(rows), rows))

    # series law: rho(x,R,4R) >= rho(x,R,2R) + rho(x,2R,4R).
    # Exact under the annulus-surface convention: every unit of current
    # crosses S(x,2R), and shorting that sphere splits the annulus into
    # the two sub-annuli with no shared edge layer.
    s = _Suite("series")
    for cell in cells_for("series"):
        def series_cell(cell=cell):
            x, R = cell
            lhs = cache.rho(x, R, 2 * R) + cache.rho(x, 2 * R, 4 * R)
            s.add(_cells3(cell), lhs, cache.rho(x, R, 4 * R))
        s.guard(_cells3(cell), series_cell)
    results.append(s.result())

    # llcce chain: rho(x,R,2R) V(x,R) <= 1/lambda(x,2R) <= Ebar(x,2R)
    s = _Suite("llcce")
    for cell in cells_for("llcce"):
        def llcce_cell(cell=cell):
            x, R = cell
            lam_inv = 1.0 / cache.lam(x, 2 * R)
            s.add(_cells3(cell), cache.rho(x, R, 2 * R) * cache.V(x, R),
                  lam_inv, "rhoV<=1/lam")
            s.add(_cells3(cell), lam_inv, cache.Ebar(x, 2 * R),
                  "1/lam<=Ebar")
        s.guard(_cells3(cell), llcce_cell)
    results.append(s.result())

    return results


# -- Einstein relation -----------------------------------------------------------


@dataclass(frozen=True)
class EinsteinRecord:
    x: int
    R: int
    E2R: float
    rho: float
    v: float
    Q: float


@dataclass(frozen=True)
class EinsteinSummary:
    min_Q: float
    max_Q: float
    spread: float
    argmin: tuple
    argmax: tuple
    cells: int
    skipped: tuple


def einstein_report(g, grid, cache=None, threads=1):
    """Per-cell Einstein records Q = E(x,2R)/(rho v) and the spread."""
    cache = cache or QuantityCache(g)
    cells, skipped = valid_cells(g, grid, grid.margin("ER"))
    if not cells:
        raise MarginError("empty grid: no valid Einstein cells")

    def one(cell):
        x, R = cell
        rho = cache.rho(x, R, 2 * R)
        v = annulus_volume(g, x, R, 2 * R)
        e2 = cache.E(x, 2 * R)
        if rho * v < (R * R) * (1 - REL_TOL):
            raise AssertionError(
                f"rho*v below the (R-r)^2 floor at ({x},{R})")
        return EinsteinRecord(x, R, e2, rho, v, e2 / (rho * v))

    records = _map_cells(one, cells, threads)
    qs = [r.Q for r in records]
    i_min, i_max = int(np.argmin(qs)), int(np.argmax(qs))
    summary = EinsteinSummary(
        min_Q=float(qs[i_min]), max_Q=float(qs[i_max]),
        spread=float(qs[i_max] / qs[i_min]),
        argmin=(records[i_min].x, records[i_min].R),
        argmax=(records[i_max].x, records[i_max].R),
        cells=len(records),
        skipped=tuple((s.x, s.R, s.reason) for s in skipped),
    )
    return records, summary


# -- exponent fits ----------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    stderr: float
    r2: float
    radii: tuple


@dataclass(frozen=True)
class ExponentSummary:
    alpha: ExponentFit
    beta: ExponentFit
    gamma: ExponentFit
    erdim_residual: float


def _loglog_fit(radii, values):
    x = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    resid = y - (ym + slope * (x - xm))
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else 0.0
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return ExponentFit(slope, stderr, r2, tuple(int(r) for r in radii))


def fit_exponents(g, x, radii, cache=None):
    """Log-log fits: volume -> alpha, exit time -> beta, annulus
    conductance 1/rho(x,R,2R) -> gamma; residual beta - (alpha - gamma)."""
    cache = cache or QuantityCache(g)
    radii = sorted(set(int(R) for R in radii))
    radii = [R for R in radii if ball_inside_host(g, x, 2 * R)]
    if len(radii) < 4:
        raise ValueError("need at least 4 valid radii for exponent fits")
    alpha = _loglog_fit(radii, [cache.V(x, R) for R in radii])
    beta = _loglog_fit(radii, [cache.E(x, R) for R in radii])
    gamma = _loglog_fit(radii, [1.0 / cache.rho(x, R, 2 * R) for R in radii])
    resid = beta.exponent - (alpha.exponent - gamma.exponent)
    return ExponentSummary(alpha, beta, gamma, float(resid))


# -- resistance doubling ------------------------------------------------------------


@dataclass(frozen=True)
class DoublingReport:
    c1: float
    c1_witness: tuple
    c2: float
    c2_witness: tuple
    gamma1: float
    gamma2: float
    h_measured: float
    theta: float
    product: float
    product_ok: bool
    v2_prefactor: float
    v1_prefactor: float
    cells: int


def resistance_doubling(g, grid, cache=None, threads=1):
    """Measured doubling constants C1, C2 of the annulus resistance and
    the exponents/bounds they imply."""
    cache = cache or QuantityCache(g)
    cells, _ = valid_cells(g, grid, grid.margin("series"))
    if not cells:
        raise MarginError("margin exhaustion: no cells with ecc >= 4R")

    def one(cell):
        x, R = cell
        r14 = cache.rho(x, R, 4 * R)
        return (r14 / cache.rho(x, R, 2 * R), r14 / cache.rho(x, 2 * R, 4 * R))

    ratios = _map_cells(one, cells, threads)
    i1 = int(np.argmax([r[0] for r in ratios]))
    i2 = int(np.argmax([r[1] for r in ratios]))
    c1, c2 = float(ratios[i1][0]), float(ratios[i2][1])
    gamma1 = math.log2(c1 - 1) if c1 > 1 else -math.inf
    gamma2 = math.log2(c2 - 1) if c2 > 1 else -math.inf
    product = (c1 - 1) * (c2 - 1)

    h_cells, _ = valid_cells(g, grid, grid.margin("H"))
    h_measured = max(cache.harnack(x, R) for x, R in h_cells) if h_cells \
        else math.nan
    theta = math.log(h_measured, 3) if math.isfinite(h_measured) else math.nan

    v2 = math.inf
    v1 = 0.0
    for x, R in cells:
        growth = cache.V(x, 2 * R) - cache.V(x, R)
        mu_x = float(g.mu[x])
        if math.isfinite(gamma1):
            v2 = min(v2, growth / (mu_x * R ** (2 - gamma1)))
        if math.isfinite(gamma2):
            v1 = max(v1, cache.V(x, R) / (cache.E(x, R) * mu_x * R ** gamma2))
    return DoublingReport(
        c1=c1, c1_witness=cells[i1], c2=c2, c2_witness=cells[i2],
        gamma1=gamma1, gamma2=gamma2,
        h_measured=float(h_measured), theta=float(theta),
        product=float(product), product_ok=product >= 1.0 - REL_TOL,
        v2_prefactor=float(v2), v1_prefactor=float(v1), cells=len(cells),
    )


# -- strong anti-doubling --------------------------------------------------------------


@dataclass(frozen=True)
class AntiDoublingReport:
    a_f: int | None
    b_f: float | None
    beta1: ExponentFit
    lfl_rows: list
    f_values: dict


def strong_antidoubling(g, grid, cache=None, centers=None):
    """Growth of F(R) = min over centers of E(x,R).

    Verifies F(LR) >= L F(R) for L in {2,3,4} on valid pairs, reports
    the smallest integer A with min_R F(AR)/F(R) > A (superlinear pair
    A_F, B_F), and fits beta_1 from log F against log R.
    """
    cache = cache or QuantityCache(g)
    centers = list(centers) if centers is not None else list(grid.centers)

    def F(R):
        vals = [cache.E(x, R) for x in centers
                if ball_inside_host(g, x, 2 * R)]
        return min(vals) if vals else None

    f_values = {}

    def getF(R):
        if R not in f_values:
            f_values[R] = F(R)
        return f_values[R]

    base = sorted(set(grid.radii))
    if not base:
        raise MarginError("insufficient valid cells for F")
    lfl_rows = []
    for R in base:
        for L in (2, 3, 4):
            fl, f1 = getF(L * R), getF(R)
            if fl is None or f1 is None:
                continue
            slack = _rel_slack(L * f1, fl)
            lfl_rows.append(("lfl", L, R, fl, L * f1, slack,
                             slack >= -REL_TOL))
    if not lfl_rows:
        raise MarginError("insufficient valid cells for F(LR) checks")

    a_f = None
    b_f = None
    for A in (2, 3, 4, 5, 6):
        ratios = []
        for R in base:
            fa, f1 = getF(A * R), getF(R)
            if fa is not None and f1 is not None:
                ratios.append(fa / f1)
        if ratios and min(ratios) > A:
            a_f, b_f = A, float(min(ratios))
            break

    fit_radii = [R for R in sorted(f_values) if f_values[R] is not None]
    fit_vals = [f_values[R] for R in fit_radii]
    beta1 = _loglog_fit(fit_radii, fit_vals) if len(fit_radii) >= 3 else \
        ExponentFit(math.nan, math.nan, math.nan, tuple(fit_radii))
    return AntiDoublingReport(a_f, b_f, beta1, lfl_rows,
                              {k: v for k, v in f_values.items()
                               if v is not None})
