"""Topology of (epsilon-)Nash sets on a cubical grid.

Grids live in reduced coordinates ``(x_1..x_{m-1}, y_1..y_{n-1})`` on the unit
cube; a cell belongs to the region when its closed box meets ``NE_eps``.

Exact classification works on integers: with ``K`` the lattice scale and ``D``
a common denominator of the payoffs and ``eps``, ``K^2 D`` times each deficit
is an integer at lattice points.  Cells are settled by, in order,

* a member certificate: some lattice point of the cell is an eps-equilibrium;
* an exclusion certificate: for a best-response label pair ``(i, j)`` and a
  weight ``lam``, the bilinear form ``lam*((M1 y)_i - x'M1y) + (1-lam)*((x'M2)_j - x'M2y)``
  is a lower bound of ``max(d1, d2)``; its minimum over the cell is attained at
  a pair of cell vertices, so exceeding eps there excludes the cell;
* subdivision of still-ambiguous cells, and finally an exact decision on the
  leaves (:func:`_box_feasible_exact`).
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .conley import Cell, CubicalGrid, simplex_product_grid
from .exact import QuadraticSurd, fm_feasible, polytope_vertices
from .game import BimatrixGame, MixedProfile, best_responses, to_fraction
from .homology import BettiProfile, complex_from_cells, homology

MODES = ("exact", "vertex", "center")
_LAMBDAS = np.arange(5)  # lam = l/4
_CHUNK = 4096


class RegionError(ValueError):
    pass


def normalized_to_raw(g: BimatrixGame, eps_normalized) -> Fraction:
    """Raw eps for utilities rescaled to [0, 1]: multiply by the payoff range."""
    return to_fraction(eps_normalized) * g.payoff_range()


def raw_to_normalized(g: BimatrixGame, eps_raw) -> Fraction:
    return to_fraction(eps_raw) / g.payoff_range()


# ---------------------------------------------------------------------------
# integer scaling and batched evaluation


@dataclass(frozen=True)
class _IntGame:
    a1: np.ndarray
    a2: np.ndarray
    e: int
    m: int
    n: int

    @classmethod
    def build(cls, g: BimatrixGame, eps: Fraction) -> "_IntGame":
        entries = [v for row in g.payoff1 for v in row] + [v for row in g.payoff2 for v in row] + [eps]
        den = 1
        for v in entries:
            den = den * v.denominator // math.gcd(den, v.denominator)
        a1 = np.array([[int(v * den) for v in row] for row in g.payoff1], dtype=object)
        a2 = np.array([[int(v * den) for v in row] for row in g.payoff2], dtype=object)
        return cls(a1, a2, int(eps * den), g.m, g.n)

    def arrays(self, scale: int):
        """Payoffs as int64 when every quantity at lattice scale ``scale`` fits, else Python ints."""
        top = max(int(np.abs(self.a1).max()), int(np.abs(self.a2).max()), self.e, 1)
        if 16 * scale * scale * top * max(self.m, self.n) < 2**62:
            return self.a1.astype(np.int64), self.a2.astype(np.int64), np.int64
        return self.a1, self.a2, object


def _block_points(lower: np.ndarray, K: int, scale: int, r: int):
    """Full integer coordinates (level ``K*scale``) of the lattice points of each box.

    ``lower`` has shape ``(B, r)``; returns ``(B, P, r+1)`` points and a ``(B, P)``
    mask of points inside the simplex.
    """
    offsets = np.array(list(itertools.product(range(scale + 1), repeat=r)), dtype=np.int64).reshape(-1, r)
    pts = lower[:, None, :] * scale + offsets[None, :, :]
    level = K * scale
    total = pts.sum(axis=2)
    valid = total <= level
    full = np.concatenate([pts, (level - total)[:, :, None]], axis=2)
    full = np.where(valid[:, :, None], full, 0)
    full[..., -1] = np.where(valid, full[..., -1], level)  # harmless filler for masked points
    return full, valid


def _deficit_grids(ig: _IntGame, xl, yl, K: int, scale: int):
    """Scaled per-player deficits at all lattice-point pairs of each box."""
    a1, a2, dtype = ig.arrays(K * scale)
    X, vx = _block_points(xl, K, scale, ig.m - 1)
    Y, vy = _block_points(yl, K, scale, ig.n - 1)
    X = X.astype(dtype)
    Y = Y.astype(dtype)
    lev = K * scale
    u1 = Y @ a1.T  # (B, Q, m): level * (M1 y)_i
    u2 = X @ a2  # (B, P, n): level * (x'M2)_j
    v1 = np.einsum("bpi,bqi->bpq", X, u1)
    v2 = np.einsum("bpj,bqj->bpq", u2, Y)
    d1 = lev * u1.max(axis=2)[:, None, :] - v1
    d2 = lev * u2.max(axis=2)[:, :, None] - v2
    mask = vx[:, :, None] & vy[:, None, :]
    return d1, d2, mask, lev, u1, u2, v1, v2


def _certify(ig: _IntGame, xl: np.ndarray, yl: np.ndarray, K: int):
    """(member, excluded) certificates for a batch of boxes at level ``K``."""
    member = np.zeros(len(xl), dtype=bool)
    excluded = np.zeros(len(xl), dtype=bool)
    for start in range(0, len(xl), _CHUNK):
        sl = slice(start, start + _CHUNK)
        d1, d2, mask, lev, *_ = _deficit_grids(ig, xl[sl], yl[sl], K, 2)
        bound = lev * lev * ig.e
        member[sl] = np.any(mask & (d1 <= bound) & (d2 <= bound), axis=(1, 2))
        _, _, mask, lev, u1, u2, v1, v2 = _deficit_grids(ig, xl[sl], yl[sl], K, 1)
        g1 = lev * u1[:, None, :, :] - v1[:, :, :, None]  # (B,P,Q,m)
        g2 = lev * u2[:, :, None, :] - v2[:, :, :, None]  # (B,P,Q,n)
        lam = _LAMBDAS.astype(g1.dtype)
        f = (
            g1[:, :, :, :, None, None] * lam
            + g2[:, :, :, None, :, None] * (4 - lam)
        )  # (B,P,Q,m,n,5)
        big = np.iinfo(np.int64).max // 4 if f.dtype != object else 10**100
        f = np.where(mask[:, :, :, None, None, None], f, big)
        lower = f.min(axis=(1, 2)).max(axis=(1, 2, 3))
        excluded[sl] = (lower > 4 * lev * lev * ig.e) & ~member[sl]
    return member, excluded


# ---------------------------------------------------------------------------
# exact decision for a single box


def _reduced_halfspaces_label(mat, k: int, player: int):
    """Half-spaces (reduced coordinates) where strategy ``k`` is a best response.

    For ``player`` 2 the variable is x and ``mat`` is payoff2 (columns compared);
    for ``player`` 1 the variable is y and ``mat`` is payoff1 (rows compared).
    """
    if player == 2:
        vecs = [[mat[a][j] for a in range(len(mat))] for j in range(len(mat[0]))]
    else:
        vecs = [list(row) for row in mat]
    own = vecs[k]
    rows, rhs = [], []
    last = len(own) - 1
    for kk, other in enumerate(vecs):
        if kk == k:
            continue
        # other . v - own . v <= 0 with v = (z, 1 - sum z)
        rows.append([(other[a] - other[last]) - (own[a] - own[last]) for a in range(last)])
        rhs.append(-(other[last] - own[last]))
    return rows, rhs


def _box_halfspaces(lo: Sequence[Fraction], hi: Sequence[Fraction]):
    r = len(lo)
    rows, rhs = [], []
    for a in range(r):
        e = [Fraction(0)] * r
        e[a] = Fraction(1)
        rows.append(e)
        rhs.append(hi[a])
        rows.append([-v for v in e])
        rhs.append(-lo[a])
    rows.append([Fraction(1)] * r)
    rhs.append(Fraction(1))
    return rows, rhs


def _lift(z: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(z) + (1 - sum(z, Fraction(0)),)


def _sgn(v) -> int:
    if isinstance(v, QuadraticSurd):
        return v.sign()
    return (v > 0) - (v < 0)


def _linear_roots(c0, c1):
    if c1 == 0:
        return []
    t = -c0 / c1
    return [t] if 0 <= t <= 1 else []


def _quadratic_roots(c0, c1, c2):
    if c2 == 0:
        return _linear_roots(c0, c1)
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    num, den = disc.numerator, disc.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    out = []
    if rn * rn == num and rd * rd == den:
        root = Fraction(rn, rd)
        for sgn in (1, -1):
            t = (-c1 + sgn * root) / (2 * c2)
            if 0 <= t <= 1:
                out.append(t)
        return out
    for sgn in (1, -1):
        t = QuadraticSurd(-c1 / (2 * c2), Fraction(sgn) / (2 * c2), disc)
        if t.sign() >= 0 and (1 - t).sign() >= 0:
            out.append(t)
    return out


def _s_feasible(cons) -> bool:
    """Is there ``s`` in [0, 1] with ``p + q s >= 0`` for every ``(p, q)`` in ``cons``?"""
    lows = [(Fraction(0), Fraction(1))]
    highs = [(Fraction(1), Fraction(1))]
    for p, q in cons:
        sq = _sgn(q)
        if sq == 0:
            if _sgn(p) < 0:
                return False
        elif sq > 0:
            lows.append((-p, q))
        else:
            highs.append((p, -q))
    for a, b in lows:
        for c, d in highs:
            # a/b <= c/d with b, d > 0
            if _sgn(c * b - a * d) < 0:
                return False
    return True


def _segment_pair_feasible(c1, c2) -> bool:
    """Does some (t, s) in [0,1]^2 make both bilinear interpolants nonnegative?

    ``c1`` and ``c2`` are corner values ``(c00, c10, c01, c11)``, first index ``t``.
    Feasibility in ``t`` can only switch where a bound changes type or two bounds
    cross, so testing those critical values plus the endpoints is complete.
    """
    for a, b in zip(c1, c2):
        if a >= 0 and b >= 0:
            return True
    if max(c1) < 0 or max(c2) < 0:
        return False
    lin = []
    for c00, c10, c01, c11 in (c1, c2):
        p = (c00, c10 - c00)
        q = (c01 - c00, (c11 - c10) - (c01 - c00))
        lin.append((p, q))
    (p1, q1), (p2, q2) = lin
    crit: list = [Fraction(0), Fraction(1)]
    for p, q in lin:
        crit += _linear_roots(*q) + _linear_roots(*p) + _linear_roots(p[0] + q[0], p[1] + q[1])
    r0 = p1[0] * q2[0] - p2[0] * q1[0]
    r1 = p1[0] * q2[1] + p1[1] * q2[0] - p2[0] * q1[1] - p2[1] * q1[0]
    r2 = p1[1] * q2[1] - p2[1] * q1[1]
    if r0 or r1 or r2:
        crit += _quadratic_roots(r0, r1, r2)
    for t in crit:
        cons = [(p[0] + p[1] * t, q[0] + q[1] * t) for p, q in lin]
        if _s_feasible(cons):
            return True
    return False


def _segments(verts):
    if len(verts) == 1:
        return [(verts[0], verts[0])]
    return list(itertools.combinations(verts, 2))


def _box_feasible_exact(g: BimatrixGame, eps: Fraction, xlo, xhi, ylo, yhi) -> bool:
    """Exact test whether the box (reduced coordinates) meets NE_eps.

    On each label piece the conditions are two bilinear inequalities.  If the
    piece's product of polytopes contains a solution, one lies on a product of
    two vertex segments (a planar convex set meeting a quadrant has an edge of
    a spanning triangle meeting it), which :func:`_segment_pair_feasible` decides.
    """
    m1, m2 = g.payoff1, g.payoff2
    bx, bxr = _box_halfspaces(xlo, xhi)
    by, byr = _box_halfspaces(ylo, yhi)
    xs = []
    for j in range(g.n):
        rows, rhs = _reduced_halfspaces_label(m2, j, 2)
        verts = polytope_vertices(bx + rows, bxr + rhs) if g.m > 1 else [()]
        xs.append([_lift(v) for v in verts])
    ys = []
    for i in range(g.m):
        rows, rhs = _reduced_halfspaces_label(m1, i, 1)
        verts = polytope_vertices(by + rows, byr + rhs) if g.n > 1 else [()]
        ys.append([_lift(v) for v in verts])

    def g1(x, y, i):
        u = [sum(m1[a][b] * y[b] for b in range(g.n)) for a in range(g.m)]
        return sum(x[a] * u[a] for a in range(g.m)) - u[i] + eps

    def g2(x, y, j):
        w = [sum(x[a] * m2[a][b] for a in range(g.m)) for b in range(g.n)]
        return sum(w[b] * y[b] for b in range(g.n)) - w[j] + eps

    for i in range(g.m):
        if not ys[i]:
            continue
        for j in range(g.n):
            if not xs[j]:
                continue
            for u, v in _segments(xs[j]):
                for w, z in _segments(ys[i]):
                    c1 = (g1(u, w, i), g1(v, w, i), g1(u, z, i), g1(v, z, i))
                    c2 = (g2(u, w, j), g2(v, w, j), g2(u, z, j), g2(v, z, j))
                    if _segment_pair_feasible(c1, c2):
                        return True
    return False


# ---------------------------------------------------------------------------
# exact Nash set as a union of polytope products


def _support_sets(size: int):
    for r in range(1, size + 1):
        yield from itertools.combinations(range(size), r)


def _piece_halfspaces(mat, support, labels, player: int, dim: int):
    """Reduced-coordinate description of {z : supp within ``support``, ``labels`` best responses}."""
    rows, rhs = [], []
    full = dim + 1
    for a in range(full):
        if a in support:
            continue
        if a < dim:
            e = [Fraction(0)] * dim
            e[a] = Fraction(1)
            rows += [e, [-v for v in e]]
            rhs += [Fraction(0), Fraction(0)]
        else:
            rows += [[Fraction(1)] * dim, [Fraction(-1)] * dim]
            rhs += [Fraction(1), Fraction(-1)]
    for k in labels:
        r, b = _reduced_halfspaces_label(mat, k, player)
        rows += r
        rhs += b
    for a in range(dim):
        e = [Fraction(0)] * dim
        e[a] = Fraction(-1)
        rows.append(e)
        rhs.append(Fraction(0))
    rows.append([Fraction(1)] * dim)
    rhs.append(Fraction(1))
    return rows, rhs


@dataclass
class _NashPieces:
    """NE(g) as the union over support pairs (I, J) of X(I,J) x Y(I,J)."""

    g: BimatrixGame
    x_pieces: list
    y_pieces: list
    pairs: list
    _xcache: dict = field(default_factory=dict)
    _ycache: dict = field(default_factory=dict)

    @classmethod
    def build(cls, g: BimatrixGame) -> "_NashPieces":
        xp, yp, pairs = [], [], []
        xindex, yindex = {}, {}
        for I in _support_sets(g.m):
            for J in _support_sets(g.n):
                xr, xb = _piece_halfspaces(g.payoff2, I, J, 2, g.m - 1)
                yr, yb = _piece_halfspaces(g.payoff1, J, I, 1, g.n - 1)
                if not (fm_feasible(xr, xb) and fm_feasible(yr, yb)):
                    continue
                xkey = tuple(polytope_vertices(xr, xb)) if g.m > 1 else ((),)
                ykey = tuple(polytope_vertices(yr, yb)) if g.n > 1 else ((),)
                if xkey not in xindex:
                    xindex[xkey] = len(xp)
                    xp.append((xr, xb, xkey))
                if ykey not in yindex:
                    yindex[ykey] = len(yp)
                    yp.append((yr, yb, ykey))
                pair = (xindex[xkey], yindex[ykey])
                if pair not in pairs:
                    pairs.append(pair)
        return cls(g, xp, yp, pairs)

    @staticmethod
    def _meets(piece, lo, hi) -> bool:
        rows, rhs, verts = piece
        if not lo:
            return True
        for a in range(len(lo)):
            if max(v[a] for v in verts) < lo[a] or min(v[a] for v in verts) > hi[a]:
                return False
        br, bb = _box_halfspaces(lo, hi)
        return fm_feasible(rows + br, rhs + bb)

    def _table(self, cache, pieces, lower: tuple, K: int):
        key = (lower, K)
        if key not in cache:
            lo = tuple(Fraction(v, K) for v in lower)
            hi = tuple(Fraction(v + 1, K) for v in lower)
            cache[key] = frozenset(p for p, piece in enumerate(pieces) if self._meets(piece, lo, hi))
        return cache[key]

    def cell_member(self, cell: Cell, K: int) -> bool:
        r = self.g.m - 1
        xs = self._table(self._xcache, self.x_pieces, tuple(cell[:r]), K)
        if not xs:
            return False
        ys = self._table(self._ycache, self.y_pieces, tuple(cell[r:]), K)
        return any(a in xs and b in ys for a, b in self.pairs)


# ---------------------------------------------------------------------------
# regions


@dataclass
class EpsNashRegion:
    grid: CubicalGrid
    eps_raw: Fraction
    member_cells: tuple[Cell, ...]
    mode: str
    game: BimatrixGame | None = None
    stats: dict = field(default_factory=dict)

    @property
    def member_count(self) -> int:
        return len(self.member_cells)

    @property
    def k(self) -> int:
        return self.grid.k[0]

    def centers(self) -> np.ndarray:
        return self.grid.centers(self.member_cells)

    def report(self, betti: BettiProfile | None = None) -> dict:
        out = {
            "eps_raw": str(self.eps_raw),
            "eps_normalized": str(raw_to_normalized(self.game, self.eps_raw)) if self.game else None,
            "k": self.k,
            "mode": self.mode,
            "member_count": self.member_count,
        }
        if betti is not None:
            out["betti"] = list(betti.betti)
        return out

    def to_json(self, betti: BettiProfile | None = None) -> str:
        return json.dumps(self.report(betti))


def _active_boxes(m: int, n: int, k: int):
    grid = simplex_product_grid([m - 1, n - 1], k)
    cells = np.array(grid.active, dtype=np.int64).reshape(len(grid), m + n - 2)
    return grid, cells


def _children(boxes: np.ndarray, parents: np.ndarray, m: int, K: int):
    """Sub-boxes at level ``2K`` that still meet the simplex product."""
    d = boxes.shape[1]
    offs = np.array(list(itertools.product((0, 1), repeat=d)), dtype=np.int64)
    kids = (2 * boxes[:, None, :] + offs[None, :, :]).reshape(-1, d)
    owner = np.repeat(parents, len(offs))
    r = m - 1
    ok = (kids[:, :r].sum(axis=1) <= 2 * K) & (kids[:, r:].sum(axis=1) <= 2 * K)
    return kids[ok], owner[ok]


def _classify_exact(g: BimatrixGame, eps: Fraction, cells: np.ndarray, k: int, depth: int, stats: dict):
    ig = _IntGame.build(g, eps)
    r = g.m - 1
    member, excluded = _certify(ig, cells[:, :r], cells[:, r:], k)
    stats["certified_member"] = int(member.sum())
    stats["certified_excluded"] = int(excluded.sum())
    pending = np.flatnonzero(~member & ~excluded)
    stats["ambiguous"] = int(len(pending))
    boxes, owner, K = cells[pending], pending, k
    for _ in range(depth):
        if len(boxes) == 0:
            break
        boxes, owner = _children(boxes, owner, g.m, K)
        K *= 2
        keep = ~member[owner]
        boxes, owner = boxes[keep], owner[keep]
        cm, ce = _certify(ig, boxes[:, :r], boxes[:, r:], K)
        member[owner[cm]] = True
        still = ~cm & ~ce & ~member[owner]
        boxes, owner = boxes[still], owner[still]
    leaves = 0
    for box, own in zip(boxes, owner):
        if member[own]:
            continue
        leaves += 1
        lo = [Fraction(int(v), K) for v in box]
        hi = [Fraction(int(v) + 1, K) for v in box]
        if _box_feasible_exact(g, eps, lo[:r], hi[:r], lo[r:], hi[r:]):
            member[own] = True
    stats["exact_leaves"] = leaves
    return member


def _classify_vertex(g: BimatrixGame, eps: Fraction, cells: np.ndarray, k: int):
    ig = _IntGame.build(g, eps)
    r = g.m - 1
    out = np.zeros(len(cells), dtype=bool)
    for start in range(0, len(cells), _CHUNK):
        sl = slice(start, start + _CHUNK)
        d1, d2, mask, lev, *_ = _deficit_grids(ig, cells[sl, :r], cells[sl, r:], k, 1)
        bound = lev * lev * ig.e
        out[sl] = np.any(mask & (d1 <= bound) & (d2 <= bound), axis=(1, 2))
    return out


def _classify_center(g: BimatrixGame, eps: Fraction, cells: np.ndarray, k: int):
    a1, a2 = g.as_float()
    r = g.m - 1
    z = (cells + 0.5) / k
    x = np.hstack([z[:, :r], 1 - z[:, :r].sum(axis=1, keepdims=True)])
    y = np.hstack([z[:, r:], 1 - z[:, r:].sum(axis=1, keepdims=True)])
    inside = (x[:, -1] >= 0) & (y[:, -1] >= 0)
    u1, u2 = y @ a1.T, x @ a2
    d1 = u1.max(axis=1) - np.einsum("ki,ki->k", x, u1)
    d2 = u2.max(axis=1) - np.einsum("kj,kj->k", y, u2)
    return inside & (np.maximum(d1, d2) <= float(eps) + 1e-12)


def eps_nash_region(
    g: BimatrixGame, eps_raw, k: int = 24, mode: str = "exact", depth: int = 3
) -> EpsNashRegion:
    """Cells of the ``k``-per-axis grid meeting ``NE_eps_raw``.

    ``depth`` bounds the subdivision levels used before the exact leaf test in
    exact mode.  With ``eps_raw = 0`` exact mode uses the Nash set's polytope
    decomposition directly.
    """
    eps = to_fraction(eps_raw)
    if eps < 0:
        raise ValueError("eps_raw must be nonnegative")
    if k < 2:
        raise ValueError("k must be at least 2")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    grid, cells = _active_boxes(g.m, g.n, k)
    stats: dict = {"active": len(grid)}
    if mode == "exact" and eps == 0:
        pieces = _NashPieces.build(g)
        member = np.array([pieces.cell_member(tuple(c), k) for c in grid.active])
    elif mode == "exact":
        member = _classify_exact(g, eps, cells, k, depth, stats)
    elif mode == "vertex":
        member = _classify_vertex(g, eps, cells, k)
    else:
        member = _classify_center(g, eps, cells, k)
    chosen = tuple(grid.active[i] for i in np.flatnonzero(member))
    return EpsNashRegion(grid, eps, chosen, mode, g, stats)


def cell_member_exact(g: BimatrixGame, eps_raw, cell: Cell, k: int) -> bool:
    """Single-cell exact decision without certificates; the independent path used by tests."""
    eps = to_fraction(eps_raw)
    r = g.m - 1
    lo = [Fraction(v, k) for v in cell]
    hi = [Fraction(v + 1, k) for v in cell]
    return _box_feasible_exact(g, eps, lo[:r], hi[:r], lo[r:], hi[r:])


def region_homology(r: EpsNashRegion) -> BettiProfile:
    if not r.member_cells:
        raise RegionError("empty member set")
    return homology(complex_from_cells(r.grid, r.member_cells))


def transition_bisect(
    g: BimatrixGame, lo_normalized, hi_normalized, k: int = 24, width=Fraction(1, 100), mode: str = "exact"
) -> dict:
    """Bracket the smallest normalized eps at which b_1 of the region vanishes.

    Requires b_1 > 0 at the lower end and b_1 = 0 at the upper end; bisects on
    rationals until the bracket is no wider than ``width``.
    """
    lo, hi = to_fraction(lo_normalized), to_fraction(hi_normalized)
    width = to_fraction(width)
    history = []

    def b1(e):
        reg = eps_nash_region(g, normalized_to_raw(g, e), k, mode)
        betti = region_homology(reg).betti
        history.append({"eps_normalized": str(e), "member_count": reg.member_count, "betti": list(betti)})
        return betti[1] if len(betti) > 1 else 0

    if b1(lo) == 0 or b1(hi) != 0:
        return {"bracket": None, "history": history}
    while hi - lo > width:
        mid = (lo + hi) / 2
        if b1(mid) == 0:
            hi = mid
        else:
            lo = mid
    return {"bracket": [str(lo), str(hi)], "bracket_float": [float(lo), float(hi)], "history": history}


# ---------------------------------------------------------------------------
# best-response polytopes


@dataclass(frozen=True)
class PolytopeRegion:
    """``P^{ij}``: profiles where row ``i`` and column ``j`` (1-based) are best responses.

    ``a z <= b`` in reduced coordinates ``z = (x_1..x_{m-1}, y_1..y_{n-1})``.
    """

    i: int
    j: int
    a: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]

    def contains(self, z: Sequence) -> bool:
        z = [to_fraction(v) for v in z]
        return all(sum(c * v for c, v in zip(row, z)) <= rhs for row, rhs in zip(self.a, self.b))

    def is_empty(self) -> bool:
        return not fm_feasible(self.a, self.b)


def polytope_decomposition(g: BimatrixGame) -> list[PolytopeRegion]:
    rx, ry = g.m - 1, g.n - 1
    out = []
    for i in range(g.m):
        yrows, yrhs = _piece_halfspaces(g.payoff1, tuple(range(g.n)), (i,), 1, ry)
        for j in range(g.n):
            xrows, xrhs = _piece_halfspaces(g.payoff2, tuple(range(g.m)), (j,), 2, rx)
            rows = [tuple(r) + (Fraction(0),) * ry for r in xrows] + [(Fraction(0),) * rx + tuple(r) for r in yrows]
            out.append(PolytopeRegion(i + 1, j + 1, tuple(rows), tuple(xrhs + yrhs)))
    return out


def region_membership(g: BimatrixGame, p: MixedProfile) -> set[tuple[int, int]]:
    rows = best_responses(g, p, 1)
    cols = best_responses(g, p, 2)
    return {(i + 1, j + 1) for i in rows for j in cols}


# ---------------------------------------------------------------------------
# Nash components


@dataclass
class NashComponents:
    k: int
    cells: tuple[Cell, ...]
    centers: np.ndarray
    adjacency: list[tuple[int, int]]
    grid: CubicalGrid

    @property
    def cluster_count(self) -> int:
        return cluster_labels(len(self.cells), self.adjacency)[0]

    def homology(self) -> BettiProfile:
        return homology(complex_from_cells(self.grid, self.cells))


def cell_adjacency(cells: Sequence[Cell]) -> list[tuple[int, int]]:
    """Pairs of cells whose closed boxes touch (Chebyshev index distance 1)."""
    where = {tuple(c): i for i, c in enumerate(cells)}
    d = len(cells[0]) if cells else 0
    offs = [o for o in itertools.product((-1, 0, 1), repeat=d) if o > (0,) * d]
    pairs = []
    for i, c in enumerate(cells):
        for o in offs:
            j = where.get(tuple(a + b for a, b in zip(c, o)))
            if j is not None:
                pairs.append((min(i, j), max(i, j)))
    return sorted(pairs)


def cluster_labels(count: int, pairs: Sequence[tuple[int, int]]):
    if count == 0:
        return 0, np.zeros(0, dtype=int)
    a = np.array([p[0] for p in pairs], dtype=np.int64)
    b = np.array([p[1] for p in pairs], dtype=np.int64)
    mat = coo_matrix((np.ones(len(a)), (a, b)), shape=(count, count))
    return connected_components(mat, directed=False)


def nash_component_extract(g: BimatrixGame, k: int = 8, depth: int = 2) -> NashComponents:
    """Cells meeting NE(g) at resolution ``k * 2**depth``, found by adaptive refinement."""
    if k < 8 or depth < 0:
        raise ValueError("need k >= 8 and depth >= 0")
    pieces = _NashPieces.build(g)
    grid0, _ = _active_boxes(g.m, g.n, k)
    kept = [c for c in grid0.active if pieces.cell_member(c, k)]
    K = k
    d = g.m + g.n - 2
    offs = list(itertools.product((0, 1), repeat=d))
    r = g.m - 1
    for _ in range(depth):
        K *= 2
        nxt = []
        for c in kept:
            for o in offs:
                kid = tuple(2 * a + b for a, b in zip(c, o))
                if sum(kid[:r]) <= K and sum(kid[r:]) <= K and pieces.cell_member(kid, K):
                    nxt.append(kid)
        kept = sorted(set(nxt))
    if not kept:
        raise RegionError("no cell retained")
    grid = CubicalGrid((0,) * d, (1,) * d, (K,) * d, tuple(kept))
    cells = grid.active
    return NashComponents(K, cells, grid.centers(cells), cell_adjacency(cells), grid)


# ---------------------------------------------------------------------------
# exports


def project_3d(r: EpsNashRegion | np.ndarray, direction: Sequence[float]) -> np.ndarray:
    """Coordinates of the points in an orthonormal basis of the hyperplane normal to ``direction``.

    The basis comes from Gram-Schmidt on the standard basis, so projecting along
    an axis simply drops that coordinate.
    """
    u = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    u = u / norm
    pts = r.centers() if isinstance(r, EpsNashRegion) else np.asarray(r, dtype=float)
    basis = []
    for e in np.eye(len(u)):
        v = e - (e @ u) * u
        for b in basis:
            v -= (v @ b) * b
        if np.linalg.norm(v) > 1e-9:
            basis.append(v / np.linalg.norm(v))
    return pts @ np.array(basis[: len(u) - 1]).T


def write_points_csv(path, points: np.ndarray, header: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for p in np.atleast_2d(points):
            w.writerow([repr(float(v)) for v in p])


def slices(r: EpsNashRegion, axis: int = 3) -> dict[int, np.ndarray]:
    """Member-cell centers grouped by their index along ``axis`` (3-d slices of the 4-d region)."""
    out: dict[int, list] = {}
    for c, ctr in zip(r.member_cells, r.centers()):
        out.setdefault(c[axis], []).append(np.delete(ctr, axis))
    return {key: np.array(v) for key, v in sorted(out.items())}
