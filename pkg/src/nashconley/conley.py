"""Combinatorial Conley theory on uniform cubical grids.

A :class:`CubicalGrid` discretizes a box; :func:`build_transition_graph`
outer-approximates the time-``tau`` map of a vector field on the active cells;
:func:`morse_graph` condenses the graph into strongly connected components,
the recurrent ones standing in for chain recurrent components.  Attractors are
forward-closed cell sets, and index pairs are built from the attractor lattice:
for a Morse set ``S`` the pair is ``N = forward closure of S`` and ``L = N - S``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .dynamics import VectorField, integrate_batch

Cell = tuple[int, ...]
OUT = -1  # sink node id for images leaving the domain


class GridError(ValueError):
    pass


class IsolationError(ValueError):
    def __init__(self, message: str, scc: int | None = None):
        super().__init__(message)
        self.scc = scc


@dataclass
class CubicalGrid:
    lower: tuple[Fraction, ...]
    upper: tuple[Fraction, ...]
    k: tuple[int, ...]
    active: tuple[Cell, ...]
    _position: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.lower = tuple(Fraction(v) for v in self.lower)
        self.upper = tuple(Fraction(v) for v in self.upper)
        self.k = tuple(int(v) for v in self.k)
        self.active = tuple(sorted(tuple(int(i) for i in c) for c in self.active))
        if not self.active:
            raise GridError("grid has no active cells")
        self._position = {c: p for p, c in enumerate(self.active)}

    @property
    def dim(self) -> int:
        return len(self.k)

    def __len__(self) -> int:
        return len(self.active)

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self._position

    def position(self, cell: Cell) -> int:
        return self._position[tuple(cell)]

    @property
    def width(self) -> np.ndarray:
        return np.array([float((u - l) / k) for l, u, k in zip(self.lower, self.upper, self.k)])

    @property
    def lower_f(self) -> np.ndarray:
        return np.array([float(v) for v in self.lower])

    def cell_box(self, cell: Cell) -> tuple[np.ndarray, np.ndarray]:
        lo = self.lower_f + np.asarray(cell) * self.width
        return lo, lo + self.width

    def cell_box_exact(self, cell: Cell) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
        lo = tuple(l + i * (u - l) / k for l, u, k, i in zip(self.lower, self.upper, self.k, cell))
        hi = tuple(l + (i + 1) * (u - l) / k for l, u, k, i in zip(self.lower, self.upper, self.k, cell))
        return lo, hi

    def centers(self, cells: Iterable[Cell] | None = None) -> np.ndarray:
        idx = np.array(list(self.active if cells is None else cells), dtype=float)
        if idx.size == 0:
            return np.zeros((0, self.dim))
        return self.lower_f + (idx + 0.5) * self.width

    def cell_volume(self) -> float:
        return float(np.prod(self.width))

    def diameter(self) -> float:
        return float(np.linalg.norm(self.width))

    def refine(self, factor: int = 2) -> "CubicalGrid":
        """Same box, ``factor`` times finer; children of active cells stay active."""
        kids = set()
        for c in self.active:
            for off in itertools.product(range(factor), repeat=self.dim):
                kids.add(tuple(factor * i + o for i, o in zip(c, off)))
        return CubicalGrid(self.lower, self.upper, tuple(factor * v for v in self.k), tuple(kids))


def simplex_product_test(blocks: Sequence[int]) -> Callable:
    """Exact closed-box test against a product of simplices in reduced coordinates.

    ``blocks`` lists the reduced dimension of each factor; a factor of reduced
    dimension ``r`` is ``{z in R^r : z >= 0, sum z <= 1}``.
    """

    def test(lo, hi) -> bool:
        start = 0
        for r in blocks:
            l, h = lo[start : start + r], hi[start : start + r]
            if any(v < 0 for v in h):
                return False
            if sum(max(v, 0) for v in l) > 1:
                return False
            start += r
        return True

    return test


def build_grid(bounds, k, polytope_test: Callable | None = None) -> CubicalGrid:
    """Uniform grid on ``bounds = [(lo, hi), ...]`` with ``k`` cells per axis.

    A cell is active when its closed box meets the region accepted by
    ``polytope_test(lo, hi)`` (exact rationals); ``None`` accepts every box.
    """
    bounds = [(Fraction(lo), Fraction(hi)) for lo, hi in bounds]
    d = len(bounds)
    ks = (int(k),) * d if np.isscalar(k) else tuple(int(v) for v in k)
    if len(ks) != d or any(v < 1 for v in ks):
        raise GridError(f"invalid subdivisions {k!r}")
    active = []
    widths = [(hi - lo) / kk for (lo, hi), kk in zip(bounds, ks)]
    for cell in itertools.product(*(range(kk) for kk in ks)):
        lo = tuple(b[0] + i * w for b, i, w in zip(bounds, cell, widths))
        hi = tuple(l + w for l, w in zip(lo, widths))
        if polytope_test is None or polytope_test(lo, hi):
            active.append(cell)
    if not active:
        raise GridError("no cell meets the region")
    return CubicalGrid(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds), ks, tuple(active))


def _simplex_cells(r: int, k: int) -> list[Cell]:
    """Cells of the k-grid on [0,1]^r whose closed box meets the reduced simplex."""
    return [c for c in itertools.product(range(k), repeat=r) if sum(c) <= k]


def simplex_product_grid(blocks: Sequence[int], k: int) -> CubicalGrid:
    """Fast path of :func:`build_grid` for products of reduced simplices on the unit cube."""
    per_block = [_simplex_cells(r, k) for r in blocks]
    active = [tuple(itertools.chain.from_iterable(parts)) for parts in itertools.product(*per_block)]
    d = sum(blocks)
    return CubicalGrid((0,) * d, (1,) * d, (k,) * d, tuple(active))


def _sample_offsets(d: int, s: int, seed: int) -> np.ndarray:
    """Unit-cube sample pattern: corners, center, then ``s - 1`` Latin-hypercube points."""
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    pts = [corners, np.full((1, d), 0.5)]
    extra = s - 1
    if extra > 0:
        rng = np.random.Generator(np.random.Philox(seed))
        lhs = np.empty((extra, d))
        for axis in range(d):
            lhs[:, axis] = (rng.permutation(extra) + rng.random(extra)) / extra
        pts.append(lhs)
    return np.vstack(pts)


@dataclass
class TransitionGraph:
    """Directed graph on the active cells of ``grid``; node ``len(grid)`` is the out-of-domain sink."""

    grid: CubicalGrid
    src: np.ndarray
    dst: np.ndarray
    tau: float
    rho: float
    s: int
    field_name: str = ""

    @property
    def n_nodes(self) -> int:
        return len(self.grid)

    @property
    def sink(self) -> int:
        return len(self.grid)

    def matrix(self, include_sink: bool = False) -> sparse.csr_matrix:
        size = self.n_nodes + 1
        mat = sparse.csr_matrix((np.ones(len(self.src), dtype=np.int8), (self.src, self.dst)), shape=(size, size))
        if include_sink:
            return mat
        return mat[: self.n_nodes, : self.n_nodes]

    def successors(self, node: int) -> np.ndarray:
        mat = self._csr()
        return mat.indices[mat.indptr[node] : mat.indptr[node + 1]]

    def _csr(self):
        if not hasattr(self, "_cache"):
            self._cache = self.matrix(include_sink=True).tocsr()
            self._cache.sort_indices()
        return self._cache

    def edges(self) -> list[tuple[int, int]]:
        return sorted(set(zip(self.src.tolist(), self.dst.tolist())))

    def has_edge(self, u: int, v: int) -> bool:
        return v in set(self.successors(u).tolist())

    def leaks(self, nodes) -> set[int]:
        """Nodes among ``nodes`` with an edge into the sink."""
        return {u for u in nodes if self.sink in set(self.successors(u).tolist())}

    def forward_closure(self, nodes: Iterable[int]) -> frozenset[int]:
        mat = self._csr()
        seen = set(int(v) for v in nodes)
        stack = list(seen)
        while stack:
            u = stack.pop()
            for v in mat.indices[mat.indptr[u] : mat.indptr[u + 1]]:
                v = int(v)
                if v != self.sink and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return frozenset(seen)

    def backward_closure(self, nodes: Iterable[int]) -> frozenset[int]:
        mat = self.matrix().T.tocsr()
        seen = set(int(v) for v in nodes)
        stack = list(seen)
        while stack:
            u = stack.pop()
            for v in mat.indices[mat.indptr[u] : mat.indptr[u + 1]]:
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return frozenset(seen)

    def to_csv(self, path) -> None:
        """Edge list with node ids indexing ``grid.active``; the sink is written as ``-1``."""
        with open(path, "w") as fh:
            fh.write("src,dst\n")
            for u, v in self.edges():
                fh.write(f"{u},{OUT if v == self.sink else v}\n")


def _cover_ranges(lo: np.ndarray, hi: np.ndarray, grid: CubicalGrid):
    """Index ranges of cells whose box meets ``[lo, hi]``, and whether it pokes out of the grid.

    On axes where the box has positive width only cells whose open interior
    meets it count; on degenerate axes closed containment is used.  Values within
    ``1e-9`` of a grid line are snapped onto it.
    """
    w = grid.width
    a = (lo - grid.lower_f) / w
    b = (hi - grid.lower_f) / w
    ra, rb = np.round(a), np.round(b)
    a = np.where(np.abs(a - ra) < 1e-9, ra, a)
    b = np.where(np.abs(b - rb) < 1e-9, rb, b)
    flat = a == b
    first = np.where(flat, np.ceil(a) - 1, np.floor(a))
    last = np.where(flat, np.floor(b), np.ceil(b) - 1)
    outside = bool(np.any(a < 0) or np.any(b > np.array(grid.k)))
    return first.astype(np.int64), last.astype(np.int64), outside


def build_transition_graph(
    f: VectorField,
    grid: CubicalGrid,
    tau: float = 0.5,
    rho: float = 0.0,
    s: int = 1,
    h: float = 1e-2,
    seed: int = 0,
    step_map: Callable | None = None,
) -> TransitionGraph:
    """Outer approximation of the time-``tau`` map of ``f`` on ``grid``.

    Grid coordinates are the field's reduced coordinates.  Every active cell is
    sampled (see :func:`_sample_offsets`), the samples are flowed for ``tau``, and
    the bounding box of their images, inflated by ``rho`` in the sup norm, is
    covered by cells.  Covering cells outside the grid box, inactive cells for
    fields without simplex blocks, and failed integrations produce an edge into
    the sink node.  For game fields the polytope is forward invariant, so
    inactive cells inside the box are simply not covered.  With ``step_map`` (a map
    on full states, e.g. one multiplicative-weights step) the image is one
    application of the map instead of the flow; ``f`` then only supplies the
    coordinate conventions.
    """
    if not tau > 0 or rho < 0 or s < 1:
        raise ValueError("need tau > 0, rho >= 0, s >= 1")
    if f.reduced_dimension != grid.dim:
        raise GridError("field and grid dimensions differ")
    d = grid.dim
    offsets = _sample_offsets(d, s, seed)
    per = len(offsets)
    cells = np.array(grid.active, dtype=float)
    w = grid.width
    pts = (grid.lower_f + cells[:, None, :] * w + offsets[None, :, :] * w).reshape(-1, d)
    if step_map is None:
        finals, ok = integrate_batch(f, f.lift(pts), tau, min(h, tau))
    else:
        with np.errstate(all="ignore"):
            finals = np.asarray(step_map(f.project(f.lift(pts))), dtype=float)
        ok = np.all(np.isfinite(finals), axis=1)
        finals = np.where(ok[:, None], finals, 0.0)
    images = f.reduce(finals).reshape(len(cells), per, d)
    ok = ok.reshape(len(cells), per).all(axis=1)
    lo = images.min(axis=1) - rho
    hi = images.max(axis=1) + rho
    src, dst = [], []
    sink = len(grid)
    for node in range(len(grid)):
        if not ok[node]:
            src.append(node)
            dst.append(sink)
            continue
        first, last, leaves = _cover_ranges(lo[node], hi[node], grid)
        clipped_first = np.maximum(first, 0)
        clipped_last = np.minimum(last, np.array(grid.k) - 1)
        for cell in itertools.product(*(range(a, b + 1) for a, b in zip(clipped_first, clipped_last))):
            pos = grid._position.get(cell)
            if pos is None:
                # the strategy polytope is forward invariant: inactive cells hold no true image
                leaves = leaves or f.blocks is None
            else:
                src.append(node)
                dst.append(pos)
        if leaves:
            src.append(node)
            dst.append(sink)
    return TransitionGraph(grid, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), tau, rho, s, f.name)


def suggested_rho(f: VectorField, grid: CubicalGrid, tau: float, e_loc: float = 1e-6) -> float:
    """Inflation radius making the outer approximation sound under the field's Lipschitz bound.

    Every point of a cell is within half a diagonal of a sample, and Gronwall
    stretches that distance by at most ``exp(L tau)``.
    """
    if f.lipschitz_bound is None:
        raise ValueError("field has no Lipschitz bound")
    return float(0.5 * grid.diameter() * np.exp(f.lipschitz_bound * tau) + e_loc)


@dataclass
class SCC:
    id: int
    nodes: tuple[int, ...]
    recurrent: bool


@dataclass
class MorseGraph:
    sccs: list[SCC]
    label: np.ndarray
    dag_edges: list[tuple[int, int]]
    _reach: dict = field(default_factory=dict, repr=False)

    @property
    def recurrent(self) -> list[SCC]:
        return [c for c in self.sccs if c.recurrent]

    @property
    def recurrent_cells(self) -> frozenset[int]:
        return frozenset(v for c in self.recurrent for v in c.nodes)

    def scc_of(self, node: int) -> int:
        return int(self.label[node])

    def descendants(self, scc: int) -> set[int]:
        if scc not in self._reach:
            succ: dict[int, list[int]] = {}
            for a, b in self.dag_edges:
                succ.setdefault(a, []).append(b)
            seen, stack = set(), [scc]
            while stack:
                u = stack.pop()
                for v in succ.get(u, ()):
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            self._reach[scc] = seen
        return self._reach[scc]

    def reaches(self, a: int, b: int) -> bool:
        return b in self.descendants(a)

    def morse_order(self) -> list[tuple[int, int]]:
        """Reachability pairs between recurrent SCCs."""
        rec = [c.id for c in self.recurrent]
        return [(a, b) for a in rec for b in rec if a != b and self.reaches(a, b)]

    def minimal(self) -> list[int]:
        """Recurrent SCCs that reach no other recurrent SCC (combinatorial attractors)."""
        rec = {c.id for c in self.recurrent}
        return [c for c in sorted(rec) if not (self.descendants(c) & rec)]

    def to_dict(self, grid: CubicalGrid | None = None) -> dict:
        def cells(c):
            return [list(grid.active[v]) for v in c.nodes] if grid is not None else list(c.nodes)

        return {
            "sccs": [{"id": c.id, "cells": cells(c), "recurrent": c.recurrent} for c in self.sccs],
            "edges": [list(e) for e in self.dag_edges],
        }

    def to_json(self, grid: CubicalGrid | None = None) -> str:
        return json.dumps(self.to_dict(grid))


def morse_graph(tg: TransitionGraph) -> MorseGraph:
    mat = tg.matrix()
    count, raw = csgraph.connected_components(mat, directed=True, connection="strong")
    # relabel components by their smallest node, which is the lexicographically smallest cell
    first = np.full(count, np.iinfo(np.int64).max)
    np.minimum.at(first, raw, np.arange(len(raw)))
    order = np.argsort(first, kind="stable")
    relabel = np.empty(count, dtype=np.int64)
    relabel[order] = np.arange(count)
    label = relabel[raw]
    keep = tg.dst != tg.sink
    s, d = tg.src[keep], tg.dst[keep]
    internal = label[s] == label[d]
    recurrent = np.zeros(count, dtype=bool)
    recurrent[label[s[internal]]] = True
    members: list[list[int]] = [[] for _ in range(count)]
    for node, lab in enumerate(label):
        members[lab].append(node)
    sccs = [SCC(i, tuple(members[i]), bool(recurrent[i])) for i in range(count)]
    dag = sorted(set(zip(label[s[~internal]].tolist(), label[d[~internal]].tolist())))
    return MorseGraph(sccs, label, dag)


def attractor_cells(mg: MorseGraph, tg: TransitionGraph, seed_scc) -> frozenset[int]:
    """Forward closure of one recurrent SCC (or an iterable of them)."""
    seeds = [seed_scc] if isinstance(seed_scc, (int, np.integer)) else list(seed_scc)
    nodes = []
    for sid in seeds:
        if not mg.sccs[sid].recurrent:
            raise ValueError(f"SCC {sid} is not recurrent")
        nodes.extend(mg.sccs[sid].nodes)
    return tg.forward_closure(nodes)


def is_forward_closed(tg: TransitionGraph, nodes) -> bool:
    nodes = set(nodes)
    return all(set(tg.successors(u).tolist()) <= nodes for u in nodes)


def dual_repeller_cells(tg: TransitionGraph, attractor) -> frozenset[int]:
    attractor = frozenset(int(v) for v in attractor)
    if not is_forward_closed(tg, attractor):
        raise ValueError("attractor cell set is not forward closed")
    reaching = tg.backward_closure(attractor)
    return frozenset(range(tg.n_nodes)) - reaching


@dataclass
class IndexPairCells:
    N: frozenset[int]
    L: frozenset[int]

    def check(self, tg: TransitionGraph) -> bool:
        if not self.L <= self.N:
            return False
        for u in self.L:
            for v in tg.successors(u).tolist():
                if v in self.N and v not in self.L:
                    return False
        for u in self.N - self.L:
            for v in tg.successors(u).tolist():
                if v not in self.N:
                    return False
        return True

    def complexes(self, grid: CubicalGrid):
        from .homology import complex_from_cells

        n = complex_from_cells(grid, [grid.active[v] for v in self.N])
        l = complex_from_cells(grid, [grid.active[v] for v in self.L]) if self.L else None
        return n, l


def _collar(grid: CubicalGrid, nodes) -> set[int]:
    out = set()
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=grid.dim) if any(o)]
    for u in nodes:
        c = grid.active[u]
        for o in offsets:
            pos = grid._position.get(tuple(a + b for a, b in zip(c, o)))
            if pos is not None:
                out.add(pos)
    return out - set(nodes)


def index_pair(tg: TransitionGraph, S, mg: MorseGraph | None = None) -> IndexPairCells:
    """Index pair from the attractor lattice: ``N`` is the forward closure of ``S``, ``L = N - S``.

    ``S`` must be a union of SCCs that is convex in the graph (no path leaves
    ``S`` and comes back), must not leak into the sink, and its one-cell collar
    may not contain cells of another recurrent SCC.
    """
    S = frozenset(int(v) for v in S)
    if not S:
        raise ValueError("empty Morse set")
    mg = morse_graph(tg) if mg is None else mg
    own = {mg.scc_of(v) for v in S}
    for lab in sorted(own):
        if not set(mg.sccs[lab].nodes) <= S:
            raise IsolationError(f"S cuts through SCC {lab}", lab)
    for u in sorted(_collar(tg.grid, S)):
        lab = mg.scc_of(u)
        if mg.sccs[lab].recurrent and lab not in own:
            raise IsolationError(f"recurrent SCC {lab} touches the collar of S", lab)
    if tg.leaks(S):
        raise IsolationError("S has images outside the domain")
    N = tg.forward_closure(S)
    L = N - S
    if tg.backward_closure(S) & L:
        raise IsolationError("S is not convex: a path leaves S and returns")
    pair = IndexPairCells(N, L)
    if not pair.check(tg):
        raise IsolationError("index pair invariants failed")
    return pair


def conley_index(tg: TransitionGraph, S, mg: MorseGraph | None = None):
    from .homology import relative_homology

    pair = index_pair(tg, S, mg)
    n, l = pair.complexes(tg.grid)
    return relative_homology(n, l)


def locate(grid: CubicalGrid, point) -> int | None:
    """Node of an active cell containing ``point`` (lowest index on shared boundaries)."""
    p = np.asarray(point, dtype=float)
    idx = np.floor((p - grid.lower_f) / grid.width).astype(int)
    idx = np.clip(idx, 0, np.array(grid.k) - 1)
    hits = []
    for o in itertools.product((0, -1), repeat=grid.dim):
        cell = tuple(int(a + b) for a, b in zip(idx, o))
        pos = grid._position.get(cell)
        if pos is not None:
            lo, hi = grid.cell_box(cell)
            if np.all(p >= lo - 1e-12) and np.all(p <= hi + 1e-12):
                hits.append(pos)
    return min(hits, default=None)


def epsilon_tau_chain_exists(tg_family: Sequence[TransitionGraph], x, y) -> bool:
    """True when the cell of ``y`` is reachable from the cell of ``x`` in every graph.

    ``x`` and ``y`` are points in grid coordinates, located afresh at every
    resolution.  A path of length at least one is required, so ``x == y`` needs a cycle.
    """
    for tg in tg_family:
        a, b = locate(tg.grid, x), locate(tg.grid, y)
        if a is None or b is None:
            return False
        starts = tg.successors(a).tolist()
        if b not in tg.forward_closure([v for v in starts if v != tg.sink]):
            return False
    return True


def recurrent_volume(mg: MorseGraph, grid: CubicalGrid) -> float:
    return len(mg.recurrent_cells) * grid.cell_volume()


def morse_sets(mg: MorseGraph, grid: CubicalGrid) -> list[frozenset[int]]:
    """Recurrent SCCs merged when their cells touch, as isolated Morse sets.

    SCCs that touch cannot be separated by an isolating neighborhood at this
    resolution, so they are reported together.  Sorted by smallest node.
    """
    rec = mg.recurrent
    parent = list(range(len(rec)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    where = {v: i for i, c in enumerate(rec) for v in c.nodes}
    for i, c in enumerate(rec):
        for u in _collar(grid, c.nodes):
            j = where.get(u)
            if j is not None:
                parent[find(i)] = find(j)
    groups: dict[int, set[int]] = {}
    for i, c in enumerate(rec):
        groups.setdefault(find(i), set()).update(c.nodes)
    return sorted((frozenset(g) for g in groups.values()), key=min)


def close_convex(tg: TransitionGraph, S) -> frozenset[int]:
    """Smallest superset of ``S`` containing every path that leaves and re-enters it."""
    S = frozenset(S)
    return S | (tg.forward_closure(S) & tg.backward_closure(S))
