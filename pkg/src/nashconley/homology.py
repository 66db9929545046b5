"""Cubical chain complexes over the integers and their (relative, reduced) homology.

Elementary cubes are stored in *doubled coordinates*: a tuple ``c`` whose entry
``c[i]`` is even for a degenerate interval ``[c[i]/2]`` and odd for the unit
interval ``[(c[i]-1)/2, (c[i]+1)/2]``.  The dimension of a cube is the number
of odd entries.

Homology is computed by first cancelling free pairs (a cell with exactly one
coface, or exactly one face, in the current quotient complex), which never
changes homology and needs no arithmetic, and then running a sparse Smith
normal form on whatever survives.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

Cube = tuple[int, ...]

#: above this many surviving cells only ranks modulo a large prime are computed
SNF_CELL_LIMIT = 50_000
_PRIME = 2_147_483_647


class ComplexError(ValueError):
    pass


def cube_dim(c: Cube) -> int:
    return sum(v & 1 for v in c)


def cube_boundary(c: Cube) -> list[tuple[Cube, int]]:
    """Signed faces of an elementary cube.

    ``d(I_1 x ... x I_d) = sum_i (-1)^{k_i} (I_1 x .. x dI_i x .. x I_d)`` where
    ``k_i`` counts the nondegenerate factors before position ``i`` and
    ``d[a, a+1] = [a+1] - [a]``.
    """
    out = []
    k = 0
    for i, v in enumerate(c):
        if v & 1:
            sign = -1 if k & 1 else 1
            lo = c[:i] + (v - 1,) + c[i + 1 :]
            hi = c[:i] + (v + 1,) + c[i + 1 :]
            out.append((hi, sign))
            out.append((lo, -sign))
            k += 1
    return out


def cube_closure(c: Cube) -> Iterable[Cube]:
    """All faces of ``c`` including itself."""
    choices = [(v - 1, v, v + 1) if v & 1 else (v,) for v in c]
    return itertools.product(*choices)


def top_cube(index: Iterable[int]) -> Cube:
    """Doubled coordinates of the full-dimensional cube with lower corner ``index``."""
    return tuple(2 * i + 1 for i in index)


@dataclass
class CubicalComplex:
    """A finite cubical complex closed under taking faces."""

    dim: int
    cells: dict[int, set[Cube]]

    @classmethod
    def from_cubes(cls, cubes: Iterable[Cube], dim: int | None = None) -> "CubicalComplex":
        cells: dict[int, set[Cube]] = {}
        ambient = dim
        for c in cubes:
            c = tuple(int(v) for v in c)
            if ambient is None:
                ambient = len(c)
            elif len(c) != ambient:
                raise ComplexError("cubes of different ambient dimension")
            for f in cube_closure(c):
                cells.setdefault(cube_dim(f), set()).add(f)
        ambient = 0 if ambient is None else ambient
        for q in range(ambient + 1):
            cells.setdefault(q, set())
        return cls(ambient, cells)

    @classmethod
    def from_top_cells(cls, indices: Iterable[Iterable[int]], dim: int | None = None):
        return cls.from_cubes((top_cube(i) for i in indices), dim)

    def __len__(self) -> int:
        return sum(len(s) for s in self.cells.values())

    def __contains__(self, c) -> bool:
        return tuple(c) in self.cells.get(cube_dim(tuple(c)), ())

    def counts(self) -> list[int]:
        return [len(self.cells.get(q, ())) for q in range(self.dim + 1)]

    def all_cells(self) -> set[Cube]:
        out: set[Cube] = set()
        for s in self.cells.values():
            out |= s
        return out

    def is_closed(self) -> bool:
        return all(f in self for c in self.all_cells() for f, _ in cube_boundary(c))

    def is_subcomplex_of(self, other: "CubicalComplex") -> bool:
        return self.dim == other.dim and all(
            s <= other.cells.get(q, set()) for q, s in self.cells.items()
        )

    def subdivide(self) -> "CubicalComplex":
        """Refine every unit interval into two (scales coordinates by 2)."""
        tops = []
        for c in self.all_cells():
            pieces = []
            for v in c:
                if v & 1:
                    lo = v - 1
                    pieces.append((2 * lo + 1, 2 * lo + 3))
                else:
                    pieces.append((2 * v,))
            tops.extend(itertools.product(*pieces))
        return CubicalComplex.from_cubes(tops, self.dim)

    def to_dict(self) -> dict:
        rows = []
        for c in sorted(self.all_cells()):
            mask = sum(1 << i for i, v in enumerate(c) if v & 1)
            rows.append({"coords": [v // 2 for v in c], "extent": mask})
        return {"dim": self.dim, "cells": rows}

    @classmethod
    def from_dict(cls, data: Mapping) -> "CubicalComplex":
        dim = int(data["dim"])
        cubes = []
        for row in data["cells"]:
            mask = int(row["extent"])
            cubes.append(tuple(2 * v + ((mask >> i) & 1) for i, v in enumerate(row["coords"])))
        return cls.from_cubes(cubes, dim)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CubicalComplex":
        return cls.from_dict(json.loads(text))


@dataclass
class ChainComplexMatrices:
    """Integer boundary matrices ``D_q : C_q -> C_{q-1}`` with fixed cell orderings."""

    bases: list[list[Cube]]
    boundaries: list[sparse.csr_matrix]  # boundaries[q] maps degree q to q-1; boundaries[0] is 0 x n0

    def check(self) -> bool:
        """Exact check of ``D_q D_{q+1} = 0`` for every q."""
        for q in range(1, len(self.boundaries) - 1):
            prod = self.boundaries[q] @ self.boundaries[q + 1]
            if prod.nnz and np.any(prod.data != 0):
                return False
        return True


def chain_complex(cx: CubicalComplex, sub: CubicalComplex | None = None) -> ChainComplexMatrices:
    """Boundary matrices of ``C(cx)`` or of the quotient ``C(cx)/C(sub)``."""
    excluded = sub.all_cells() if sub is not None else set()
    bases = [sorted(cx.cells.get(q, set()) - excluded) for q in range(cx.dim + 1)]
    index = [{c: k for k, c in enumerate(b)} for b in bases]
    mats = [sparse.csr_matrix((0, len(bases[0])), dtype=np.int64)]
    for q in range(1, cx.dim + 1):
        rows, cols, vals = [], [], []
        for j, c in enumerate(bases[q]):
            for f, s in cube_boundary(c):
                i = index[q - 1].get(f)
                if i is not None:
                    rows.append(i)
                    cols.append(j)
                    vals.append(s)
        mats.append(
            sparse.csr_matrix(
                (np.array(vals, dtype=np.int64), (rows, cols)),
                shape=(len(bases[q - 1]), len(bases[q])),
            )
        )
    mats.append(sparse.csr_matrix((len(bases[-1]), 0), dtype=np.int64))
    return ChainComplexMatrices(bases, mats)


@dataclass
class BettiProfile:
    betti: list[int]
    torsion: list[list[int]] = field(default_factory=list)
    exact: bool = True

    def __post_init__(self):
        if not self.torsion:
            self.torsion = [[] for _ in self.betti]

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(self.betti)

    def is_zero(self) -> bool:
        return not any(self.betti) and not any(self.torsion)

    def same_groups(self, other: "BettiProfile") -> bool:
        n = max(len(self.betti), len(other.betti))
        pad = lambda v, fill: list(v) + [fill] * (n - len(v))  # noqa: E731
        return pad(self.betti, 0) == pad(other.betti, 0) and [
            sorted(t) for t in pad(self.torsion, [])
        ] == [sorted(t) for t in pad(other.torsion, [])]

    def to_dict(self) -> dict:
        return {"betti": list(self.betti), "torsion": [list(t) for t in self.torsion], "exact": self.exact}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "BettiProfile":
        return cls(list(data["betti"]), [list(t) for t in data.get("torsion", [])], data.get("exact", True))


def _reduce_pairs(cells: list[Cube], excluded: set[Cube]):
    """Cancel free pairs in the quotient complex spanned by ``cells``.

    Returns the surviving cells and their boundary dictionaries (restricted to
    survivors).  Coefficients stay in {-1, +1} because a free pair never forces
    an update of other boundaries.
    """
    bd: dict[Cube, dict[Cube, int]] = {}
    cob: dict[Cube, set[Cube]] = {c: set() for c in cells}
    for c in cells:
        faces = {f: s for f, s in cube_boundary(c) if f not in excluded}
        bd[c] = faces
        for f in faces:
            cob[f].add(c)
    queue = deque(cells)
    alive = set(cells)

    def remove(z):
        alive.discard(z)
        for f in bd.pop(z):
            cob[f].discard(z)
            queue.append(f)
        for w in cob.pop(z):
            del bd[w][z]
            queue.append(w)

    while queue:
        c = queue.popleft()
        if c not in alive:
            continue
        if len(cob[c]) == 1:
            tau = next(iter(cob[c]))
            remove(tau)
            remove(c)
        elif len(bd[c]) == 1:
            sigma = next(iter(bd[c]))
            remove(c)
            remove(sigma)
    return alive, bd


def _smith_diagonal(entries: dict[tuple[int, int], int]) -> list[int]:
    """Nonzero diagonal of a Smith-type diagonalization of a sparse integer matrix.

    Pivots are chosen by smallest magnitude, then smallest Markowitz fill-in
    estimate, then (row, col) order, so the result is deterministic.
    """
    rows: dict[int, dict[int, int]] = {}
    cols: dict[int, set[int]] = {}
    for (r, c), v in entries.items():
        if v:
            rows.setdefault(r, {})[c] = v
            cols.setdefault(c, set()).add(r)
    diag = []

    def set_entry(r, c, v):
        if v:
            rows.setdefault(r, {})[c] = v
            cols.setdefault(c, set()).add(r)
        else:
            rr = rows.get(r)
            if rr is not None and c in rr:
                del rr[c]
                if not rr:
                    del rows[r]
            cc = cols.get(c)
            if cc is not None:
                cc.discard(r)
                if not cc:
                    del cols[c]

    def choose():
        best = None
        for r, rr in rows.items():
            for c, v in rr.items():
                key = (abs(v), (len(rr) - 1) * (len(cols[c]) - 1), r, c)
                if best is None or key < best:
                    best = key
                    if key[0] == 1 and key[1] == 0:
                        return best
        return best

    while rows:
        _, _, r, c = choose()
        while True:
            v = rows[r][c]
            moved = False
            for r2 in sorted(cols[c] - {r}):
                f = rows[r2][c]
                q = f // v
                for cc, vv in list(rows[r].items()):
                    set_entry(r2, cc, rows.get(r2, {}).get(cc, 0) - q * vv)
                if rows.get(r2, {}).get(c, 0):
                    r, moved = r2, True
                    break
            if moved:
                continue
            for c2 in sorted(set(rows[r]) - {c}):
                f = rows[r][c2]
                q = f // v
                for rr in list(cols[c]):
                    vv = rows[rr][c]
                    set_entry(rr, c2, rows.get(rr, {}).get(c2, 0) - q * vv)
                if rows.get(r, {}).get(c2, 0):
                    c, moved = c2, True
                    break
            if not moved:
                break
        diag.append(abs(rows[r][c]))
        set_entry(r, c, 0)
    return diag


def _invariant_factors(diag: list[int]) -> list[int]:
    """Canonical invariant factors (> 1) of the group ``sum Z/d`` for a diagonal ``d``."""
    primes: dict[int, list[int]] = {}
    for d in diag:
        n, p = d, 2
        while n > 1 and p * p <= n:
            e = 1
            while n % p == 0:
                n //= p
                e *= p
            if e > 1:
                primes.setdefault(p, []).append(e)
            p += 1
        if n > 1:
            primes.setdefault(n, []).append(n)
    if not primes:
        return []
    length = max(len(v) for v in primes.values())
    factors = [1] * length
    for powers in primes.values():
        powers = sorted(powers, reverse=True)
        for k, e in enumerate(powers):
            factors[length - 1 - k] *= e
    return [f for f in factors if f > 1]


def _rank_mod_p(entries: dict[tuple[int, int], int], p: int = _PRIME) -> int:
    rows: dict[int, dict[int, int]] = {}
    for (r, c), v in entries.items():
        if v % p:
            rows.setdefault(r, {})[c] = v % p
    rank = 0
    pivots: dict[int, dict[int, int]] = {}
    for r in sorted(rows):
        row = dict(rows[r])
        while row:
            c = min(row)
            if c not in pivots:
                inv = pow(row[c], p - 2, p)
                pivots[c] = {k: (v * inv) % p for k, v in row.items()}
                rank += 1
                break
            f = row[c]
            for k, v in pivots[c].items():
                nv = (row.get(k, 0) - f * v) % p
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
    return rank


def _homology_of_quotient(cx: CubicalComplex, excluded: set[Cube]) -> BettiProfile:
    cells = sorted(c for s in cx.cells.values() for c in s if c not in excluded)
    alive, bd = _reduce_pairs(cells, excluded)
    by_dim: list[list[Cube]] = [[] for _ in range(cx.dim + 1)]
    for c in sorted(alive):
        by_dim[cube_dim(c)].append(c)
    index = [{c: k for k, c in enumerate(b)} for b in by_dim]
    exact = len(alive) <= SNF_CELL_LIMIT
    ranks = [0] * (cx.dim + 2)
    torsion_of = [[] for _ in range(cx.dim + 2)]
    for q in range(1, cx.dim + 1):
        entries = {}
        for j, c in enumerate(by_dim[q]):
            for f, s in bd[c].items():
                entries[(index[q - 1][f], j)] = s
        if exact:
            diag = _smith_diagonal(entries)
            ranks[q] = len(diag)
            torsion_of[q] = _invariant_factors(diag)
        else:
            ranks[q] = _rank_mod_p(entries)
    betti = [len(by_dim[q]) - ranks[q] - ranks[q + 1] for q in range(cx.dim + 1)]
    torsion = [torsion_of[q + 1] for q in range(cx.dim + 1)]
    return BettiProfile(betti, torsion, exact)


def homology(cx: CubicalComplex) -> BettiProfile:
    """Integer homology of a cubical complex."""
    return _homology_of_quotient(cx, set())


def relative_homology(cx_n: CubicalComplex, cx_l: CubicalComplex | None) -> BettiProfile:
    """Homology of the pair ``(N, L)``, i.e. of the quotient ``C(N)/C(L)``."""
    if cx_l is None or len(cx_l) == 0:
        return homology(cx_n)
    if not cx_l.is_subcomplex_of(cx_n):
        raise ComplexError("L is not a subcomplex of N")
    return _homology_of_quotient(cx_n, cx_l.all_cells())


def reduced_homology(cx: CubicalComplex) -> BettiProfile:
    if len(cx) == 0:
        raise ComplexError("reduced homology of the empty complex is undefined here")
    b = homology(cx)
    betti = list(b.betti)
    betti[0] -= 1
    return BettiProfile(betti, b.torsion, b.exact)


def euler_characteristic(b: BettiProfile) -> int:
    return sum((-1) ** q * v for q, v in enumerate(b.betti))


def wazewski_check(b: BettiProfile) -> bool:
    """Nonzero index: the isolated invariant set it belongs to cannot be empty."""
    return any(v > 0 for v in b.betti) or any(t for t in b.torsion)


def complex_from_cells(grid, cells: Iterable) -> CubicalComplex:
    """Full cubical complex on the union of closed grid boxes ``cells``."""
    return CubicalComplex.from_top_cells((tuple(c) for c in cells), grid.dim)

