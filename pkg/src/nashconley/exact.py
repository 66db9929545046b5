"""Small exact-rational linear algebra: solves, LP feasibility, vertex enumeration."""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

Row = Sequence[Fraction]


def solve_linear_system(a: Sequence[Row], b: Row):
    """Gaussian elimination over the rationals.

    Returns ``(solution, status)`` where status is ``"unique"``, ``"none"`` or
    ``"continuum"``; the solution is only given in the unique case.
    """
    rows = len(a)
    cols = len(a[0]) if rows else 0
    m = [[Fraction(v) for v in row] + [Fraction(rhs)] for row, rhs in zip(a, b)]
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    if any(all(v == 0 for v in row[:-1]) and row[-1] != 0 for row in m):
        return None, "none"
    if len(pivots) < cols:
        return None, "continuum"
    sol = [Fraction(0)] * cols
    for i, c in enumerate(pivots):
        sol[c] = m[i][-1]
    return sol, "unique"


def _normalize(coeffs, rhs):
    """Scale a constraint so its first nonzero coefficient has absolute value 1."""
    lead = next((abs(c) for c in coeffs if c != 0), None)
    if lead is None:
        return tuple(coeffs), rhs
    return tuple(c / lead for c in coeffs), rhs / lead


def fm_feasible(a: Sequence[Row], b: Row) -> bool:
    """Decide whether ``{x : a x <= b}`` is nonempty by Fourier-Motzkin elimination."""
    cons = {}
    for row, rhs in zip(a, b):
        key, val = _normalize([Fraction(v) for v in row], Fraction(rhs))
        if key not in cons or val < cons[key]:
            cons[key] = val
    if not cons:
        return True
    nvars = len(next(iter(cons)))
    for var in range(nvars):
        pos, neg, rest = [], [], {}
        for key, val in cons.items():
            c = key[var]
            if c > 0:
                pos.append((key, val, c))
            elif c < 0:
                neg.append((key, val, c))
            else:
                if key not in rest or val < rest[key]:
                    rest[key] = val
        for (kp, vp, cp), (kn, vn, cn) in itertools.product(pos, neg):
            combo = [p / cp - q / cn for p, q in zip(kp, kn)]
            val = vp / cp - vn / cn
            key, val = _normalize(combo, val)
            if key not in rest or val < rest[key]:
                rest[key] = val
        cons = rest
        for key, val in cons.items():
            if all(c == 0 for c in key) and val < 0:
                return False
    return all(val >= 0 for key, val in cons.items() if all(c == 0 for c in key))


def polytope_vertices(a: Sequence[Row], b: Row) -> list[tuple[Fraction, ...]]:
    """Vertices of a bounded polytope ``{x : a x <= b}`` by brute-force basis enumeration.

    Intended for dimension <= 3 and a few dozen constraints.
    """
    a = [[Fraction(v) for v in row] for row in a]
    b = [Fraction(v) for v in b]
    if not a:
        return []
    d = len(a[0])
    if d == 0:
        return [()] if all(v >= 0 for v in b) else []
    found = []
    seen = set()
    for idx in itertools.combinations(range(len(a)), d):
        sol, status = solve_linear_system([a[i] for i in idx], [b[i] for i in idx])
        if status != "unique":
            continue
        pt = tuple(sol)
        if pt in seen:
            continue
        if all(sum(c * x for c, x in zip(row, pt)) <= rhs for row, rhs in zip(a, b)):
            seen.add(pt)
            found.append(pt)
    found.sort()
    return found


class QuadraticSurd:
    """Exact numbers ``a + b*sqrt(d)`` with rational ``a, b`` and fixed rational ``d > 0``."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d):
        self.a = Fraction(a)
        self.b = Fraction(b)
        self.d = Fraction(d)

    def _coerce(self, other):
        if isinstance(other, QuadraticSurd):
            return other
        return QuadraticSurd(other, 0, self.d)

    def __add__(self, other):
        o = self._coerce(other)
        return QuadraticSurd(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticSurd(-self.a, -self.b, self.d)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return QuadraticSurd(self.a * o.a + self.b * o.b * self.d, self.a * o.b + self.b * o.a, self.d)

    __rmul__ = __mul__

    def sign(self) -> int:
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with b^2 d
        diff = self.a * self.a - self.b * self.b * self.d
        s = (diff > 0) - (diff < 0)
        return sa * s

    def __float__(self):
        return float(self.a) + float(self.b) * float(self.d) ** 0.5

    def __repr__(self):
        return f"QuadraticSurd({self.a}, {self.b}, {self.d})"
