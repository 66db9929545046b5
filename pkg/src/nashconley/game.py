"""Exact bimatrix games: utilities, deficits, epsilon-Nash tests and support enumeration.

All quantities are :class:`fractions.Fraction`; nothing in this module touches
floating point except :func:`perturb_game`, which draws its random directions
in float64 and then rounds them to rationals with an exact norm bound.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exact import solve_linear_system

__all__ = [
    "BimatrixGame",
    "MixedProfile",
    "DeficitValue",
    "NashReport",
    "GameStructureError",
    "expected_utility",
    "best_response_value",
    "best_responses",
    "deficit",
    "is_epsilon_nash",
    "support_enumeration",
    "km_game",
    "matching_pennies",
    "random_game",
    "perturb_game",
    "weakly_dominates",
    "dominance_check_km",
    "to_fraction",
]


class GameStructureError(ValueError):
    """Raised on dimension mismatches and malformed games or profiles."""


def to_fraction(value) -> Fraction:
    """Parse ``value`` (int, Fraction, ``"p/q"`` string or float) as an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise GameStructureError(f"not a rational: {value!r}")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise GameStructureError(f"not a rational: {value!r}") from exc
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise GameStructureError(f"non-finite payoff {value!r}")
        return Fraction(float(value))
    raise GameStructureError(f"not a rational: {value!r}")


def _matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(to_fraction(v) for v in row) for row in rows)


@dataclass(frozen=True)
class BimatrixGame:
    """Two-player normal-form game.

    ``payoff2[i][j]`` is player 2's utility when row ``i`` and column ``j`` are
    played, i.e. both matrices are stored ``m x n``.
    """

    payoff1: tuple[tuple[Fraction, ...], ...]
    payoff2: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        p1 = _matrix(self.payoff1)
        p2 = _matrix(self.payoff2)
        object.__setattr__(self, "payoff1", p1)
        object.__setattr__(self, "payoff2", p2)
        if not p1 or not p1[0]:
            raise GameStructureError("a game needs at least one strategy per player")
        n = len(p1[0])
        for mat in (p1, p2):
            if len(mat) != len(p1) or any(len(row) != n for row in mat):
                raise GameStructureError("payoff matrices must both be m x n")

    @property
    def m(self) -> int:
        return len(self.payoff1)

    @property
    def n(self) -> int:
        return len(self.payoff1[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.m, self.n

    def payoff(self, player: int):
        if player == 1:
            return self.payoff1
        if player == 2:
            return self.payoff2
        raise GameStructureError(f"player must be 1 or 2, got {player!r}")

    def payoff_range(self) -> Fraction:
        entries = [v for mat in (self.payoff1, self.payoff2) for row in mat for v in row]
        return max(entries) - min(entries)

    def as_float(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array(self.payoff1, dtype=float), np.array(self.payoff2, dtype=float))

    def shifted(self, player: int, constant) -> "BimatrixGame":
        c = to_fraction(constant)
        if player == 1:
            return BimatrixGame([[v + c for v in row] for row in self.payoff1], self.payoff2)
        return BimatrixGame(self.payoff1, [[v + c for v in row] for row in self.payoff2])

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "payoff1": [[str(v) for v in row] for row in self.payoff1],
            "payoff2": [[str(v) for v in row] for row in self.payoff2],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BimatrixGame":
        try:
            game = cls(data["payoff1"], data["payoff2"])
        except (KeyError, TypeError) as exc:
            raise GameStructureError(f"malformed game description: {exc}") from exc
        if "m" in data and int(data["m"]) != game.m:
            raise GameStructureError(f"declared m={data['m']} but payoff1 has {game.m} rows")
        if "n" in data and int(data["n"]) != game.n:
            raise GameStructureError(f"declared n={data['n']} but payoff1 has {game.n} columns")
        return game

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BimatrixGame":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "BimatrixGame":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class MixedProfile:
    """A point of the product of simplices, stored exactly."""

    x: tuple[Fraction, ...]
    y: tuple[Fraction, ...]

    def __post_init__(self):
        x = tuple(to_fraction(v) for v in self.x)
        y = tuple(to_fraction(v) for v in self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        for name, vec in (("x", x), ("y", y)):
            if not vec:
                raise GameStructureError(f"{name} is empty")
            if any(v < 0 for v in vec):
                raise GameStructureError(f"{name} has a negative entry")
            if sum(vec) != 1:
                raise GameStructureError(f"{name} does not sum to 1 (sum={sum(vec)})")

    @classmethod
    def pure(cls, m: int, n: int, i: int, j: int) -> "MixedProfile":
        """Pure profile with 0-based strategy indices ``i`` and ``j``."""
        x = [Fraction(0)] * m
        y = [Fraction(0)] * n
        x[i] = Fraction(1)
        y[j] = Fraction(1)
        return cls(tuple(x), tuple(y))

    @classmethod
    def uniform(cls, m: int, n: int) -> "MixedProfile":
        return cls((Fraction(1, m),) * m, (Fraction(1, n),) * n)

    def support(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return (
            tuple(i for i, v in enumerate(self.x) if v > 0),
            tuple(j for j, v in enumerate(self.y) if v > 0),
        )

    def as_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.x + self.y])

    def to_dict(self) -> dict:
        return {"x": [str(v) for v in self.x], "y": [str(v) for v in self.y]}


@dataclass(frozen=True)
class DeficitValue:
    per_player: tuple[Fraction, Fraction]
    total: Fraction


@dataclass
class NashReport:
    equilibria: list[MixedProfile] = field(default_factory=list)
    supports: list[tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=list)
    degenerate_flag: bool = False

    @property
    def count(self) -> int:
        return len(self.equilibria)

    def to_dict(self) -> dict:
        return {
            "equilibria": [p.to_dict() for p in self.equilibria],
            "supports": [[list(i), list(j)] for i, j in self.supports],
            "degenerate_flag": self.degenerate_flag,
            "count": self.count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_dims(g: BimatrixGame, p: MixedProfile) -> None:
    if len(p.x) != g.m or len(p.y) != g.n:
        raise GameStructureError(
            f"profile of shape ({len(p.x)}, {len(p.y)}) does not match game {g.m}x{g.n}"
        )


def _row_payoffs(g: BimatrixGame, y: Sequence[Fraction]) -> list[Fraction]:
    """(payoff1 @ y)_i for every row i."""
    return [sum((a * b for a, b in zip(row, y)), Fraction(0)) for row in g.payoff1]


def _col_payoffs(g: BimatrixGame, x: Sequence[Fraction]) -> list[Fraction]:
    """(x @ payoff2)_j for every column j."""
    return [
        sum((x[i] * g.payoff2[i][j] for i in range(g.m)), Fraction(0)) for j in range(g.n)
    ]


def expected_utility(g: BimatrixGame, p: MixedProfile, player: int) -> Fraction:
    _check_dims(g, p)
    mat = g.payoff(player)
    return sum(
        (p.x[i] * mat[i][j] * p.y[j] for i in range(g.m) for j in range(g.n) if p.x[i] and p.y[j]),
        Fraction(0),
    )


def best_response_value(g: BimatrixGame, p: MixedProfile, player: int) -> Fraction:
    """Utility of the best pure deviation of ``player`` against the opponent's mixture."""
    _check_dims(g, p)
    g.payoff(player)
    values = _row_payoffs(g, p.y) if player == 1 else _col_payoffs(g, p.x)
    return max(values)


def best_responses(g: BimatrixGame, p: MixedProfile, player: int) -> tuple[int, ...]:
    """0-based indices of all pure best responses of ``player``."""
    _check_dims(g, p)
    g.payoff(player)
    values = _row_payoffs(g, p.y) if player == 1 else _col_payoffs(g, p.x)
    top = max(values)
    return tuple(k for k, v in enumerate(values) if v == top)


def deficit(g: BimatrixGame, p: MixedProfile) -> DeficitValue:
    d1 = best_response_value(g, p, 1) - expected_utility(g, p, 1)
    d2 = best_response_value(g, p, 2) - expected_utility(g, p, 2)
    return DeficitValue((d1, d2), d1 + d2)


def is_epsilon_nash(g: BimatrixGame, p: MixedProfile, eps=0) -> bool:
    eps = to_fraction(eps)
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    d = deficit(g, p)
    return d.per_player[0] <= eps and d.per_player[1] <= eps


def _indifference(mat, rows, cols, transpose=False):
    """Solve for a mixture on ``cols`` making every strategy in ``rows`` indifferent.

    With ``transpose`` the roles are swapped so the same routine serves player 2's
    indifference on player 1's mixture.
    """
    s = len(cols)
    a = []
    for r in rows:
        coeffs = [mat[c][r] if transpose else mat[r][c] for c in cols]
        a.append(coeffs + [Fraction(-1)])
    a.append([Fraction(1)] * s + [Fraction(0)])
    b = [Fraction(0)] * s + [Fraction(1)]
    return solve_linear_system(a, b)


def support_enumeration(g: BimatrixGame) -> NashReport:
    """All equilibria obtainable from equal-size support pairs, solved exactly.

    ``degenerate_flag`` is raised when an indifference system has a continuum of
    solutions or when a found equilibrium has more pure best responses than its
    support size (the witness of a degenerate game).
    """
    report = NashReport()
    seen = set()
    for s in range(1, min(g.m, g.n) + 1):
        for rows in itertools.combinations(range(g.m), s):
            for cols in itertools.combinations(range(g.n), s):
                ysol, ystatus = _indifference(g.payoff1, rows, cols)
                xsol, xstatus = _indifference(g.payoff2, cols, rows, transpose=True)
                if "continuum" in (ystatus, xstatus):
                    report.degenerate_flag = True
                if ystatus != "unique" or xstatus != "unique":
                    continue
                y = [Fraction(0)] * g.n
                x = [Fraction(0)] * g.m
                for c, v in zip(cols, ysol[:-1]):
                    y[c] = v
                for r, v in zip(rows, xsol[:-1]):
                    x[r] = v
                if any(v < 0 for v in x) or any(v < 0 for v in y):
                    continue
                if max(_row_payoffs(g, y)) != ysol[-1] or max(_col_payoffs(g, x)) != xsol[-1]:
                    continue
                key = (tuple(x), tuple(y))
                if key in seen:
                    continue
                seen.add(key)
                prof = MixedProfile(tuple(x), tuple(y))
                supp = prof.support()
                report.equilibria.append(prof)
                report.supports.append(supp)
                if len(best_responses(g, prof, 1)) > len(supp[0]) or len(
                    best_responses(g, prof, 2)
                ) > len(supp[1]):
                    report.degenerate_flag = True
    return report


def km_game() -> BimatrixGame:
    """The 3x3 Kohlberg-Mertens game whose equilibria form a topological circle."""
    cells = [
        [(1, 1), (0, -1), (-1, 1)],
        [(-1, 0), (0, 0), (-1, 0)],
        [(1, -1), (0, -1), (-2, -2)],
    ]
    p1 = [[a for a, _ in row] for row in cells]
    p2 = [[b for _, b in row] for row in cells]
    return BimatrixGame(p1, p2)


def matching_pennies() -> BimatrixGame:
    return BimatrixGame([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])


def random_game(m: int, n: int, seed: int, low: int = -9, high: int = 9) -> BimatrixGame:
    """Integer-payoff game drawn from a seeded Philox stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    a = rng.integers(low, high + 1, size=(2, m, n))
    return BimatrixGame(a[0].tolist(), a[1].tolist())


def perturb_game(g: BimatrixGame, radius, seed: int, denominator: int = 10**6) -> BimatrixGame:
    """Perturb all ``2*m*n`` payoffs by a seeded rational vector of Euclidean norm <= radius.

    The direction comes from a counter-based Philox stream, so equal seeds give
    equal games on every platform.  Entries are truncated toward zero onto the
    grid ``1/denominator`` and the exact squared norm is checked against
    ``radius**2``.
    """
    radius = to_fraction(radius)
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    if radius == 0:
        return g
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(2 * g.m * g.n)
    v = v / np.linalg.norm(v)
    scale = float(radius) * denominator
    deltas = [Fraction(int(np.trunc(scale * c)), denominator) for c in v]
    while sum(d * d for d in deltas) > radius * radius:
        deltas = [Fraction(int(d * denominator * 999_999 // 1_000_000), denominator) for d in deltas]
    it = iter(deltas)
    p1 = [[val + next(it) for val in row] for row in g.payoff1]
    p2 = [[val + next(it) for val in row] for row in g.payoff2]
    return BimatrixGame(p1, p2)


def _affine_on_simplex(coeffs: Sequence[Fraction]) -> list[Fraction]:
    """Rewrite sum_j c_j y_j on the simplex as [const, a_1, ..., a_{n-1}] in y_1..y_{n-1}."""
    last = coeffs[-1]
    return [last] + [c - last for c in coeffs[:-1]]


def weakly_dominates(g: BimatrixGame, player: int, i: int, k: int) -> bool:
    """True when pure strategy ``i`` of ``player`` does at least as well as ``k`` everywhere.

    The payoff difference is affine in the opponent's reduced coordinates, so its
    coefficients are formed exactly and checked at the simplex vertices.
    """
    mat = g.payoff(player)
    if player == 1:
        row_i, row_k = mat[i], mat[k]
    else:
        row_i = [mat[r][i] for r in range(g.m)]
        row_k = [mat[r][k] for r in range(g.m)]
    diff = _affine_on_simplex([a - b for a, b in zip(row_i, row_k)])
    const, slopes = diff[0], diff[1:]
    return const >= 0 and all(const + a >= 0 for a in slopes)


def dominance_check_km() -> bool:
    """Strategy 1 weakly dominates 2 and 3 for both players of the Kohlberg-Mertens game."""
    g = km_game()
    return all(weakly_dominates(g, player, 0, k) for player in (1, 2) for k in (1, 2))


def profile_from_strings(x: Iterable, y: Iterable) -> MixedProfile:
    return MixedProfile(tuple(to_fraction(v) for v in x), tuple(to_fraction(v) for v in y))
