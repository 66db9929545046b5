"""Game dynamics on products of simplices and a few analytic test fields.

States of game fields are full mixed-strategy vectors ``(x_1..x_m, y_1..y_n)``;
``blocks`` records the simplex factors so that integration can project back onto
the polytope and grids can work in reduced coordinates (last entry of each block
dropped).  Test fields without ``blocks`` live in plain Euclidean space.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .game import BimatrixGame, MixedProfile, is_epsilon_nash

PROJECTION_TOL = 1e-9


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:g}")
        self.time = time


@dataclass(frozen=True)
class VectorField:
    """A deterministic autonomous field ``x' = func(x)``.

    ``func`` accepts a batch of states with shape ``(N, dimension)`` and returns
    velocities of the same shape.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dimension: int
    blocks: tuple[int, ...] | None = None
    lipschitz_bound: float | None = None
    name: str = "field"

    def __call__(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=float)
        if s.ndim == 1:
            return self.func(s[None, :])[0]
        return self.func(s)

    @property
    def reduced_dimension(self) -> int:
        if self.blocks is None:
            return self.dimension
        return sum(b - 1 for b in self.blocks)

    def reduce(self, states: np.ndarray) -> np.ndarray:
        """Drop the last coordinate of each simplex block."""
        s = np.atleast_2d(np.asarray(states, dtype=float))
        if self.blocks is None:
            return s
        parts, start = [], 0
        for b in self.blocks:
            parts.append(s[:, start : start + b - 1])
            start += b
        return np.hstack(parts)

    def lift(self, reduced: np.ndarray) -> np.ndarray:
        r = np.atleast_2d(np.asarray(reduced, dtype=float))
        if self.blocks is None:
            return r
        parts, start = [], 0
        for b in self.blocks:
            z = r[:, start : start + b - 1]
            parts.extend([z, 1.0 - z.sum(axis=1, keepdims=True)])
            start += b - 1
        return np.hstack(parts)

    def project(self, states: np.ndarray) -> np.ndarray:
        """Clip negatives and renormalize every simplex block."""
        if self.blocks is None:
            return states
        out = np.clip(states, 0.0, None)
        start = 0
        for b in self.blocks:
            blk = out[:, start : start + b]
            tot = blk.sum(axis=1, keepdims=True)
            tot[tot == 0] = 1.0
            out[:, start : start + b] = blk / tot
            start += b
        return out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    stepper_meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, m: int | None = None) -> None:
        d = self.states.shape[1]
        m = d if m is None else m
        header = ["t"] + [f"x{i + 1}" for i in range(m)] + [f"y{j + 1}" for j in range(d - m)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, s in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s])


@dataclass(frozen=True)
class StarDynamics:
    game: BimatrixGame
    target: MixedProfile
    c: float = 1.0

    def __post_init__(self):
        if not is_epsilon_nash(self.game, self.target, 0):
            raise ValueError("star dynamics target must be an exact Nash equilibrium")
        if not self.c > 0:
            raise ValueError("speed constant c must be positive")


def _payoff_bound(g: BimatrixGame) -> float:
    a, b = g.as_float()
    return float(max(np.abs(a).max(), np.abs(b).max()))


def replicator_field(g: BimatrixGame) -> VectorField:
    a, b = g.as_float()
    m, n = g.m, g.n

    def f(s):
        x, y = s[:, :m], s[:, m:]
        u1 = y @ a.T  # (M1 y)_i
        u2 = x @ b  # (x^T M2)_j
        v1 = np.einsum("ki,ki->k", x, u1)[:, None]
        v2 = np.einsum("kj,kj->k", y, u2)[:, None]
        return np.hstack([x * (u1 - v1), y * (u2 - v2)])

    # each component is a cubic in bounded variables; 4*max|payoff|*(m+n) dominates its gradient norm
    lip = 4.0 * _payoff_bound(g) * (m + n)
    return VectorField(f, m + n, (m, n), lip, "replicator")


def mwu_map(g: BimatrixGame, eta: float) -> Callable[[np.ndarray], np.ndarray]:
    """One step of multiplicative weights on both players simultaneously."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    a, b = g.as_float()
    m = g.m

    def step(state):
        s = np.atleast_2d(np.asarray(state, dtype=float))
        x, y = s[:, :m], s[:, m:]
        u1, u2 = y @ a.T, x @ b
        # shifting by the row maximum keeps exp bounded without changing the ratio
        wx = x * np.exp(eta * (u1 - u1.max(axis=1, keepdims=True)))
        wy = y * np.exp(eta * (u2 - u2.max(axis=1, keepdims=True)))
        out = np.hstack([wx / wx.sum(axis=1, keepdims=True), wy / wy.sum(axis=1, keepdims=True)])
        return out[0] if np.ndim(state) == 1 else out

    return step


def float_deficit(g: BimatrixGame, states: np.ndarray) -> np.ndarray:
    """Vectorized D_g over a batch of full states, in float64."""
    a, b = g.as_float()
    m = g.m
    s = np.atleast_2d(states)
    x, y = s[:, :m], s[:, m:]
    u1, u2 = y @ a.T, x @ b
    d1 = u1.max(axis=1) - np.einsum("ki,ki->k", x, u1)
    d2 = u2.max(axis=1) - np.einsum("kj,kj->k", y, u2)
    return np.clip(d1, 0, None) + np.clip(d2, 0, None)


def star_field(s: StarDynamics) -> VectorField:
    g = s.game
    target = s.target.as_float()
    c = float(s.c)

    def f(states):
        diff = target[None, :] - states
        dist = np.linalg.norm(diff, axis=1)
        speed = c * float_deficit(g, states)
        out = np.zeros_like(states)
        far = dist > 1e-12
        out[far] = diff[far] * (speed[far] / dist[far])[:, None]
        return out

    # L_D: deficit gradient is bounded by 4*max|payoff|*sqrt(m+n); D_max <= 4*max|payoff|;
    # r_min: the unit direction is only Lipschitz away from the target, use the cell scale 1/(m+n)
    bound = _payoff_bound(g)
    l_d = 4.0 * bound * np.sqrt(g.m + g.n)
    d_max = 4.0 * bound
    r_min = 1.0 / (g.m + g.n)
    return VectorField(f, g.m + g.n, (g.m, g.n), c * (l_d + d_max / r_min), "star")


def linear_field(matrix) -> VectorField:
    """x' = A x in Euclidean space; covers the stable, saddle and repeller test systems."""
    a = np.asarray(matrix, dtype=float)
    lip = float(np.linalg.norm(a, 2))
    return VectorField(lambda s: s @ a.T, a.shape[0], None, lip, "linear")


def zero_field(dimension: int) -> VectorField:
    return VectorField(lambda s: np.zeros_like(s), dimension, None, 0.0, "zero")


def double_well_field() -> VectorField:
    """x' = x - x^3 on the line."""
    return VectorField(lambda s: s - s**3, 1, None, None, "double-well")


def rotation_field(omega: float = 1.0) -> VectorField:
    return linear_field([[0.0, -omega], [omega, 0.0]])


def limit_cycle_field() -> VectorField:
    """Planar Hopf normal form with an attracting unit circle."""

    def f(s):
        x, y = s[:, 0], s[:, 1]
        r2 = x * x + y * y
        return np.stack([x * (1 - r2) - y, y * (1 - r2) + x], axis=1)

    return VectorField(f, 2, None, None, "limit-cycle")


def _rk4_step(f: VectorField, s: np.ndarray, h: float) -> np.ndarray:
    k1 = f.func(s)
    k2 = f.func(s + 0.5 * h * k1)
    k3 = f.func(s + 0.5 * h * k2)
    k4 = f.func(s + h * k3)
    return f.project(s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))


def _step_count(T: float, h: float) -> int:
    if T < 0 or not h > 0:
        raise ValueError("need T >= 0 and h > 0")
    steps = int(round(T / h))
    if abs(steps * h - T) > 1e-9 * max(1.0, T):
        steps = int(np.ceil(T / h))
    return steps


def integrate(f: VectorField, x0, T: float, h: float = 1e-2) -> Trajectory:
    """Fixed-step RK4 with simplex projection after every step.

    The last step is shortened when ``T`` is not a multiple of ``h``.
    """
    steps = _step_count(T, h)
    s = f.project(np.atleast_2d(np.asarray(x0, dtype=float)).copy())
    times = [0.0]
    states = [s[0].copy()]
    t = 0.0
    for k in range(steps):
        dt = min(h, T - t) if k == steps - 1 else h
        s = _rk4_step(f, s, dt)
        t = T if k == steps - 1 else (k + 1) * h
        if not np.all(np.isfinite(s)):
            raise IntegrationError("non-finite state", t)
        times.append(t)
        states.append(s[0].copy())
    return Trajectory(np.array(times), np.array(states), {"h": h, "method": "rk4+projection", "projection_tol": PROJECTION_TOL})


def integrate_batch(f: VectorField, x0: np.ndarray, T: float, h: float = 1e-2) -> tuple[np.ndarray, np.ndarray]:
    """Final states of many trajectories at once.

    Returns ``(finals, ok)``; rows whose trajectory became non-finite have ``ok`` false.
    """
    steps = _step_count(T, h)
    s = f.project(np.array(x0, dtype=float, copy=True))
    ok = np.ones(len(s), dtype=bool)
    t = 0.0
    with np.errstate(all="ignore"):
        for k in range(steps):
            dt = min(h, T - t) if k == steps - 1 else h
            s = _rk4_step(f, s, dt)
            t += dt
            bad = ~np.all(np.isfinite(s), axis=1)
            if bad.any():
                ok &= ~bad
                s[bad] = 0.0
    return s, ok


def iterate_map(step: Callable, x0, count: int) -> np.ndarray:
    states = [np.asarray(x0, dtype=float)]
    for _ in range(count):
        states.append(step(states[-1]))
    return np.array(states)


def _refine_zero(f: VectorField, start: np.ndarray, lo: np.ndarray, hi: np.ndarray, iters: int = 40):
    """Damped Newton confined to a reduced-coordinate box; returns the best point seen."""
    def g(z):
        return f(f.lift(z)[0])

    z = np.clip(start, lo, hi)
    best, best_val = z, np.linalg.norm(g(z))
    scale = max(float(np.max(hi - lo)), 1e-12)
    for _ in range(iters):
        v = g(z)
        nv = np.linalg.norm(v)
        if nv < 1e-15:
            break
        step = 1e-7 * scale
        jac = np.empty((len(v), len(z)))
        for c in range(len(z)):
            dz = np.zeros_like(z)
            dz[c] = step
            jac[:, c] = (g(z + dz) - g(z - dz)) / (2 * step)
        delta = np.linalg.lstsq(jac, -v, rcond=None)[0]
        lam = 1.0
        while lam > 1e-4:
            cand = np.clip(z + lam * delta, lo, hi)
            if np.linalg.norm(g(cand)) < nv:
                z = cand
                break
            lam /= 2
        else:
            break
        val = np.linalg.norm(g(z))
        if val < best_val:
            best, best_val = z, val
    return best, best_val


def find_fixed_points(f: VectorField, region, grid, tol: float = 1e-6) -> list[np.ndarray]:
    """Fixed-point witnesses inside the given grid cells.

    Each cell is sampled at its center and corners; the smallest sample seeds a
    damped Newton search kept inside the cell.  Only points with ``|f| <= tol``
    are reported (as full states), merged when closer than ``1e-6``.
    """
    found: list[np.ndarray] = []
    d = grid.dim
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
    samples_unit = np.vstack([np.full((1, d), 0.5), corners])
    for cell in region:
        lo, hi = grid.cell_box(cell)
        pts = lo + samples_unit * (hi - lo)
        full = f.lift(pts)
        vals = np.linalg.norm(f.func(full), axis=1)
        z, val = _refine_zero(f, pts[int(np.argmin(vals))], lo, hi)
        if val <= tol:
            state = f.lift(z)[0]
            if all(np.linalg.norm(state - p) > 1e-6 for p in found):
                found.append(state)
    return found


def lipschitz_growth(f: VectorField, tau: float) -> float:
    """Gronwall factor e^{L tau} bounding how far images of nearby points separate."""
    if f.lipschitz_bound is None:
        return float("inf")
    return float(np.exp(f.lipschitz_bound * tau))


def profile_to_state(p: MixedProfile) -> np.ndarray:
    return p.as_float()


def state_to_profile(state: Sequence[float], m: int, limit: int = 10**6) -> MixedProfile:
    """Nearest rational profile with bounded denominators; the last entry of each block absorbs rounding."""
    vals = [Fraction(float(v)).limit_denominator(limit) for v in state]
    x, y = vals[:m], vals[m:]
    x[-1] = 1 - sum(x[:-1])
    y[-1] = 1 - sum(y[:-1])
    return MixedProfile(tuple(x), tuple(y))


__all__ = [
    "IntegrationError",
    "VectorField",
    "Trajectory",
    "StarDynamics",
    "replicator_field",
    "mwu_map",
    "star_field",
    "float_deficit",
    "linear_field",
    "zero_field",
    "double_well_field",
    "rotation_field",
    "limit_cycle_field",
    "integrate",
    "integrate_batch",
    "iterate_map",
    "find_fixed_points",
    "lipschitz_growth",
    "profile_to_state",
    "state_to_profile",
]
