"""Acceptance criteria 1-8, one verdict line each.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
import itertools
import time
from fractions import Fraction as F

import numpy as np
import pytest

from nashconley.conley import (
    attractor_cells,
    build_grid,
    build_transition_graph,
    conley_index,
    locate,
    morse_graph,
    morse_sets,
    simplex_product_grid,
)
from nashconley.dynamics import StarDynamics, double_well_field, limit_cycle_field, linear_field, star_field
from nashconley.game import (
    BimatrixGame,
    MixedProfile,
    best_response_value,
    expected_utility,
    km_game,
    matching_pennies,
    perturb_game,
    random_game,
    support_enumeration,
)
from nashconley.homology import (
    CubicalComplex,
    chain_complex,
    complex_from_cells,
    euler_characteristic,
    homology,
    relative_homology,
)
from nashconley.ne_topology import (
    eps_nash_region,
    nash_component_extract,
    normalized_to_raw,
    region_homology,
    transition_bisect,
)

from acceptance_log import record
from oracles import betti_oracle, grid_equilibria

pytestmark = pytest.mark.slow

KM = km_game()
CIRCLE = (1, 1, 0, 0, 0)
BALL = (1, 0, 0, 0, 0)


def km_betti(eps_normalized, k):
    reg = eps_nash_region(KM, normalized_to_raw(KM, F(eps_normalized)), k)
    return region_homology(reg).as_tuple()


def test_criterion_1_eps_circle():
    t0 = time.perf_counter()
    b03, b09 = km_betti("0.03", 24), km_betti("0.09", 24)
    elapsed = time.perf_counter() - t0
    t1 = time.perf_counter()
    fallback = km_betti("0.03", 16)
    elapsed16 = time.perf_counter() - t1
    ok = b03 == CIRCLE and b09 == CIRCLE and fallback[1] == 1 and elapsed <= 600 and elapsed16 <= 120
    record(1, ok, f"k=24: 0.03 -> {b03}, 0.09 -> {b09} in {elapsed:.1f}s; k=16: 0.03 -> {fallback} in {elapsed16:.1f}s")
    assert ok


def test_criterion_2_ball_transition():
    b12 = km_betti("0.12", 24)
    res = transition_bisect(KM, F(9, 100), F(12, 100), k=24, width=F(1, 100))
    bracket = res["bracket"]
    ok = b12[0] == 1 and b12[1] == 0 and bracket is not None
    if ok:
        lo, hi = (F(v) for v in bracket)
        ok = F(9, 100) <= lo < hi <= F(12, 100) and hi - lo <= F(1, 100)
    record(2, ok, f"0.12 -> {b12}; bracket {bracket}")
    assert ok


def test_criterion_3_perturbation_robustness():
    radius = F(3, 100) * 3 / 10
    found = []
    for seed in range(5):
        g = perturb_game(KM, radius, seed)
        reg = eps_nash_region(g, normalized_to_raw(g, F(3, 100)), 24)
        found.append(region_homology(reg).as_tuple())
    ok = all(b == CIRCLE for b in found)
    record(3, ok, f"radius {radius}, seeds 0-4 -> {sorted(set(found))}")
    assert ok


def test_criterion_4_nash_circle():
    t0 = time.perf_counter()
    comp = nash_component_extract(KM, 8, 2)
    b = comp.homology().as_tuple()
    elapsed = time.perf_counter() - t0
    ok = comp.cluster_count == 1 and b == CIRCLE and elapsed <= 300
    record(4, ok, f"{len(comp.cells)} cells at k={comp.k}, clusters={comp.cluster_count}, betti={b}, {elapsed:.1f}s")
    assert ok


def _planar_index(field, bounds, k):
    grid = build_grid(bounds, k)
    tg = build_transition_graph(field, grid, tau=1.0, rho=0.01)
    mg = morse_graph(tg)
    return tg, mg, morse_sets(mg, grid)


def test_criterion_5_canonical_indices():
    out = {}
    tg, mg, sets = _planar_index(limit_cycle_field(), [(-1.5, 1.5)] * 2, 24)
    # the periodic orbit is the Morse set that avoids the origin cell
    origin = locate(tg.grid, [0.0, 0.0])
    orbit = [S for S in sets if origin not in S]
    out["periodic orbit"] = conley_index(tg, orbit[0], mg).as_tuple() if len(orbit) == 1 else None
    square = [(-1, 1), (-1, 1)]
    for name, matrix in (("stable", [[-1, 0], [0, -1]]), ("saddle", [[1, 0], [0, -1]]), ("repeller", [[1, 0], [0, 1]])):
        tg, mg, sets = _planar_index(linear_field(matrix), square, 16)
        out[name] = conley_index(tg, sets[0], mg).as_tuple() if len(sets) == 1 else None
    expected = {"periodic orbit": (1, 1, 0), "stable": (1, 0, 0), "saddle": (0, 1, 0), "repeller": (0, 0, 1)}
    ok = out == expected
    record(5, ok, ", ".join(f"{k} {v}" for k, v in out.items()))
    assert ok


def _decomposition_checks(grid, A_cells, repeller_witness):
    """Euler additivity with CH(R) = H(X, A), and that Betti(A) != Betti(X) forces a nonempty repeller."""
    X = complex_from_cells(grid, grid.active)
    A = complex_from_cells(grid, [grid.active[v] for v in A_cells])
    hx, ha, hr = homology(X), homology(A), relative_homology(X, A)
    euler_ok = euler_characteristic(ha) + euler_characteristic(hr) == euler_characteristic(hx)
    repeller_ok = ha.as_tuple() == hx.as_tuple() or bool(repeller_witness)
    return euler_ok, repeller_ok, ha.as_tuple(), hx.as_tuple(), hr.as_tuple()


def test_criterion_6_exact_sequence_consequences():
    details, ok = [], True

    grid = build_grid([(-1.5, 1.5)], 24)
    tg = build_transition_graph(double_well_field(), grid, tau=1.0, rho=0.01)
    mg = morse_graph(tg)
    A = attractor_cells(mg, tg, mg.minimal())
    R = mg.recurrent_cells - A
    e_ok, r_ok, ha, hx, hr = _decomposition_checks(grid, A, R)
    r_sets = [S for S in morse_sets(mg, grid) if S <= R]
    r_index = conley_index(tg, r_sets[0], mg).as_tuple() if len(r_sets) == 1 else None
    ok &= e_ok and r_ok and r_index == hr
    details.append(f"double well A{ha} X{hx} R{hr} (Morse index {r_index})")

    target = MixedProfile.pure(3, 3, 0, 0)
    field = star_field(StarDynamics(KM, target))
    grid = simplex_product_grid([2, 2], 8)
    tg = build_transition_graph(field, grid, tau=2.0, h=0.05)
    mg = morse_graph(tg)
    seed = mg.scc_of(locate(grid, [1.0, 0.0, 1.0, 0.0]))
    A = attractor_cells(mg, tg, seed)
    R = mg.recurrent_cells - A
    e_ok, r_ok, ha, hx, hr = _decomposition_checks(grid, A, R)
    ok &= e_ok and r_ok
    details.append(f"KM star A{ha} X{hx} R{hr}")

    region = eps_nash_region(KM, F(9, 100), 12)
    members = {region.grid.position(c) for c in region.member_cells}
    R = set(range(len(region.grid))) - members
    e_ok, r_ok, ha, hx, hr = _decomposition_checks(region.grid, members, R)
    scenario = ha == CIRCLE and hx == BALL
    ok &= e_ok and r_ok and (not scenario or hr == (0, 0, 1, 0, 0))
    details.append(f"KM eps-region A{ha} X{hx} R{hr}")

    record(6, ok, "; ".join(details))
    assert ok


def _box_distance(grid, cell, point):
    lo, hi = grid.cell_box(cell)
    return float(np.linalg.norm(np.maximum(0, np.maximum(lo - point, point - hi))))


def _star_recurrence(g, target, k):
    field = star_field(StarDynamics(g, target))
    grid = simplex_product_grid([g.m - 1, g.n - 1], k)
    tg = build_transition_graph(field, grid, tau=2.0, h=0.05)
    mg = morse_graph(tg)
    point = field.reduce(target.as_float())[0]
    cells = [grid.active[v] for v in mg.recurrent_cells]
    far = max(_box_distance(grid, c, point) for c in cells) / (1.0 / k)
    return len(cells), far


def test_criterion_7_star_dynamics():
    cases = [("matching pennies", matching_pennies(), 16)]
    cases += [(f"random seed {s}", random_game(3, 3, s), 8) for s in (0, 15, 22)]
    ok, details = True, []
    for name, g, k in cases:
        rep = support_enumeration(g)
        nondegenerate = rep.count == 1 and not rep.degenerate_flag
        (n1, d1), (n2, d2) = _star_recurrence(g, rep.equilibria[0], k), _star_recurrence(g, rep.equilibria[0], 2 * k)
        good = nondegenerate and d1 <= 2 and d2 <= 2 and 0 < n2 <= n1 * 2**4 / 2
        ok &= good
        details.append(f"{name}: {n1}@{k} -> {n2}@{2 * k}, max dist {max(d1, d2):.2f} widths")
    record(7, ok, "; ".join(details))
    assert ok


def test_criterion_8_oracle_suites():
    rng = np.random.Generator(np.random.Philox(2024))
    checks = {}

    agree = boundary = 0
    for trial in range(50):
        dim = 2 if trial < 30 else 3
        side = 4 if dim == 2 else 3
        count = int(rng.integers(1, 11))
        cells = sorted({tuple(int(v) for v in rng.integers(0, side, dim)) for _ in range(count)})
        cx = CubicalComplex.from_top_cells(cells, dim)
        agree += list(homology(cx).betti) == betti_oracle(cells, dim)
        boundary += chain_complex(cx).check()
    checks["homology"] = (agree, 50)
    checks["boundary"] = (boundary, 50)

    games, seed = [], 500
    while len(games) < 20:
        shape = (2, 2) if len(games) < 10 else (3, 3)
        g = random_game(*shape, seed)
        seed += 1
        rep = support_enumeration(g)
        if not rep.degenerate_flag:
            games.append((g, rep))
    matched = sum(
        {(p.x, p.y) for p in rep.equilibria} == grid_equilibria(g.payoff1, g.payoff2, 60) and rep.count % 2 == 1
        for g, rep in games
    )
    checks["support enumeration"] = (matched, 20)

    def rational_mix(size):
        w = [int(v) + 1 for v in rng.integers(0, 20, size)]
        return tuple(F(v, sum(w)) for v in w)

    dominated = 0
    for _ in range(1000):
        p = MixedProfile(rational_mix(3), rational_mix(3))
        good = True
        for player in (1, 2):
            best = best_response_value(KM, p, player)
            for _ in range(5):
                dev = rational_mix(3)
                q = MixedProfile(dev, p.y) if player == 1 else MixedProfile(p.x, dev)
                good &= expected_utility(KM, q, player) <= best
            pure = [MixedProfile.pure(3, 3, i, 0) for i in range(3)]
            vals = [
                expected_utility(KM, MixedProfile(pp.x, p.y) if player == 1 else MixedProfile(p.x, pp.x), player)
                for pp in pure
            ]
            good &= max(vals) == best
        dominated += good
    checks["pure vs mixed"] = (dominated, 1000)

    ok = all(a == b for a, b in checks.values())
    record(8, ok, ", ".join(f"{k} {a}/{b}" for k, (a, b) in checks.items()))
    assert ok


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
