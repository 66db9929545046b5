import itertools

import pytest
from hypothesis import given, settings, strategies as st

from nashconley import homology as hm
from nashconley.homology import (
    BettiProfile,
    ComplexError,
    CubicalComplex,
    chain_complex,
    euler_characteristic,
    homology,
    reduced_homology,
    relative_homology,
    wazewski_check,
)

from oracles import betti_oracle


def tops(cells, dim=None):
    return CubicalComplex.from_top_cells(cells, dim)


def test_counts_single_square():
    assert tops([(0, 0)]).counts() == [4, 4, 1]


def test_counts_two_squares():
    assert tops([(0, 0), (1, 0)]).counts() == [6, 7, 2]


def test_point_interval_square():
    assert homology(tops([(0,)])).as_tuple() == (1, 0)
    assert homology(tops([(0, 0)])).as_tuple() == (1, 0, 0)


def test_ring_has_one_loop():
    ring = [c for c in itertools.product(range(3), repeat=2) if c != (1, 1)]
    assert homology(tops(ring)).as_tuple() == (1, 1, 0)


def test_hollow_cube_has_a_void():
    shell = [c for c in itertools.product(range(3), repeat=3) if c != (1, 1, 1)]
    assert homology(tops(shell)).as_tuple() == (1, 0, 1, 0)


def test_two_components():
    assert homology(tops([(0, 0), (2, 2)])).as_tuple() == (2, 0, 0)


def test_reduced():
    assert reduced_homology(tops([(0, 0)])).as_tuple() == (0, 0, 0)
    with pytest.raises(ComplexError):
        reduced_homology(CubicalComplex.from_cubes([], 2))


def test_relative_square_mod_boundary():
    sq = tops([(0, 0)])
    bd = CubicalComplex.from_cubes([c for c in sq.all_cells() if hm.cube_dim(c) == 1], 2)
    assert relative_homology(sq, bd).as_tuple() == (0, 0, 1)


def test_relative_interval_mod_endpoints():
    seg = tops([(0,), (1,), (2,)])
    ends = CubicalComplex.from_cubes([(0,), (6,)], 1)
    assert relative_homology(seg, ends).as_tuple() == (0, 1)


def test_relative_requires_subcomplex():
    with pytest.raises(ComplexError):
        relative_homology(tops([(0, 0)]), tops([(5, 5)]))


def test_relative_empty_is_absolute():
    sq = tops([(0, 0), (3, 0)])
    assert relative_homology(sq, None).as_tuple() == homology(sq).as_tuple()


def test_euler_and_wazewski():
    ring = [c for c in itertools.product(range(3), repeat=2) if c != (1, 1)]
    b = homology(tops(ring))
    counts = tops(ring).counts()
    assert euler_characteristic(b) == counts[0] - counts[1] + counts[2] == 0
    assert wazewski_check(b)
    assert not wazewski_check(BettiProfile([0, 0]))


def test_smith_torsion():
    assert hm._invariant_factors(hm._smith_diagonal({(0, 0): 2, (1, 1): 3})) == [6]
    diag = hm._smith_diagonal({(0, 0): 2, (0, 1): 4, (1, 0): 6, (1, 1): 8})
    assert sorted(hm._invariant_factors(diag)) == [2, 4]  # gcd 2, |det| 8
    assert hm._invariant_factors([2, 4]) == [2, 4]


def test_json_roundtrip():
    cx = tops([(0, 1, 2), (1, 1, 2)])
    back = CubicalComplex.from_json(cx.to_json())
    assert back.all_cells() == cx.all_cells()
    b = homology(cx)
    assert BettiProfile.from_dict(b.to_dict()).same_groups(b)


cell_sets = st.sets(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=10)
cell_sets_3d = st.sets(st.tuples(*(st.integers(0, 2),) * 3), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(cell_sets)
def test_boundary_squares_to_zero(cells):
    assert chain_complex(tops(sorted(cells))).check()


@settings(max_examples=60, deadline=None)
@given(cell_sets)
def test_matches_dense_oracle_2d(cells):
    assert list(homology(tops(sorted(cells))).betti) == betti_oracle(sorted(cells), 2)


@settings(max_examples=25, deadline=None)
@given(cell_sets_3d)
def test_matches_dense_oracle_3d(cells):
    assert list(homology(tops(sorted(cells))).betti) == betti_oracle(sorted(cells), 3)


@settings(max_examples=40, deadline=None)
@given(cell_sets, cell_sets)
def test_relative_matches_oracle(n_cells, l_cells):
    l_cells = l_cells & n_cells
    n = tops(sorted(n_cells), 2)
    lx = tops(sorted(l_cells), 2)
    assert list(relative_homology(n, lx).betti) == betti_oracle(sorted(n_cells), 2, sorted(l_cells))


@settings(max_examples=30, deadline=None)
@given(cell_sets)
def test_subdivision_invariance(cells):
    cx = tops(sorted(cells))
    assert homology(cx.subdivide()).as_tuple() == homology(cx).as_tuple()


@settings(max_examples=20, deadline=None)
@given(cell_sets)
def test_modular_path_agrees(cells):
    cx = tops(sorted(cells))
    exact = homology(cx)
    old = hm.SNF_CELL_LIMIT
    hm.SNF_CELL_LIMIT = -1
    try:
        approx = homology(cx)
    finally:
        hm.SNF_CELL_LIMIT = old
    assert approx.as_tuple() == exact.as_tuple() and not approx.exact
