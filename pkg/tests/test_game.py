from fractions import Fraction as F
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nashconley.game import (
    BimatrixGame,
    GameStructureError,
    MixedProfile,
    best_response_value,
    best_responses,
    deficit,
    dominance_check_km,
    expected_utility,
    is_epsilon_nash,
    km_game,
    matching_pennies,
    perturb_game,
    random_game,
    support_enumeration,
    weakly_dominates,
)

from oracles import grid_equilibria

KM = km_game()


def pure(i, j, m=3, n=3):
    return MixedProfile.pure(m, n, i, j)


# --- construction -----------------------------------------------------------


def test_km_entries():
    assert KM.payoff1[2][2] == -2 and KM.payoff2[2][2] == -2
    assert KM.payoff1[0][0] == 1
    assert KM.shape == (3, 3)
    assert all(isinstance(v, F) for row in KM.payoff1 + KM.payoff2 for v in row)


def test_km_is_symmetric():
    assert KM.payoff2 == tuple(zip(*KM.payoff1))


def test_shape_mismatch_rejected():
    with pytest.raises(GameStructureError):
        BimatrixGame([[1, 2]], [[1], [2]])


def test_profile_validation():
    with pytest.raises(ValueError):
        MixedProfile((F(1, 2), F(1, 3)), (F(1),))
    with pytest.raises(ValueError):
        MixedProfile((F(3, 2), F(-1, 2)), (F(1),))


def test_dimension_mismatch_is_structural():
    with pytest.raises(GameStructureError):
        expected_utility(KM, MixedProfile.uniform(2, 2), 1)


def test_json_roundtrip(tmp_path):
    g = random_game(3, 2, seed=4)
    path = tmp_path / "g.json"
    path.write_text(g.to_json())
    assert BimatrixGame.load(path) == g
    data = json.loads(KM.to_json())
    assert data["m"] == 3 and data["payoff1"][0] == ["1", "0", "-1"]


def test_rational_strings_in_game_file():
    g = BimatrixGame.from_dict({"m": 1, "n": 2, "payoff1": [["1/3", "2"]], "payoff2": [["-5/7", "0"]]})
    assert g.payoff1[0][0] == F(1, 3) and g.payoff2[0][0] == F(-5, 7)


# --- utilities and deficits -------------------------------------------------


def test_expected_utility_pure():
    assert expected_utility(KM, pure(0, 0), 1) == 1
    for i in range(3):
        for j in range(3):
            assert expected_utility(KM, pure(i, j), 1) == KM.payoff1[i][j]
            assert expected_utility(KM, pure(i, j), 2) == KM.payoff2[i][j]


def test_expected_utility_uniform_matches_double_sum():
    u = MixedProfile.uniform(3, 3)
    brute = sum(KM.payoff1[i][j] for i in range(3) for j in range(3)) / 9
    assert expected_utility(KM, u, 1) == brute


def test_best_response_values():
    assert best_response_value(KM, pure(1, 0), 1) == 1
    one = BimatrixGame([[F(7, 3)]], [[F(-1)]])
    assert best_response_value(one, MixedProfile.pure(1, 1, 0, 0), 1) == F(7, 3)
    u = MixedProfile.uniform(3, 3)
    rows = [sum(KM.payoff1[i]) / 3 for i in range(3)]
    assert best_response_value(KM, u, 1) == max(rows)


def test_km_pure_equilibria_have_zero_deficit():
    assert deficit(KM, pure(0, 0)).total == 0
    assert deficit(KM, pure(1, 1)).total == 0
    assert is_epsilon_nash(KM, pure(0, 0), 0)


def test_deviating_profile_rejected_at_027():
    p = MixedProfile((F(0), F(1), F(0)), (F(3, 20), F(17, 20), F(0)))
    d = deficit(KM, p)
    assert d.per_player == (F(3, 10), F(0))
    assert not is_epsilon_nash(KM, p, F(27, 100))
    assert is_epsilon_nash(KM, p, F(3, 10))


def test_negative_eps_rejected():
    with pytest.raises(ValueError):
        is_epsilon_nash(KM, pure(0, 0), F(-1, 100))


def test_best_responses_km_against_e1():
    p = pure(0, 0)
    assert best_responses(KM, p, 1) == (0, 2)
    assert best_responses(KM, p, 2) == (0, 2)


# --- properties ---------------------------------------------------------------


@st.composite
def profiles(draw, m=3, n=3):
    def mix(k):
        w = draw(st.lists(st.integers(0, 20), min_size=k, max_size=k).filter(lambda v: sum(v) > 0))
        s = sum(w)
        return tuple(F(v, s) for v in w)

    return MixedProfile(mix(m), mix(n))


@st.composite
def games(draw, m=3, n=3):
    ints = st.integers(-6, 6)
    p1 = [[draw(ints) for _ in range(n)] for _ in range(m)]
    p2 = [[draw(ints) for _ in range(n)] for _ in range(m)]
    return BimatrixGame(p1, p2)


@settings(max_examples=200, deadline=None)
@given(games(), profiles())
def test_deficit_nonnegative_and_zero_iff_nash(g, p):
    d = deficit(g, p)
    assert d.per_player[0] >= 0 and d.per_player[1] >= 0
    assert d.total == d.per_player[0] + d.per_player[1]
    assert (d.total == 0) == is_epsilon_nash(g, p, 0)


@settings(max_examples=200, deadline=None)
@given(games(), profiles(), st.fractions(0, 5), st.fractions(0, 5))
def test_eps_monotone(g, p, e1, e2):
    lo, hi = sorted((e1, e2))
    if is_epsilon_nash(g, p, lo):
        assert is_epsilon_nash(g, p, hi)


@settings(max_examples=100, deadline=None)
@given(games(), profiles(), st.integers(1, 2), st.fractions(-5, 5))
def test_shift_invariance(g, p, player, c):
    h = g.shifted(player, c)
    other = 3 - player
    assert best_responses(h, p, player) == best_responses(g, p, player)
    assert deficit(h, p).per_player[other - 1] == deficit(g, p).per_player[other - 1]
    assert best_response_value(h, p, player) == best_response_value(g, p, player) + c
    assert expected_utility(h, p, player) == expected_utility(g, p, player) + c
    assert deficit(h, p).per_player[player - 1] == deficit(g, p).per_player[player - 1]


def test_pure_deviation_dominates_mixed_deviations():
    rng = np.random.Generator(np.random.Philox(11))
    a, b = KM.as_float()
    for _ in range(1000):
        x, y = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        pure1 = (a @ y).max()
        pure2 = (x @ b).max()
        dev = rng.dirichlet(np.ones(3), size=1000)
        assert (dev @ a @ y).max() <= pure1 + 1e-12
        assert (x @ b @ dev.T).max() <= pure2 + 1e-12


# --- support enumeration ------------------------------------------------------


def test_matching_pennies_unique_mixed():
    rep = support_enumeration(matching_pennies())
    assert rep.count == 1 and not rep.degenerate_flag
    p = rep.equilibria[0]
    assert p.x == (F(1, 2), F(1, 2)) and p.y == (F(1, 2), F(1, 2))


def test_one_by_one():
    g = BimatrixGame([[3]], [[-2]])
    rep = support_enumeration(g)
    assert rep.count == 1 and rep.equilibria[0] == MixedProfile.pure(1, 1, 0, 0)


def test_km_degenerate_flag():
    rep = support_enumeration(KM)
    assert rep.degenerate_flag
    assert all(is_epsilon_nash(KM, p, 0) for p in rep.equilibria)


def test_nash_report_json():
    data = json.loads(support_enumeration(matching_pennies()).to_json())
    assert data["equilibria"][0]["x"] == ["1/2", "1/2"]
    assert data["degenerate_flag"] is False


def _nondegenerate_games(count, m, n, start=0):
    out, seed = [], start
    while len(out) < count:
        g = random_game(m, n, seed)
        seed += 1
        if not support_enumeration(g).degenerate_flag:
            out.append(g)
    return out


@pytest.mark.parametrize("shape", [(2, 2), (3, 3)])
def test_support_enumeration_matches_grid_oracle(shape):
    for g in _nondegenerate_games(5, *shape, start=100):
        rep = support_enumeration(g)
        found = {(p.x, p.y) for p in rep.equilibria}
        assert found == grid_equilibria(g.payoff1, g.payoff2, 60)
        assert rep.count % 2 == 1


# --- perturbation and dominance -----------------------------------------------


def test_perturb_zero_radius_identity():
    assert perturb_game(KM, 0, seed=3) == KM


def test_perturb_negative_radius():
    with pytest.raises(ValueError):
        perturb_game(KM, F(-1, 10), seed=0)


@pytest.mark.parametrize("seed", range(5))
def test_perturb_norm_and_determinism(seed):
    r = F(9, 1000)
    g = perturb_game(KM, r, seed)
    assert g == perturb_game(KM, r, seed)
    diffs = [a - b for ga, gb in ((g.payoff1, KM.payoff1), (g.payoff2, KM.payoff2)) for ra, rb in zip(ga, gb) for a, b in zip(ra, rb)]
    assert sum(d * d for d in diffs) <= r * r
    assert any(diffs)


@pytest.mark.parametrize("seed", range(3))
def test_km_equilibria_stay_approximate_after_perturbation(seed):
    r = F(1, 50)
    g = perturb_game(KM, r, seed)
    bound = F(math.isqrt(18 * 10**12), 10**6) * r  # below r*sqrt(18)
    for p in support_enumeration(KM).equilibria:
        assert is_epsilon_nash(g, p, bound)
    assert perturb_game(KM, r, seed + 1) != g


def test_dominance_check_km():
    assert dominance_check_km()
    assert weakly_dominates(KM, 1, 0, 1) and weakly_dominates(KM, 1, 0, 2)
    assert weakly_dominates(KM, 2, 0, 1) and weakly_dominates(KM, 2, 0, 2)
    assert not weakly_dominates(KM, 1, 1, 0)


def test_dominance_on_grid():
    a = np.array(KM.payoff1, dtype=object)
    for i in range(0, 41):
        for j in range(0, 41 - i):
            y = np.array([F(i, 40), F(j, 40), F(40 - i - j, 40)], dtype=object)
            u = a.dot(y)
            assert u[0] >= u[1] and u[0] >= u[2]
    e2 = np.array([0, 1, 0], dtype=object)
    assert a.dot(e2)[0] == 0 == a.dot(e2)[1]
