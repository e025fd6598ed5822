"""
Tests for SINR and throughput, the three assignment heuristics and the exhaustive assigner.
"""

import itertools
import math
import time

import numpy as np
import pytest

from optimizers.brute_force_assigner import ExhaustiveAssigner, brute_force_assign
from optimizers.design_model import ModelError
from optimizers.link_budget import (
    UNASSIGNED,
    LinkBudget,
    boosted_power,
    contested_power,
    kappa_ratio,
    min_sinr,
    sinr,
    sinr_vector,
    throughput,
)
from optimizers.nua_assigner import NearestUserAssigner, nua_assign
from optimizers.ssa_led_assigner import StrongestSignalLedAssigner, default_crowd_threshold, ssa_led_assign
from optimizers.ssa_user_assigner import StrongestSignalUserAssigner, ssa_user_assign
from tiny_instances import random_link, random_prev_powers

NOISE = 5e-13
TAU = 0.1


def heuristics(num_users):
    order = np.random.default_rng(num_users).permutation(num_users)
    return [NearestUserAssigner(), StrongestSignalUserAssigner(order), StrongestSignalLedAssigner()]


def test_single_user_sinr_has_no_interference():
    link = LinkBudget.from_arrays([[2e-5]], noise=NOISE)
    assert sinr(0, [0], [0.08], link) == pytest.approx((2e-5 * 0.08) ** 2 / NOISE)


def test_user_without_leds_has_zero_sinr():
    link = LinkBudget.from_arrays([[2e-5, 1e-5]], noise=NOISE)
    gamma = sinr_vector([0], [0.08], link)
    assert gamma[1] == 0.0
    assert gamma[0] > 0


@pytest.mark.parametrize("interference", ["own", "cross"])
def test_two_user_sinr_matches_formula(interference):
    a, b, c, d = 3e-5, 1e-5, 2e-5, 4e-5
    p0, p1 = 0.07, 0.09
    link = LinkBudget.from_arrays([[a, b], [c, d]], noise=NOISE, interference=interference)
    gamma = sinr_vector([0, 1], [p0, p1], link)
    if interference == "own":
        expected = [(a * p0) ** 2 / (NOISE + (d * p1) ** 2), (d * p1) ** 2 / (NOISE + (a * p0) ** 2)]
    else:
        expected = [(a * p0) ** 2 / (NOISE + (c * p1) ** 2), (d * p1) ** 2 / (NOISE + (b * p0) ** 2)]
    np.testing.assert_allclose(gamma, expected, rtol=1e-12)


def test_throughput_examples():
    assert throughput(0.0, 20e6) == 0.0
    assert throughput(1.0, 20e6) == pytest.approx(20e6)
    assert throughput(3.0, 20e6) == pytest.approx(2 * throughput(1.0, 20e6))
    with pytest.raises(ValueError):
        throughput(-1.0, 20e6)


def test_power_rules():
    assert boosted_power(0.05, TAU, 0.1) == pytest.approx(0.055)
    assert boosted_power(0.095, TAU, 0.1) == 0.1
    assert contested_power(0.05, 2.0, TAU) == pytest.approx(0.045)
    assert contested_power(0.05, 0.04, TAU) == pytest.approx(0.048)
    assert contested_power(0.05, 1.0, TAU) == 0.05 * (1 - TAU)
    assert kappa_ratio(1.0, 0.0) == math.inf


def test_nua_with_no_users_keeps_illumination_duty():
    link = LinkBudget.from_arrays(np.zeros((3, 0)), noise=NOISE)
    P_prev = np.array([0.05, 0.095, 0.0])
    result = nua_assign(link, P_prev)
    assert list(result.eps) == [UNASSIGNED] * 3
    np.testing.assert_allclose(result.powers, [0.055, 0.1, 0.0])
    assert math.isnan(result.avg_throughput)


def test_nua_single_covered_user():
    link = LinkBudget.from_arrays([[2e-5], [0.0]], noise=NOISE)
    result = nua_assign(link, [0.05, 0.05])
    assert list(result.eps) == [0, UNASSIGNED]
    np.testing.assert_allclose(result.powers, [0.055, 0.055])


def test_nua_crowded_beams_go_to_axis_nearest_user():
    gains = np.array([[3e-5, 2e-5, 1e-5], [2e-5, 3e-5, 2e-5], [1e-5, 2e-5, 3e-5]])
    axis = np.array([[0.1, 0.5, 0.9], [0.6, 0.2, 0.7], [0.9, 0.4, 0.3]])
    P_prev = np.array([0.05, 0.06, 0.07])
    link = LinkBudget.from_arrays(gains, noise=NOISE, axis_distance=axis, interference="cross")
    result = nua_assign(link, P_prev)
    assert list(result.eps) == [0, 1, 2]

    # second-nearest user sets kappa
    kappas = [gains[0, 1] / gains[0, 0], gains[1, 0] / gains[1, 1], gains[2, 1] / gains[2, 2]]
    expected_powers = [max(p * (1 - k), p * (1 - TAU)) for p, k in zip(P_prev, kappas)]
    np.testing.assert_allclose(result.powers, expected_powers)

    P = result.powers
    expected = (gains[0, 0] * P[0]) ** 2 / (NOISE + (gains[1, 0] * P[1]) ** 2 + (gains[2, 0] * P[2]) ** 2)
    assert result.per_user_sinr[0] == pytest.approx(expected, rel=1e-12)


def test_nua_tie_goes_to_lower_user_index():
    link = LinkBudget.from_arrays([[1e-5, 2e-5]], noise=NOISE, axis_distance=[[0.3, 0.3]])
    assert list(nua_assign(link, [0.05]).eps) == [0]


def test_ssa_user_disjoint_beams_are_fully_served():
    link = LinkBudget.from_arrays([[2e-5, 0.0], [0.0, 2e-5]], noise=NOISE)
    result = ssa_user_assign(link, [0.05, 0.05])
    assert list(result.eps) == [0, 1]
    np.testing.assert_allclose(result.powers, [0.055, 0.055])


def test_ssa_user_conflict_on_strongest_led():
    # both users see L1 strongest; user 0 only sees L1
    gains = np.array([[5e-6, 4e-6], [0.0, 2e-6]])
    link = LinkBudget.from_arrays(gains, noise=NOISE)
    result = ssa_user_assign(link, [0.05, 0.05], order=[0, 1])
    assert list(result.eps) == [0, 1]
    # kappa = 4/2 >= 1 clamps the free LED to P(1 - tau)
    np.testing.assert_allclose(result.powers, [0.055, 0.045])

    reversed_order = ssa_user_assign(link, [0.05, 0.05], order=[1, 0])
    assert list(reversed_order.eps) == [1, 1]
    assert reversed_order.per_user_sinr[0] == 0.0


def test_ssa_user_rejects_bad_order():
    link = LinkBudget.from_arrays([[2e-5, 0.0]], noise=NOISE)
    with pytest.raises(ValueError):
        ssa_user_assign(link, [0.05], order=[0, 0])


def test_ssa_led_single_user_is_boosted():
    link = LinkBudget.from_arrays([[2e-5, 0.0]], noise=NOISE)
    result = ssa_led_assign(link, [0.05])
    assert list(result.eps) == [0]
    assert result.powers[0] == pytest.approx(0.055)


def test_ssa_led_crowded_led_stays_on_illumination():
    link = LinkBudget.from_arrays([[2e-5, 1e-5, 3e-5], [0.0, 1e-5, 0.0]], noise=NOISE)
    result = ssa_led_assign(link, [0.05, 0.08], crowd_threshold=2)
    assert list(result.eps) == [UNASSIGNED, 1]
    np.testing.assert_allclose(result.powers, [0.055, 0.088])


def test_ssa_led_equal_strength_gives_exact_discount():
    link = LinkBudget.from_arrays([[2e-5, 2e-5]], noise=NOISE)
    result = ssa_led_assign(link, [0.05], crowd_threshold=2)
    assert list(result.eps) == [0]
    assert result.powers[0] == 0.05 * (1 - TAU)


def test_default_crowd_threshold():
    assert default_crowd_threshold(6) == 1
    assert default_crowd_threshold(33) == 1
    assert default_crowd_threshold(34) == 2
    link = LinkBudget.from_arrays([[2e-5, 1e-5]], noise=NOISE)
    assert list(ssa_led_assign(link, [0.05]).eps) == [UNASSIGNED]


def test_exhaustive_single_user_takes_every_covering_led():
    link = LinkBudget.from_arrays([[2e-5], [1e-5], [0.0]], noise=NOISE)
    result = brute_force_assign(link, [0.05, 0.05, 0.05])
    assert list(result.eps) == [0, 0, UNASSIGNED]
    np.testing.assert_allclose(result.powers[:2], [0.055, 0.055])


def test_exhaustive_symmetric_instance_has_symmetric_optimum():
    link = LinkBudget.from_arrays([[3e-5, 1e-5], [1e-5, 3e-5]], noise=NOISE)
    result = brute_force_assign(link, [0.05, 0.05])
    assert list(result.eps) == [0, 1]
    assert result.per_user_sinr[0] == pytest.approx(result.per_user_sinr[1], rel=1e-12)
    assert min_sinr(result) == result.per_user_sinr.min()


def test_exhaustive_guard():
    with pytest.raises(ModelError):
        brute_force_assign(LinkBudget.from_arrays(np.full((9, 1), 1e-5)), np.full(9, 0.05))
    with pytest.raises(ModelError):
        brute_force_assign(LinkBudget.from_arrays(np.full((2, 4), 1e-5)), np.full(2, 0.05))


def test_exhaustive_dominates_every_heuristic():
    rng = np.random.default_rng(77)
    shapes = [(2, 1), (3, 2), (4, 3), (5, 2), (6, 3), (8, 2), (8, 3)]
    start = time.perf_counter()
    for i in range(50):
        M, U = shapes[i % len(shapes)]
        link = random_link(rng, M, U, interference="own" if i % 2 == 0 else "cross")
        P_prev = random_prev_powers(rng, M)
        oracle = ExhaustiveAssigner().assign(link, P_prev)
        for assigner in heuristics(U):
            result = assigner.assign(link, P_prev)
            assert oracle.min_sinr >= result.min_sinr * (1 - 1e-9), assigner.name
    assert time.perf_counter() - start < 120.0


def enumerate_max_min(link, P_prev):
    """Plain enumeration of the exhaustive assigner's search space, lexicographic eps order."""
    levels = ExhaustiveAssigner().power_levels(link, P_prev)
    options = [[(UNASSIGNED, 0.0)] + [(int(u), p) for u in np.flatnonzero(link.covered[m]) for p in levels[m]]
               for m in range(link.num_leds)]
    best_value, best_eps = -np.inf, None
    for choice in itertools.product(*options):
        eps = [k for k, _ in choice]
        powers = [p for _, p in choice]
        value = sinr_vector(eps, powers, link).min()
        if value > best_value:
            best_value, best_eps = value, eps
    return best_value, best_eps


def test_exhaustive_matches_plain_enumeration():
    rng = np.random.default_rng(21)
    for i in range(12):
        M, U = [(2, 2), (3, 2), (3, 3), (2, 3)][i % 4]
        link = random_link(rng, M, U, interference="own" if i % 2 == 0 else "cross", coverage=0.8)
        P_prev = random_prev_powers(rng, M)
        value, eps = enumerate_max_min(link, P_prev)
        result = brute_force_assign(link, P_prev)
        assert result.min_sinr == pytest.approx(value, rel=1e-9, abs=1e-300)
        if value > 0:
            assert list(result.eps) == eps


def test_exhaustive_grid_holds_every_heuristic_power():
    rng = np.random.default_rng(13)
    for i in range(40):
        M, U = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        link = random_link(rng, M, U)
        P_prev = random_prev_powers(rng, M)
        levels = ExhaustiveAssigner().power_levels(link, P_prev)
        assert all(lv.size <= 3 + 2 + U for lv in levels)
        for assigner in heuristics(U):
            result = assigner.assign(link, P_prev)
            for m in np.flatnonzero(result.eps != UNASSIGNED):
                assert result.powers[m] in set(levels[m]), (assigner.name, m)


def test_exhaustive_handles_the_largest_guarded_size():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    for i in range(10):
        link = random_link(rng, 8, 3, interference="own" if i % 2 == 0 else "cross", coverage=1.0)
        P_prev = random_prev_powers(rng, 8)
        oracle = ExhaustiveAssigner()
        result = oracle.assign(link, P_prev)
        assert oracle.nodes_explored > 0
        for assigner in heuristics(3):
            assert result.min_sinr >= assigner.assign(link, P_prev).min_sinr * (1 - 1e-9), assigner.name
    assert time.perf_counter() - start < 60.0


def test_heuristics_respect_association_and_power_box():
    rng = np.random.default_rng(5)
    for i in range(30):
        M, U = int(rng.integers(1, 12)), int(rng.integers(1, 8))
        link = random_link(rng, M, U)
        P_prev = random_prev_powers(rng, M)
        for assigner in heuristics(U):
            result = assigner.assign(link, P_prev)
            assigned = result.eps != UNASSIGNED
            assert np.all((result.eps >= UNASSIGNED) & (result.eps < U))
            assert np.all(link.covered[np.flatnonzero(assigned), result.eps[assigned]])
            assert np.all((result.powers >= 0) & (result.powers <= link.p_max))
            # illumination-only LEDs keep min(P(1 + tau), Pmax)
            idle = ~assigned
            np.testing.assert_allclose(
                result.powers[idle], np.minimum(P_prev[idle] * (1 + TAU), link.p_max)
            )
            # every power stays within tau of its stage-1 value
            assert np.all(result.powers >= P_prev * (1 - TAU) - 1e-15)
            assert np.all(result.powers <= P_prev * (1 + TAU) + 1e-15)


def test_heuristics_reject_mismatched_prev_powers():
    link = LinkBudget.from_arrays([[2e-5]], noise=NOISE)
    for assigner in heuristics(1):
        with pytest.raises(ValueError):
            assigner.assign(link, [0.05, 0.05])
        with pytest.raises(ValueError):
            assigner.assign(link, [0.5])
