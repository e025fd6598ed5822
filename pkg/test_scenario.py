"""
Tests for scenario files, validation and user placement.
"""

import math

import numpy as np
import pytest

from simulation.geometry import SENSING_POINT, USER
from simulation.scenario import (
    DEFAULT_LAYERS,
    Scenario,
    ScenarioError,
    load_scenario,
    parse_scenario,
    place_users,
)


def test_empty_file_gives_default_scenario(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("", encoding="utf-8")
    scenario = load_scenario(path)
    assert scenario == Scenario()
    assert scenario.num_leds == 391
    assert scenario.layers == DEFAULT_LAYERS
    assert scenario.room.num_cells == 288
    assert (scenario.p_max, scenario.mu, scenario.phi1, scenario.phi2) == (0.1, 0.7, 600.0, 400.0)


def test_single_override_keeps_other_defaults():
    scenario = parse_scenario("users = 6\n")
    assert scenario.users == 6
    assert scenario.replace(users=6) == Scenario(users=6)


def test_values_of_every_kind_are_parsed():
    text = "\n".join([
        "# desk profile",
        "layers = 1, 6, 12",
        "divergence_deg = 40",
        "adjacent_walls = YZ,XZ+rs",
        "lux_per_area = false",
        "crowd_threshold = 2",
        "time_limit = 30",
        "heuristic = SSA-User",
        "half_power_deg =",
        "",
    ])
    scenario = parse_scenario(text)
    assert scenario.layers == (1, 6, 12)
    assert scenario.divergence_deg == 40.0
    assert scenario.adjacent_walls == ("YZ", "XZ+rs")
    assert scenario.lux_per_area is False
    assert scenario.crowd_threshold == 2
    assert scenario.time_limit == 30.0
    assert scenario.heuristic == "ssa-user"
    assert scenario.half_power_deg is None


def test_inverted_lux_window_is_rejected_with_its_line():
    with pytest.raises(ScenarioError) as caught:
        parse_scenario("phi2 = 700\nphi1 = 600\n")
    assert caught.value.key == "phi2"
    assert caught.value.line == 1


@pytest.mark.parametrize(
    "text, key",
    [
        ("colour = blue\n", "colour"),
        ("users = many\n", "users"),
        ("users = 2\nusers = 3\n", "users"),
        ("mu = 1.5\n", "mu"),
        ("sensors = 10\n", "sensors"),
        ("regime = ceiling\n", "regime"),
        ("adjacent_walls = XZ,XZ+rs\n", "adjacent_walls"),
        ("opposite_walls = XZ,YZ\n", "opposite_walls"),
        ("p_min = 0.5\n", "p_min"),
    ],
)
def test_bad_keys_and_values_name_the_key(text, key):
    with pytest.raises(ScenarioError) as caught:
        parse_scenario(text)
    assert caught.value.key == key
    assert caught.value.line is not None


def test_line_without_value_is_rejected():
    with pytest.raises(ScenarioError) as caught:
        parse_scenario("users = 2\nseed\n")
    assert caught.value.line == 2


def test_replace_validates():
    with pytest.raises(ScenarioError):
        Scenario().replace(eta=1.5)


def test_allowed_walls_per_regime():
    scenario = Scenario()
    assert scenario.allowed_walls("none") == ()
    assert scenario.allowed_walls("adjacent") == (0, 1)
    assert scenario.allowed_walls("opposite") == (0, 2)
    assert scenario.allowed_walls("four") == (0, 1, 2, 3)
    with pytest.raises(ScenarioError):
        scenario.allowed_walls("ceiling")


def test_sensing_points_form_a_square_lattice():
    scenario = Scenario(sensors=9, room_x=6, room_y=3)
    points = scenario.sensing_points
    assert len(points) == 9
    assert all(p.kind == SENSING_POINT for p in points)
    np.testing.assert_allclose(points[0].position, [1.0, 0.5, 0.0])
    np.testing.assert_allclose(points[5].position, [5.0, 1.5, 0.0])


def test_place_users_is_reproducible():
    scenario = Scenario(users=5)
    a = place_users(scenario, np.random.default_rng(42))
    b = place_users(scenario, np.random.default_rng(42))
    assert [tuple(u.position) for u in a] == [tuple(u.position) for u in b]
    for user in a:
        assert user.kind == USER
        assert user.pd_area == 5e-4
        np.testing.assert_array_equal(user.pd_normal, [0, 0, 1])
        assert user.position[2] == 0.0
    assert place_users(scenario.replace(users=0), np.random.default_rng(42)) == []


def test_placement_mean_is_room_centre():
    scenario = Scenario(users=10_000)
    users = place_users(scenario, np.random.default_rng(0))
    xy = np.array([u.position[:2] for u in users])
    sigma = 6.0 / math.sqrt(12) / math.sqrt(len(users))
    assert np.all(np.abs(xy.mean(axis=0) - 3.0) < 3 * sigma)
    assert np.all((xy >= 0) & (xy <= 6))


def test_crowd_threshold_default():
    assert Scenario(users=6).effective_crowd_threshold == 1
    assert Scenario(users=40).effective_crowd_threshold == 2
    assert Scenario(users=6, crowd_threshold=3).effective_crowd_threshold == 3
