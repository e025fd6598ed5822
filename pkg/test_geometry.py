"""
Tests for the bulb layout, wall grid, beam cones and mirror-image paths.
"""

import math

import numpy as np
import pytest

from simulation.geometry import (
    SENSING_POINT,
    USER,
    Bulb,
    GeometryError,
    LedPose,
    ReceiverNode,
    Room,
    axis_distance,
    beam_covers,
    build_bulb,
    mirror_image,
    mirror_path,
    reflection_area,
)
from simulation.scenario import DEFAULT_LAYERS


def nadir_led(position=(3.0, 3.0, 3.0), divergence_deg=30.0) -> LedPose:
    return LedPose(0, position, (0, 0, -1), divergence=math.radians(divergence_deg))


def test_single_layer_bulb_is_one_nadir_led():
    leds = build_bulb(Bulb(center=(3, 3, 3), radius=0.4, layer_counts=(1,)))
    assert len(leds) == 1
    np.testing.assert_allclose(leds[0].orientation, [0, 0, -1], atol=1e-15)
    np.testing.assert_allclose(leds[0].position, [3, 3, 2.6], atol=1e-15)


def test_full_bulb_has_391_leds():
    leds = build_bulb(Bulb(center=(3, 3, 3), layer_counts=DEFAULT_LAYERS))
    assert len(leds) == 391
    assert [led.index for led in leds] == list(range(391))
    for led in leds:
        assert np.linalg.norm(led.position - np.array([3, 3, 3])) == pytest.approx(0.4)
        assert led.orientation[2] <= 1e-12


def test_second_layer_shares_polar_angle_and_splits_azimuth():
    leds = build_bulb(Bulb(center=(0, 0, 3), layer_counts=(1, 4)))
    ring = leds[1:]
    polar = [math.acos(-led.orientation[2]) for led in ring]
    np.testing.assert_allclose(polar, [math.pi / 4] * 4, atol=1e-12)
    flat = [led.orientation[:2] / np.linalg.norm(led.orientation[:2]) for led in ring]
    for a, b in zip(flat, flat[1:] + flat[:1]):
        assert np.dot(a, b) == pytest.approx(0.0, abs=1e-12)
    assert all(led.layer == 1 for led in ring)


@pytest.mark.parametrize(
    "bulb",
    [
        Bulb(center=(3, 3, 3), radius=0.0),
        Bulb(center=(3, 3, 3), layer_counts=()),
        Bulb(center=(3, 3, 3), layer_counts=(1, 0)),
        Bulb(center=(3, 3, 3), divergence=0.0),
    ],
)
def test_degenerate_bulbs_are_rejected(bulb):
    with pytest.raises(GeometryError):
        build_bulb(bulb)


def test_beam_cone_membership():
    led = nadir_led()
    assert beam_covers(led, (3, 3, 0))
    assert beam_covers(led, (3 + 3 * math.tan(math.radians(29)), 3, 0))
    assert not beam_covers(led, (3 + 3 * math.tan(math.radians(31)), 3, 0))
    assert not beam_covers(led, (3, 3, 4))
    assert not beam_covers(led, (3, 3, 3))


def test_cell_index_layout():
    room = Room(6, 6, 3)
    assert room.num_cells == 288
    assert room.cell_index(2, 3, 1) == 2 * 72 + 1 * 12 + 3
    for z in (0, 13, 100, 287):
        assert room.cell_index(*room.cell_location(z)) == z
    np.testing.assert_allclose(room.cell_center(0), [0.25, 0.0, 0.25])
    np.testing.assert_allclose(room.cell_center(room.cell_index(3, 0, 5)), [6.0, 0.25, 2.75])
    with pytest.raises(GeometryError):
        room.cell_location(288)


def test_room_rejects_non_positive_dimensions():
    with pytest.raises(GeometryError):
        Room(0, 6, 3)
    with pytest.raises(GeometryError):
        Room(6, 6, 3, grid_x=0)


def test_mirror_image_across_walls():
    room = Room(6, 6, 3)
    np.testing.assert_allclose(mirror_image((1, 2, 0.5), room.walls[1]), [-1, 2, 0.5])
    np.testing.assert_allclose(mirror_image((3, 3, 1), room.walls[2]), [3, 9, 1])


def test_nadir_led_has_no_reflection_area():
    assert reflection_area(nadir_led(), Room(6, 6, 3)) == frozenset()


def test_horizontal_led_reflection_area_matches_cone_test():
    room = Room(6, 6, 3)
    led = LedPose(0, (3, 3, 1.5), (-1, 0, 0), divergence=math.radians(30))
    expected = set()
    for z in range(room.num_cells):
        offset = room.cell_center(z) - led.position
        cos_angle = np.dot(offset, led.orientation) / np.linalg.norm(offset)
        if cos_angle > 0 and cos_angle >= math.cos(math.radians(30)) - 1e-12:
            expected.add(z)
    area = reflection_area(led, room)
    assert area == expected
    assert area
    assert all(room.cell_location(z)[0] == 1 for z in area)


def test_symmetric_mirror_path_has_equal_angles():
    room = Room(6, 6, 3)
    z = room.cell_index(1, 5, 2)
    np.testing.assert_allclose(room.cell_center(z), [0, 2.75, 1.25])
    led = LedPose(0, (1, 2.25, 1.25), (-1, 0.5, 0), divergence=math.radians(30))
    rx = ReceiverNode(0, USER, (1, 3.25, 1.25), (-1, -0.5, 0), 5e-4, math.pi / 2)
    path = mirror_path(led, z, rx, room)
    assert path.valid
    np.testing.assert_allclose(path.reflection_point, [0, 2.75, 1.25], atol=1e-12)
    assert path.irradiance_angle == pytest.approx(path.incidence_angle, abs=1e-7)
    assert path.total_distance == pytest.approx(math.sqrt(5))


def test_mirror_path_outside_cone_is_invalid():
    room = Room(6, 6, 3)
    z = room.cell_index(1, 5, 2)
    led = LedPose(0, (1, 2.25, 1.25), (1, 0, 0), divergence=math.radians(30))
    rx = ReceiverNode(0, SENSING_POINT, (1, 3.25, 1.25), (-1, -0.5, 0), 1e-3, math.pi / 2)
    assert not mirror_path(led, z, rx, room).valid


def test_mirror_path_through_wrong_cell_is_invalid():
    room = Room(6, 6, 3)
    led = LedPose(0, (1, 2.25, 1.25), (-1, 0.5, 0), divergence=math.radians(30))
    rx = ReceiverNode(0, USER, (1, 3.25, 1.25), (-1, -0.5, 0), 5e-4, math.pi / 2)
    assert not mirror_path(led, room.cell_index(1, 0, 0), rx, room).valid


def test_mirror_image_is_an_involution():
    room = Room(6, 6, 3)
    rng = np.random.default_rng(17)
    for point in rng.uniform((-2, -2, 0), (8, 8, 3), size=(50, 3)):
        for wall in room.walls:
            np.testing.assert_allclose(mirror_image(mirror_image(point, wall), wall), point, rtol=0, atol=1e-12)


def test_mirror_path_length_is_the_sum_of_both_legs():
    rng = np.random.default_rng(23)
    room = Room(6, 6, 3)
    checked = 0
    for _ in range(200):
        led = LedPose(0, rng.uniform((0.5, 0.5, 1.0), (5.5, 5.5, 2.9)), rng.normal(size=3),
                      divergence=math.radians(50))
        rx = ReceiverNode(0, USER, rng.uniform((0.2, 0.2, 0.0), (5.8, 5.8, 1.0)), rng.normal(size=3), 5e-4,
                          math.pi / 2)
        for z in sorted(reflection_area(led, room)):
            path = mirror_path(led, z, rx, room)
            if not path.valid:
                continue
            legs = (np.linalg.norm(path.reflection_point - led.position)
                    + np.linalg.norm(rx.position - path.reflection_point))
            assert path.total_distance == pytest.approx(legs, rel=1e-12)
            checked += 1
    assert checked > 0


def test_axis_distance():
    led = nadir_led()
    assert axis_distance(led, (4, 3, 0)) == pytest.approx(1.0)
    assert axis_distance(led, (3, 3, 0)) == pytest.approx(0.0)
    # behind the LED the distance is to the LED itself
    assert axis_distance(led, (3, 4, 4)) == pytest.approx(math.sqrt(2))


def test_receiver_validation():
    with pytest.raises(GeometryError):
        ReceiverNode(0, "camera", (1, 1, 0), (0, 0, 1), 5e-4, 1.0)
    with pytest.raises(GeometryError):
        ReceiverNode(0, USER, (1, 1, 0), (0, 0, 1), 0.0, 1.0)
    with pytest.raises(GeometryError):
        ReceiverNode(0, USER, (1, 1, 0), (0, 0, 0), 5e-4, 1.0)
