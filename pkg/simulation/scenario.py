"""
Scenario: every input of one experiment (room, bulb, receivers, physical constants,
optimizer settings), loaded from a flat key = value file.
"""

import dataclasses
import io
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv.parser import parse_stream

from simulation.channel import ChannelTensor, compute_channel_tensor
from simulation.geometry import (
    SENSING_POINT,
    USER,
    WALL_NAMES,
    Bulb,
    LedPose,
    ReceiverNode,
    Room,
    build_bulb,
)

REGIMES = ("none", "adjacent", "opposite", "four")
HEURISTICS = ("nua", "ssa-user", "ssa-led")
INTERFERENCE_MODES = ("own", "cross")
DEFAULT_LAYERS = (1, 6, 12, 15, 19, 26, 30, 37, 43, 33, 30, 28, 25, 21, 16, 13, 11, 10, 9, 6)


class ScenarioError(ValueError):
    """Invalid scenario file or value; names the offending key and line when known."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        self.reason = message
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


@dataclass(frozen=True)
class Scenario:
    room_x: float = 6.0
    room_y: float = 6.0
    room_z: float = 3.0
    bulb_radius: float = 0.4
    layers: Tuple[int, ...] = DEFAULT_LAYERS
    divergence_deg: float = 30.0
    half_power_deg: Optional[float] = None
    grid_x: int = 12
    grid_y: int = 6
    regime: str = "four"
    adjacent_walls: Tuple[str, str] = ("XZ", "YZ")
    opposite_walls: Tuple[str, str] = ("XZ", "XZ+rs")
    eta: float = 0.95
    alpha0: float = 169.0
    p_max: float = 0.1
    p_min: float = 0.0
    tau: float = 0.1
    mu: float = 0.7
    phi1: float = 600.0
    phi2: float = 400.0
    bandwidth: float = 20e6
    n0: float = 2.5e-20
    users: int = 6
    sensors: int = 100
    receiver_area: float = 5e-4
    sensor_area: float = 1e-3
    fov_deg: float = 90.0
    sensor_fov_deg: float = 90.0
    user_height: float = 0.0
    seed: int = 1
    trials: int = 100
    heuristic: str = "nua"
    crowd_threshold: Optional[int] = None
    interference: str = "own"
    lux_per_area: bool = True
    node_budget: int = 1_000_000
    time_limit: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(k) for k in self.layers))
        object.__setattr__(self, "adjacent_walls", tuple(self.adjacent_walls))
        object.__setattr__(self, "opposite_walls", tuple(self.opposite_walls))
        self.validate()

    def validate(self):
        def need(ok: bool, key: str, message: str):
            if not ok:
                raise ScenarioError(message, key=key)

        for key in ("room_x", "room_y", "room_z", "bulb_radius", "alpha0", "p_max",
                    "bandwidth", "n0", "receiver_area", "sensor_area"):
            need(getattr(self, key) > 0, key, "must be positive")
        need(self.bulb_radius < min(self.room_x, self.room_y) / 2 and self.bulb_radius < self.room_z,
             "bulb_radius", "bulb does not fit inside the room")
        need(len(self.layers) > 0, "layers", "needs at least one layer")
        need(all(k >= 1 for k in self.layers), "layers", "every layer needs at least one LED")
        need(0 < self.divergence_deg <= 90, "divergence_deg", "must lie in (0, 90]")
        need(self.half_power_deg is None or 0 < self.half_power_deg < 90,
             "half_power_deg", "must lie in (0, 90)")
        need(self.divergence_deg < 90 or self.half_power_deg is not None,
             "half_power_deg", "required when divergence_deg is 90")
        need(self.grid_x >= 1, "grid_x", "must be at least 1")
        need(self.grid_y >= 1, "grid_y", "must be at least 1")
        need(self.regime in REGIMES, "regime", f"must be one of {', '.join(REGIMES)}")
        for key, parallel in (("adjacent_walls", False), ("opposite_walls", True)):
            pair = getattr(self, key)
            need(len(pair) == 2 and all(w in WALL_NAMES for w in pair), key,
                 f"must name two of {', '.join(WALL_NAMES)}")
            a, b = (WALL_NAMES.index(w) for w in pair)
            need(a != b and ((a % 2 == b % 2) == parallel), key,
                 "walls must be parallel" if parallel else "walls must be perpendicular")
        need(0 < self.eta <= 1, "eta", "must lie in (0, 1]")
        need(0 <= self.p_min <= self.p_max, "p_min", "must lie in [0, p_max]")
        need(0 <= self.tau < 1, "tau", "must lie in [0, 1)")
        need(0 < self.mu <= 1, "mu", "must lie in (0, 1]")
        need(self.phi2 >= 0, "phi2", "must be non-negative")
        need(self.phi2 <= self.phi1, "phi2", "lux floor phi2 exceeds lux cap phi1")
        need(self.users >= 0, "users", "must be non-negative")
        side = math.isqrt(max(self.sensors, 0))
        need(self.sensors >= 1 and side * side == self.sensors, "sensors", "must be a perfect square")
        need(0 < self.fov_deg <= 90, "fov_deg", "must lie in (0, 90]")
        need(0 < self.sensor_fov_deg <= 90, "sensor_fov_deg", "must lie in (0, 90]")
        need(0 <= self.user_height < self.room_z - self.bulb_radius, "user_height",
             "must lie between the floor and the bulb")
        need(self.seed >= 0, "seed", "must be non-negative")
        need(self.trials >= 1, "trials", "must be at least 1")
        need(self.heuristic in HEURISTICS, "heuristic", f"must be one of {', '.join(HEURISTICS)}")
        need(self.crowd_threshold is None or self.crowd_threshold >= 1,
             "crowd_threshold", "must be at least 1")
        need(self.interference in INTERFERENCE_MODES, "interference", "must be own or cross")
        need(self.node_budget >= 1, "node_budget", "must be at least 1")
        need(self.time_limit is None or self.time_limit > 0, "time_limit", "must be positive")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    @property
    def num_leds(self) -> int:
        return int(sum(self.layers))

    @property
    def noise_power(self) -> float:
        return self.n0 * self.bandwidth

    @property
    def effective_crowd_threshold(self) -> int:
        if self.crowd_threshold is not None:
            return self.crowd_threshold
        return max(1, math.ceil(0.03 * self.users))

    @cached_property
    def room(self) -> Room:
        return Room(self.room_x, self.room_y, self.room_z, self.grid_x, self.grid_y)

    @cached_property
    def bulb(self) -> Bulb:
        half_power = None if self.half_power_deg is None else math.radians(self.half_power_deg)
        return Bulb(
            center=(self.room_x / 2, self.room_y / 2, self.room_z),
            radius=self.bulb_radius,
            layer_counts=self.layers,
            divergence=math.radians(self.divergence_deg),
            half_power_semiangle=half_power,
        )

    @cached_property
    def leds(self) -> Tuple[LedPose, ...]:
        return tuple(build_bulb(self.bulb))

    @cached_property
    def sensing_points(self) -> Tuple[ReceiverNode, ...]:
        """Square lattice on the floor, inset half a cell from the walls, facing up."""
        side = math.isqrt(self.sensors)
        fov = math.radians(self.sensor_fov_deg)
        points = []
        for j in range(side):
            for i in range(side):
                position = ((i + 0.5) * self.room_x / side, (j + 0.5) * self.room_y / side, 0.0)
                points.append(
                    ReceiverNode(j * side + i, SENSING_POINT, position, (0, 0, 1), self.sensor_area, fov)
                )
        return tuple(points)

    @cached_property
    def sensor_tensor(self) -> ChannelTensor:
        return build_channel_tensor(self)

    def allowed_walls(self, regime: Optional[str] = None) -> Tuple[int, ...]:
        regime = self.regime if regime is None else regime
        if regime not in REGIMES:
            raise ScenarioError(f"Unknown mirror regime {regime!r}", key="regime")
        if regime == "none":
            return ()
        if regime == "adjacent":
            return tuple(sorted(WALL_NAMES.index(w) for w in self.adjacent_walls))
        if regime == "opposite":
            return tuple(sorted(WALL_NAMES.index(w) for w in self.opposite_walls))
        return (0, 1, 2, 3)


def build_channel_tensor(scenario: Scenario, users: Sequence[ReceiverNode] = ()) -> ChannelTensor:
    """Channel tensor over all LEDs and all wall cells; node columns are users then sensing points."""
    nodes = list(users) + list(scenario.sensing_points)
    return compute_channel_tensor(scenario.leds, nodes, scenario.room, scenario.eta)


def build_user_tensor(scenario: Scenario, users: Sequence[ReceiverNode]) -> ChannelTensor:
    return compute_channel_tensor(scenario.leds, list(users), scenario.room, scenario.eta)


def place_users(scenario: Scenario, rng: np.random.Generator) -> List[ReceiverNode]:
    """Users i.i.d. uniform on the floor (at user_height), PD facing the ceiling."""
    if scenario.users == 0:
        return []
    xy = rng.uniform(low=(0.0, 0.0), high=(scenario.room_x, scenario.room_y), size=(scenario.users, 2))
    fov = math.radians(scenario.fov_deg)
    return [
        ReceiverNode(u, USER, (x, y, scenario.user_height), (0, 0, 1), scenario.receiver_area, fov)
        for u, (x, y) in enumerate(xy)
    ]


def _optional(convert: Callable):
    def parse(text: str):
        return None if text.strip() == "" else convert(text)
    return parse


def _int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in text.replace(" ", "").split(",") if part)


def _wall_pair(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _converters() -> Dict[str, Callable]:
    converters: Dict[str, Callable] = {}
    for f in dataclasses.fields(Scenario):
        default = f.default
        if f.name == "layers":
            converters[f.name] = _int_list
        elif f.name in ("adjacent_walls", "opposite_walls"):
            converters[f.name] = _wall_pair
        elif f.name == "half_power_deg" or f.name == "time_limit":
            converters[f.name] = _optional(float)
        elif f.name == "crowd_threshold":
            converters[f.name] = _optional(_int)
        elif isinstance(default, bool):
            converters[f.name] = _bool
        elif isinstance(default, int):
            converters[f.name] = _int
        elif isinstance(default, float):
            converters[f.name] = float
        else:
            converters[f.name] = lambda text: text.strip().lower()
    return converters


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; missing keys keep their defaults."""
    converters = _converters()
    values = {}
    lines = {}
    for binding in parse_stream(io.StringIO(text)):
        line = binding.original.line
        if binding.error:
            raise ScenarioError("Cannot parse line", line=line)
        if binding.key is None:
            continue
        key = binding.key.strip().lower()
        if binding.value is None:
            raise ScenarioError("Missing '=' and value", key=key, line=line)
        if key not in converters:
            raise ScenarioError("Unknown key", key=key, line=line)
        if key in values:
            raise ScenarioError(f"Duplicate key (first set on line {lines[key]})", key=key, line=line)
        try:
            values[key] = converters[key](binding.value)
        except ValueError as e:
            raise ScenarioError(f"Bad value {binding.value!r}: {e}", key=key, line=line) from e
        lines[key] = line

    try:
        return Scenario(**values)
    except ScenarioError as e:
        if e.key in lines:
            raise ScenarioError(e.reason, key=e.key, line=lines[e.key]) from e
        raise


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"))
