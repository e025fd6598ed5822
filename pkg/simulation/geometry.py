"""
Geometry: the hemispherical multi-element bulb, room walls with their mirror grids,
beam cone tests and single-bounce mirror-image paths.

Coordinates are metres with the floor at z = 0. Walls are indexed
0 = XZ (y = 0), 1 = YZ (x = 0), 2 = XZ+rs (y = depth), 3 = YZ+rs (x = width).
A wall grid cell has index z = wall * X * Y + row * X + column, row 0 at the floor.
"""

import math
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
WALL_NAMES = ("XZ", "YZ", "XZ+rs", "YZ+rs")
USER = "user"
SENSING_POINT = "sensing-point"

# slack for boundary tests (cone edge, cell edge, FOV edge)
ANGLE_SLACK = 1e-12


class GeometryError(ValueError):
    """Raised for degenerate geometry: zero radius, empty layers, coincident points."""


def _vec(values) -> np.ndarray:
    v = np.array(values, dtype=float).reshape(3)
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class Wall:
    index: int
    name: str
    anchor: np.ndarray
    normal: np.ndarray  # unit, pointing into the room
    u_axis: np.ndarray  # horizontal, along the wall
    v_axis: np.ndarray  # vertical
    length: float
    height: float


@dataclass(frozen=True, eq=False)
class Room:
    """Box room with every wall split into a grid_x by grid_y mirror grid."""

    width_x: float
    depth_y: float
    height_z: float
    grid_x: int = 12
    grid_y: int = 6
    walls: Tuple[Wall, ...] = field(init=False, repr=False, default=())
    _centers: Optional[np.ndarray] = field(init=False, repr=False, default=None)

    def __post_init__(self):
        for name in ("width_x", "depth_y", "height_z"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"Room dimension {name} must be positive")
        if self.grid_x < 1 or self.grid_y < 1:
            raise GeometryError("Wall grid needs at least one cell per axis")
        W, D, H = float(self.width_x), float(self.depth_y), float(self.height_z)
        up = _vec((0, 0, 1))
        walls = (
            Wall(0, WALL_NAMES[0], _vec((0, 0, 0)), _vec((0, 1, 0)), _vec((1, 0, 0)), up, W, H),
            Wall(1, WALL_NAMES[1], _vec((0, 0, 0)), _vec((1, 0, 0)), _vec((0, 1, 0)), up, D, H),
            Wall(2, WALL_NAMES[2], _vec((0, D, 0)), _vec((0, -1, 0)), _vec((1, 0, 0)), up, W, H),
            Wall(3, WALL_NAMES[3], _vec((W, 0, 0)), _vec((-1, 0, 0)), _vec((0, 1, 0)), up, D, H),
        )
        object.__setattr__(self, "walls", walls)
        centers = np.array([self._center(z) for z in range(self.num_cells)]).reshape(-1, 3)
        centers.setflags(write=False)
        object.__setattr__(self, "_centers", centers)

    @property
    def cells_per_wall(self) -> int:
        return self.grid_x * self.grid_y

    @property
    def num_cells(self) -> int:
        return 4 * self.cells_per_wall

    def cell_location(self, z: int) -> Tuple[int, int, int]:
        """Map cell index z to (wall, column, row)."""
        if not 0 <= z < self.num_cells:
            raise GeometryError(f"Cell index {z} outside [0, {self.num_cells})")
        wall, rest = divmod(int(z), self.cells_per_wall)
        row, column = divmod(rest, self.grid_x)
        return wall, column, row

    def cell_index(self, wall: int, column: int, row: int) -> int:
        if not (0 <= wall < 4 and 0 <= column < self.grid_x and 0 <= row < self.grid_y):
            raise GeometryError(f"Cell ({wall}, {column}, {row}) outside the wall grid")
        return wall * self.cells_per_wall + row * self.grid_x + column

    def cell_size(self, wall: int) -> Tuple[float, float]:
        w = self.walls[wall]
        return w.length / self.grid_x, w.height / self.grid_y

    def _center(self, z: int) -> np.ndarray:
        wall, column, row = self.cell_location(z)
        w = self.walls[wall]
        du, dv = self.cell_size(wall)
        return w.anchor + (column + 0.5) * du * w.u_axis + (row + 0.5) * dv * w.v_axis

    def cell_center(self, z: int) -> np.ndarray:
        self.cell_location(z)
        return self._centers[z]

    def cell_centers(self) -> np.ndarray:
        return self._centers

    def wall_cells(self, wall: int) -> range:
        start = wall * self.cells_per_wall
        return range(start, start + self.cells_per_wall)

    def contains(self, point) -> bool:
        """True when point lies strictly inside the room box."""
        p = np.asarray(point, dtype=float)
        return bool(
            0 < p[0] < self.width_x and 0 < p[1] < self.depth_y and 0 < p[2] < self.height_z
        )


@dataclass(frozen=True)
class Bulb:
    center: Tuple[float, float, float]
    radius: float = 0.4
    layer_counts: Tuple[int, ...] = (1,)
    divergence: float = math.radians(30.0)  # beam cone half-angle
    half_power_semiangle: Optional[float] = None  # defaults to the divergence

    @property
    def semiangle(self) -> float:
        return self.divergence if self.half_power_semiangle is None else self.half_power_semiangle

    @property
    def lambertian_order(self) -> float:
        return lambertian_order(self.semiangle)

    @property
    def num_leds(self) -> int:
        return int(sum(self.layer_counts))


def lambertian_order(half_power_semiangle: float) -> float:
    """q = -ln 2 / ln cos(semiangle)."""
    if not 0 < half_power_semiangle < math.pi / 2:
        raise GeometryError("Half-power semi-angle must lie in (0, pi/2)")
    return -math.log(2.0) / math.log(math.cos(half_power_semiangle))


@dataclass(frozen=True, eq=False)
class LedPose:
    index: int
    position: np.ndarray
    orientation: np.ndarray
    divergence: float = math.radians(30.0)
    order: float = field(default_factory=lambda: lambertian_order(math.radians(30.0)))
    layer: int = 0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))
        direction = np.asarray(self.orientation, dtype=float)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise GeometryError(f"LED {self.index} has a zero orientation vector")
        object.__setattr__(self, "orientation", _vec(direction / norm))


@dataclass(frozen=True, eq=False)
class ReceiverNode:
    index: int
    kind: str
    position: np.ndarray
    pd_normal: np.ndarray
    pd_area: float
    fov: float

    def __post_init__(self):
        if self.kind not in (USER, SENSING_POINT):
            raise GeometryError(f"Unknown receiver kind {self.kind!r}")
        if not self.pd_area > 0:
            raise GeometryError(f"Receiver {self.index}: PD area must be positive")
        if not 0 < self.fov <= math.pi / 2 + ANGLE_SLACK:
            raise GeometryError(f"Receiver {self.index}: FOV must lie in (0, pi/2]")
        object.__setattr__(self, "position", _vec(self.position))
        normal = np.asarray(self.pd_normal, dtype=float)
        norm = np.linalg.norm(normal)
        if norm == 0:
            raise GeometryError(f"Receiver {self.index} has a zero PD normal")
        object.__setattr__(self, "pd_normal", _vec(normal / norm))


class ReceiverArray:
    """Receivers stacked into arrays for vectorised channel evaluation."""

    def __init__(self, nodes: Sequence[ReceiverNode]):
        self.nodes = tuple(nodes)
        self.positions = np.array([n.position for n in self.nodes], dtype=float).reshape(-1, 3)
        self.normals = np.array([n.pd_normal for n in self.nodes], dtype=float).reshape(-1, 3)
        self.areas = np.array([n.pd_area for n in self.nodes], dtype=float)
        self.cos_fov = np.maximum(np.cos([n.fov for n in self.nodes]), 0.0)

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class MirrorPath:
    led: int
    cell: int
    reflection_point: np.ndarray
    total_distance: float
    irradiance_angle: float
    incidence_angle: float
    valid: bool


@dataclass(frozen=True, eq=False)
class PathBundle:
    """Mirror paths from one LED through C cells to K receivers, arrays shaped (C, K)."""

    reflection_points: np.ndarray  # (C, K, 3)
    total_distance: np.ndarray
    cos_irradiance: np.ndarray
    cos_incidence: np.ndarray
    valid: np.ndarray


def build_bulb(bulb: Bulb) -> List[LedPose]:
    """Place every LED on the hemisphere, layer by layer.

    Layer l (1-based) of L sits at polar angle (l - 1) * (pi/2) / L from the downward axis,
    so the first layer is the nadir. LED j of a layer with k LEDs has azimuth
    2*pi*j/k plus a golden-angle phase per layer.
    """
    if not bulb.radius > 0:
        raise GeometryError("Bulb radius must be positive")
    counts = [int(k) for k in bulb.layer_counts]
    if not counts:
        raise GeometryError("Bulb needs at least one LED layer")
    if any(k < 1 for k in counts):
        raise GeometryError("Every LED layer needs at least one LED")
    if not 0 < bulb.divergence <= math.pi / 2:
        raise GeometryError("Divergence angle must lie in (0, pi/2]")

    center = np.asarray(bulb.center, dtype=float)
    order = bulb.lambertian_order
    n_layers = len(counts)
    poses = []
    for layer, k in enumerate(counts):
        # first layer at 0, so a single-layer bulb is one nadir LED
        theta = layer * (math.pi / 2) / n_layers
        phase = layer * GOLDEN_ANGLE
        for j in range(k):
            psi = 2 * math.pi * j / k + phase
            direction = np.array(
                [math.sin(theta) * math.cos(psi), math.sin(theta) * math.sin(psi), -math.cos(theta)]
            )
            poses.append(
                LedPose(
                    index=len(poses),
                    position=center + bulb.radius * direction,
                    orientation=direction,
                    divergence=bulb.divergence,
                    order=order,
                    layer=layer,
                )
            )
    return poses


def cone_mask(led: LedPose, points: np.ndarray) -> np.ndarray:
    """Vectorised beam_covers over an (n, 3) array of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    offsets = pts - led.position
    dist = np.linalg.norm(offsets, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_angle = offsets @ led.orientation / dist
    inside = (dist > 0) & (cos_angle > 0) & (cos_angle >= math.cos(led.divergence) - ANGLE_SLACK)
    return np.where(dist > 0, inside, False)


def beam_covers(led: LedPose, point) -> bool:
    """True iff point lies inside the LED's beam cone, on its forward side."""
    return bool(cone_mask(led, np.asarray(point, dtype=float).reshape(1, 3))[0])


def mirror_image(point, wall: Wall) -> np.ndarray:
    """Reflect point across the wall plane."""
    p = np.asarray(point, dtype=float)
    return p - 2.0 * np.dot(p - wall.anchor, wall.normal) * wall.normal


def reflection_area(led: LedPose, room: Room) -> FrozenSet[int]:
    """Cells whose centres fall inside the LED's beam cone."""
    mask = cone_mask(led, room.cell_centers())
    return frozenset(int(z) for z in np.flatnonzero(mask))


def trace_mirror_paths(led: LedPose, cells, receivers: ReceiverArray, room: Room) -> PathBundle:
    """Single-bounce paths LED -> cell mirror -> receiver, via the receiver's mirror image."""
    cells = np.asarray(cells, dtype=int).reshape(-1)
    walls = cells // room.cells_per_wall
    rest = cells % room.cells_per_wall
    rows, columns = np.divmod(rest, room.grid_x)

    anchors = np.array([room.walls[w].anchor for w in walls]).reshape(-1, 3)
    normals = np.array([room.walls[w].normal for w in walls]).reshape(-1, 3)
    u_axes = np.array([room.walls[w].u_axis for w in walls]).reshape(-1, 3)
    v_axes = np.array([room.walls[w].v_axis for w in walls]).reshape(-1, 3)
    sizes = np.array([room.cell_size(w) for w in walls]).reshape(-1, 2)

    rx = receivers.positions  # (K, 3)
    rx_height = np.einsum("ckd,cd->ck", rx[None, :, :] - anchors[:, None, :], normals)
    images = rx[None, :, :] - 2.0 * rx_height[..., None] * normals[:, None, :]
    led_height = np.einsum("cd,cd->c", led.position - anchors, normals)

    segment = images - led.position  # (C, K, 3)
    total_distance = np.linalg.norm(segment, axis=2)
    denom = np.einsum("ckd,cd->ck", segment, normals)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = -led_height[:, None] / denom
        points = led.position + t[..., None] * segment

        local = points - anchors[:, None, :]
        s = np.einsum("ckd,cd->ck", local, u_axes)
        h = np.einsum("ckd,cd->ck", local, v_axes)
        du, dv = sizes[:, 0:1], sizes[:, 1:2]
        edge = ANGLE_SLACK * max(room.width_x, room.depth_y, room.height_z)
        in_cell = (
            (s >= columns[:, None] * du - edge)
            & (s <= (columns[:, None] + 1) * du + edge)
            & (h >= rows[:, None] * dv - edge)
            & (h <= (rows[:, None] + 1) * dv + edge)
        )

        to_point = points - led.position
        leg_out = np.linalg.norm(to_point, axis=2)
        cos_irradiance = np.einsum("ckd,d->ck", to_point, led.orientation) / leg_out

        from_receiver = points - rx[None, :, :]
        leg_in = np.linalg.norm(from_receiver, axis=2)
        cos_incidence = np.einsum("ckd,kd->ck", from_receiver, receivers.normals) / leg_in

    valid = (
        (led_height[:, None] > 0)
        & (rx_height > 0)
        & (t > 0)
        & (t < 1)
        & in_cell
        & (cos_irradiance > 0)
        & (cos_irradiance >= math.cos(led.divergence) - ANGLE_SLACK)
        & (cos_incidence >= receivers.cos_fov[None, :] - ANGLE_SLACK)
    )
    valid = np.where(np.isfinite(cos_irradiance) & np.isfinite(cos_incidence), valid, False)
    return PathBundle(points, total_distance, cos_irradiance, cos_incidence, valid)


def _angle(cosine: float) -> float:
    if not math.isfinite(cosine):
        return math.nan
    return math.acos(min(1.0, max(-1.0, cosine)))


def mirror_path(led: LedPose, z: int, receiver: ReceiverNode, room: Room) -> MirrorPath:
    """The LED -> cell z -> receiver path; invalid paths are flagged, not raised."""
    room.cell_location(z)
    bundle = trace_mirror_paths(led, [z], ReceiverArray([receiver]), room)
    return MirrorPath(
        led=led.index,
        cell=int(z),
        reflection_point=bundle.reflection_points[0, 0],
        total_distance=float(bundle.total_distance[0, 0]),
        irradiance_angle=_angle(float(bundle.cos_irradiance[0, 0])),
        incidence_angle=_angle(float(bundle.cos_incidence[0, 0])),
        valid=bool(bundle.valid[0, 0]),
    )


def axis_distance(led: LedPose, point) -> float:
    """Distance from point to the LED's beam axis ray (to the LED itself when behind it)."""
    return float(axis_distances(led, np.asarray(point, dtype=float).reshape(1, 3))[0])


def axis_distances(led: LedPose, points: np.ndarray) -> np.ndarray:
    offsets = np.asarray(points, dtype=float).reshape(-1, 3) - led.position
    along = np.maximum(offsets @ led.orientation, 0.0)
    return np.linalg.norm(offsets - along[:, None] * led.orientation, axis=1)
