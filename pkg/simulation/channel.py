"""
Optical channel: Lambertian LoS gains, single-bounce mirror (NLoS) gains and the
total channel H = LoS + sum of mirror contributions gated by each LED's reflection area.

PD responsivity is folded into the gain (set to 1) and no optical filter or
concentrator is modelled.
"""

import math
from dataclasses import dataclass
from typing import FrozenSet, Sequence, Tuple

import numpy as np

from simulation.geometry import (
    ANGLE_SLACK,
    GeometryError,
    LedPose,
    ReceiverArray,
    ReceiverNode,
    Room,
    SENSING_POINT,
    USER,
    reflection_area,
    trace_mirror_paths,
)


def lambertian_Q0(phi: float, q: float) -> float:
    """Radiant intensity pattern (q+1)/(2*pi) * cos(phi)^q."""
    if not q > 0:
        raise GeometryError(f"Lambertian order must be positive, got {q}")
    if abs(phi) >= math.pi / 2:
        return 0.0
    return (q + 1.0) / (2.0 * math.pi) * math.cos(phi) ** q


def _pattern(cos_phi: np.ndarray, q: float) -> np.ndarray:
    return (q + 1.0) / (2.0 * np.pi) * np.power(np.clip(cos_phi, 0.0, 1.0), q)


def los_gains(led: LedPose, receivers: ReceiverArray) -> np.ndarray:
    """LoS gain from one LED to every receiver, shape (K,)."""
    offsets = receivers.positions - led.position
    distance = np.linalg.norm(offsets, axis=1)
    if np.any(distance == 0):
        raise GeometryError(f"LED {led.index} coincides with a receiver")
    cos_irradiance = offsets @ led.orientation / distance
    cos_incidence = -np.einsum("kd,kd->k", offsets, receivers.normals) / distance
    visible = (
        (cos_irradiance > 0)
        & (cos_irradiance >= math.cos(led.divergence) - ANGLE_SLACK)
        & (cos_incidence > 0)
        & (cos_incidence >= receivers.cos_fov - ANGLE_SLACK)
    )
    gain = receivers.areas / distance**2 * _pattern(cos_irradiance, led.order) * cos_incidence
    return np.where(visible, gain, 0.0)


def los_gain(led: LedPose, node: ReceiverNode) -> float:
    return float(los_gains(led, ReceiverArray([node]))[0])


def nlos_gains(led: LedPose, cells, receivers: ReceiverArray, room: Room, eta: float) -> np.ndarray:
    """Mirror gains through each cell to each receiver, shape (C, K); 0 for invalid paths."""
    paths = trace_mirror_paths(led, cells, receivers, room)
    if np.any(paths.total_distance == 0):
        raise GeometryError(f"LED {led.index} coincides with a receiver image")
    valid = paths.valid & (paths.cos_incidence > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        gain = (
            eta
            * receivers.areas[None, :]
            / paths.total_distance**2
            * _pattern(np.nan_to_num(paths.cos_irradiance), led.order)
            * paths.cos_incidence
        )
    return np.where(valid, gain, 0.0)


def nlos_gain(led: LedPose, node: ReceiverNode, z: int, room: Room, eta: float) -> float:
    room.cell_location(z)
    return float(nlos_gains(led, [z], ReceiverArray([node]), room, eta)[0, 0])


@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """LoS gains (M, K) plus the non-zero mirror gains as parallel coordinate arrays."""

    los: np.ndarray
    nlos_led: np.ndarray
    nlos_node: np.ndarray
    nlos_cell: np.ndarray
    nlos_gain: np.ndarray
    reflection_masks: Tuple[FrozenSet[int], ...]
    eta: float
    num_cells: int
    node_kinds: Tuple[str, ...]
    node_areas: np.ndarray

    @property
    def num_leds(self) -> int:
        return self.los.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.los.shape[1]

    def user_indices(self) -> np.ndarray:
        return np.array([i for i, kind in enumerate(self.node_kinds) if kind == USER], dtype=int)

    def sensor_indices(self) -> np.ndarray:
        return np.array(
            [i for i, kind in enumerate(self.node_kinds) if kind == SENSING_POINT], dtype=int
        )

    def _mirrors(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.shape[0] != self.num_cells:
            raise ValueError(f"Mirror vector has length {xi.shape[0]}, expected {self.num_cells}")
        return xi

    def total(self, xi) -> np.ndarray:
        """H[m, l] = LoS + sum over cells z in the reflection area of xi_z * NLoS(z)."""
        xi = self._mirrors(xi)
        H = self.los.copy()
        np.add.at(H, (self.nlos_led, self.nlos_node), self.nlos_gain * xi[self.nlos_cell])
        return H

    def total_gain(self, m: int, l: int, xi) -> float:
        xi = self._mirrors(xi)
        hit = (self.nlos_led == m) & (self.nlos_node == l)
        return float(self.los[m, l] + np.sum(self.nlos_gain[hit] * xi[self.nlos_cell[hit]]))

    def nlos_value(self, m: int, l: int, z: int) -> float:
        hit = (self.nlos_led == m) & (self.nlos_node == l) & (self.nlos_cell == z)
        return float(self.nlos_gain[hit].sum())

    def chi(self, xi) -> np.ndarray:
        """Gated mirror matrix (M, Z): xi_z inside each LED's reflection area, 0 outside."""
        xi = self._mirrors(xi)
        chi = np.zeros((self.num_leds, self.num_cells), dtype=int)
        for m, cells in enumerate(self.reflection_masks):
            idx = np.fromiter(sorted(cells), dtype=int, count=len(cells))
            chi[m, idx] = np.rint(xi[idx]).astype(int)
        return chi

    def node_subset(self, nodes) -> "ChannelTensor":
        """Tensor restricted to the given node columns, renumbered in the given order."""
        nodes = np.asarray(nodes, dtype=int).reshape(-1)
        remap = np.full(self.num_nodes, -1, dtype=int)
        remap[nodes] = np.arange(nodes.shape[0])
        keep = remap[self.nlos_node] >= 0
        return ChannelTensor(
            los=self.los[:, nodes],
            nlos_led=self.nlos_led[keep],
            nlos_node=remap[self.nlos_node[keep]],
            nlos_cell=self.nlos_cell[keep],
            nlos_gain=self.nlos_gain[keep],
            reflection_masks=self.reflection_masks,
            eta=self.eta,
            num_cells=self.num_cells,
            node_kinds=tuple(self.node_kinds[i] for i in nodes),
            node_areas=self.node_areas[nodes],
        )


def compute_channel_tensor(
    leds: Sequence[LedPose], nodes: Sequence[ReceiverNode], room: Room, eta: float
) -> ChannelTensor:
    """Precompute LoS gains and every non-zero mirror gain for the given LEDs and nodes."""
    if not 0 < eta <= 1:
        raise GeometryError(f"Mirror reflectivity must lie in (0, 1], got {eta}")
    receivers = ReceiverArray(nodes)
    los = np.zeros((len(leds), len(receivers)))
    masks = []
    led_idx, node_idx, cell_idx, gains = [], [], [], []

    for m, led in enumerate(leds):
        area = reflection_area(led, room)
        masks.append(area)
        if len(receivers) == 0:
            continue
        los[m] = los_gains(led, receivers)
        if not area:
            continue
        cells = np.array(sorted(area), dtype=int)
        block = nlos_gains(led, cells, receivers, room, eta)
        c, k = np.nonzero(block)
        led_idx.append(np.full(c.shape[0], m, dtype=int))
        cell_idx.append(cells[c])
        node_idx.append(k)
        gains.append(block[c, k])

    def _stack(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

    return ChannelTensor(
        los=los,
        nlos_led=_stack(led_idx, int),
        nlos_node=_stack(node_idx, int),
        nlos_cell=_stack(cell_idx, int),
        nlos_gain=_stack(gains, float),
        reflection_masks=tuple(masks),
        eta=float(eta),
        num_cells=room.num_cells,
        node_kinds=tuple(n.kind for n in nodes),
        node_areas=receivers.areas.copy(),
    )
