"""
Stage-1 mirror design model.

Variables are laid out as x = [P_0..P_{M-1} | rho_q for every (m, z) pair with z in the
reflection area of m | phi | xi_0..xi_{Z-1}]. chi_mz is not a variable of its own: inside the
reflection area it equals xi_z and outside it is 0, so each rho_q is tied to xi of its cell.

Rows (all "<=") in order:
  illum_n      phi - lux_n <= 0                       (N rows)
  uniformity   mu/N * sum_n lux_n - phi <= 0          (1 row)
  lux_max_n    lux_n <= phi1                          (N rows)
  lux_min_n    -lux_n <= -phi2                        (N rows)
  rho_le_p_q   rho_q - P_m <= 0                       (Q rows)
  rho_ge_q     P_m - rho_q + Pmax*xi_z <= Pmax        (Q rows)
  rho_le_xi_q  rho_q - Pmax*xi_z <= 0                 (Q rows)
with lux_n = sum_m a_nm P_m + sum_q b_nq rho_q. Power limits are variable bounds.
Counts: M + Q + 1 + Z variables, 3N + 1 + 3Q rows.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from simulation.channel import ChannelTensor
from simulation.scenario import REGIMES, Scenario


class ModelError(ValueError):
    """Raised for malformed design models or guard violations."""


@dataclass(eq=False)
class DesignModel:
    num_leds: int
    num_cells: int
    num_sensors: int
    los_coef: np.ndarray  # (N, M) lux per watt
    pair_led: np.ndarray  # (Q,)
    pair_cell: np.ndarray  # (Q,)
    nlos_coef: sparse.csr_matrix  # (N, Q) lux per watt of rho
    allowed_cells: np.ndarray  # (Z,) bool
    p_min: float
    p_max: float
    mu: float
    phi1: float
    phi2: float
    regime: str = "four"

    @property
    def num_pairs(self) -> int:
        return int(self.pair_led.shape[0])

    @property
    def rho_offset(self) -> int:
        return self.num_leds

    @property
    def phi_index(self) -> int:
        return self.num_leds + self.num_pairs

    @property
    def xi_offset(self) -> int:
        return self.phi_index + 1

    @property
    def num_vars(self) -> int:
        return self.xi_offset + self.num_cells

    @property
    def num_rows(self) -> int:
        return 3 * self.num_sensors + 1 + 3 * self.num_pairs

    def variable_names(self) -> List[str]:
        names = [f"P_{m}" for m in range(self.num_leds)]
        names += [f"rho_{m}_{z}" for m, z in zip(self.pair_led, self.pair_cell)]
        names.append("phi")
        names += [f"xi_{z}" for z in range(self.num_cells)]
        return names

    def row_names(self) -> List[str]:
        N, Q = self.num_sensors, self.num_pairs
        names = [f"illum_{n}" for n in range(N)]
        names.append("uniformity")
        names += [f"lux_max_{n}" for n in range(N)]
        names += [f"lux_min_{n}" for n in range(N)]
        pairs = [f"{m}_{z}" for m, z in zip(self.pair_led, self.pair_cell)]
        names += [f"rho_le_p_{p}" for p in pairs]
        names += [f"rho_ge_{p}" for p in pairs]
        names += [f"rho_le_xi_{p}" for p in pairs]
        assert len(names) == self.num_rows
        return names

    @cached_property
    def lux_matrix(self) -> sparse.csr_matrix:
        """(N, M + Q) map from [P | rho] to sensor lux."""
        los = sparse.csr_matrix(self.los_coef)
        if self.num_pairs == 0:
            return los
        return sparse.hstack([los, self.nlos_coef], format="csr")

    @cached_property
    def _matrices(self) -> Tuple[sparse.csr_matrix, np.ndarray]:
        N, M, Q, Z = self.num_sensors, self.num_leds, self.num_pairs, self.num_cells
        lux = self.lux_matrix.tocoo()
        phi, xi0, rho0 = self.phi_index, self.xi_offset, self.rho_offset
        q = np.arange(Q)
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(np.asarray(r, dtype=int).reshape(-1))
            cols.append(np.asarray(c, dtype=int).reshape(-1))
            vals.append(np.broadcast_to(np.asarray(v, dtype=float), np.shape(r)).reshape(-1))

        # illum_n
        add(lux.row, lux.col, -lux.data)
        add(np.arange(N), np.full(N, phi), 1.0)
        # uniformity
        column_sums = np.asarray(self.lux_matrix.sum(axis=0)).reshape(-1)
        nz = np.flatnonzero(column_sums)
        add(np.full(nz.shape[0], N), nz, self.mu / N * column_sums[nz])
        add([N], [phi], -1.0)
        # lux_max_n, lux_min_n
        add(N + 1 + lux.row, lux.col, lux.data)
        add(2 * N + 1 + lux.row, lux.col, -lux.data)
        # linearization triples
        base = 3 * N + 1
        add(base + q, rho0 + q, 1.0)
        add(base + q, self.pair_led, -1.0)
        add(base + Q + q, self.pair_led, 1.0)
        add(base + Q + q, rho0 + q, -1.0)
        add(base + Q + q, xi0 + self.pair_cell, self.p_max)
        add(base + 2 * Q + q, rho0 + q, 1.0)
        add(base + 2 * Q + q, xi0 + self.pair_cell, -self.p_max)

        A = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.num_rows, self.num_vars),
        ).tocsr()
        b = np.concatenate(
            [
                np.zeros(N + 1),
                np.full(N, self.phi1),
                np.full(N, -self.phi2),
                np.zeros(Q),
                np.full(Q, self.p_max),
                np.zeros(Q),
            ]
        )
        return A, b

    def matrices(self) -> Tuple[sparse.csr_matrix, np.ndarray]:
        """Constraint matrix A and right-hand side b of A x <= b."""
        return self._matrices

    def objective(self) -> np.ndarray:
        """Minimisation vector (linprog convention): -phi."""
        c = np.zeros(self.num_vars)
        c[self.phi_index] = -1.0
        return c

    def bounds(self, xi_lo=None, xi_hi=None) -> List[Tuple[Optional[float], Optional[float]]]:
        xi_lo = np.zeros(self.num_cells) if xi_lo is None else np.asarray(xi_lo, dtype=float)
        xi_hi = self.allowed_cells.astype(float) if xi_hi is None else np.asarray(xi_hi, dtype=float)
        xi_hi = np.minimum(xi_hi, self.allowed_cells.astype(float))
        bounds = [(self.p_min, self.p_max)] * self.num_leds
        bounds += [(0.0, self.p_max)] * self.num_pairs
        bounds.append((None, None))
        bounds += [(float(lo), float(max(lo, hi))) for lo, hi in zip(xi_lo, xi_hi)]
        return bounds

    def pack(self, powers, rho, phi, xi) -> np.ndarray:
        return np.concatenate(
            [np.asarray(powers, float), np.asarray(rho, float), [float(phi)], np.asarray(xi, float)]
        )

    def sensor_lux(self, powers, rho) -> np.ndarray:
        return self.lux_matrix @ np.concatenate([np.asarray(powers, float), np.asarray(rho, float)])

    def derived_rho(self, powers, xi) -> np.ndarray:
        """rho_q = xi_z * P_m, the value the linearization rows pin it to."""
        return np.asarray(xi, float)[self.pair_cell] * np.asarray(powers, float)[self.pair_led]


def build_design_model(
    scenario: Scenario, tensor: ChannelTensor, regime: Optional[str] = None
) -> DesignModel:
    """Assemble the stage-1 model from the sensing-point columns of a channel tensor."""
    regime = scenario.regime if regime is None else regime
    if regime not in REGIMES:
        raise ModelError(f"Unknown mirror regime {regime!r}; expected one of {', '.join(REGIMES)}")
    if tensor.num_cells != scenario.room.num_cells:
        raise ModelError("Channel tensor was not built over every wall cell")

    sensors = tensor.sensor_indices()
    if sensors.size == 0:
        raise ModelError("Channel tensor has no sensing points")
    N, M, Z = sensors.size, tensor.num_leds, tensor.num_cells
    scale = scenario.alpha0 / tensor.node_areas[sensors] if scenario.lux_per_area else np.full(N, scenario.alpha0)

    pair_led = np.concatenate(
        [np.full(len(cells), m, dtype=int) for m, cells in enumerate(tensor.reflection_masks)] or [np.zeros(0, int)]
    ).astype(int)
    pair_cell = np.concatenate(
        [np.array(sorted(cells), dtype=int) for cells in tensor.reflection_masks] or [np.zeros(0, int)]
    ).astype(int)
    pair_index = {(int(m), int(z)): q for q, (m, z) in enumerate(zip(pair_led, pair_cell))}

    sensor_row = np.full(tensor.num_nodes, -1, dtype=int)
    sensor_row[sensors] = np.arange(N)
    keep = sensor_row[tensor.nlos_node] >= 0
    rows = sensor_row[tensor.nlos_node[keep]]
    cols = np.array(
        [pair_index[(int(m), int(z))] for m, z in zip(tensor.nlos_led[keep], tensor.nlos_cell[keep])],
        dtype=int,
    )
    nlos_coef = sparse.coo_matrix(
        (tensor.nlos_gain[keep] * scale[rows], (rows, cols)), shape=(N, pair_led.shape[0])
    ).tocsr()

    allowed = np.zeros(Z, dtype=bool)
    for wall in scenario.allowed_walls(regime):
        allowed[list(scenario.room.wall_cells(wall))] = True

    return DesignModel(
        num_leds=M,
        num_cells=Z,
        num_sensors=N,
        los_coef=tensor.los[:, sensors].T * scale[:, None],
        pair_led=pair_led,
        pair_cell=pair_cell,
        nlos_coef=nlos_coef,
        allowed_cells=allowed,
        p_min=scenario.p_min,
        p_max=scenario.p_max,
        mu=scenario.mu,
        phi1=scenario.phi1,
        phi2=scenario.phi2,
        regime=regime,
    )
