"""
Small scenarios, design models and link budgets shared by the test modules.
"""

import numpy as np
from scipy import sparse

from optimizers.design_model import DesignModel
from optimizers.link_budget import LinkBudget
from simulation.scenario import Scenario


def desk_scenario(**changes) -> Scenario:
    """2 m cube, 7-LED bulb, two cells per wall, four floor sensors; always feasible."""
    base = dict(
        room_x=2.0, room_y=2.0, room_z=2.0, bulb_radius=0.1, layers=(1, 6),
        divergence_deg=40.0, grid_x=2, grid_y=1, sensors=4, users=3, trials=4,
        phi1=1e6, phi2=0.0, mu=0.7, node_budget=500,
    )
    base.update(changes)
    return Scenario(**base)


def random_design_model(rng: np.random.Generator, num_leds=None, num_cells=None, num_sensors=None) -> DesignModel:
    """Random lux coefficients; P = 0 always satisfies every row, so the model is feasible."""
    M = num_leds or int(rng.integers(1, 7))
    Z = num_cells or int(rng.integers(1, 9))
    N = num_sensors or int(rng.integers(1, 10))
    pairs = [(m, z) for m in range(M) for z in range(Z) if rng.random() < 0.4]
    pair_led = np.array([m for m, _ in pairs], dtype=int)
    pair_cell = np.array([z for _, z in pairs], dtype=int)
    Q = len(pairs)
    los = rng.uniform(0.0, 50.0, size=(N, M)) * (rng.random((N, M)) < 0.8)
    nlos = rng.uniform(0.0, 30.0, size=(N, Q)) * (rng.random((N, Q)) < 0.7)
    return DesignModel(
        num_leds=M,
        num_cells=Z,
        num_sensors=N,
        los_coef=los,
        pair_led=pair_led,
        pair_cell=pair_cell,
        nlos_coef=sparse.csr_matrix(nlos.reshape(N, Q)),
        allowed_cells=rng.random(Z) < 0.8,
        p_min=0.0,
        p_max=0.1,
        mu=float(rng.uniform(0.2, 0.9)),
        phi1=float(rng.uniform(3.0, 8.0)),
        phi2=0.0,
    )


def random_link(rng: np.random.Generator, num_leds: int, num_users: int, interference: str = "own",
                coverage: float = 0.6) -> LinkBudget:
    """Gains log-uniform over three decades; each LED-user pair is covered with the given odds."""
    gains = 10.0 ** rng.uniform(-7.0, -4.0, size=(num_leds, num_users))
    gains *= rng.random((num_leds, num_users)) < coverage
    return LinkBudget.from_arrays(
        gains,
        noise=5e-13,
        axis_distance=rng.uniform(0.0, 2.0, size=(num_leds, num_users)),
        interference=interference,
    )


def random_prev_powers(rng: np.random.Generator, num_leds: int, p_max: float = 0.1) -> np.ndarray:
    return rng.uniform(0.0, p_max, size=num_leds)
