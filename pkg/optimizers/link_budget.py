"""
Downlink budget for stage 2: per-user SINR, Shannon throughput and the power rules the
assignment heuristics share.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from simulation.channel import ChannelTensor
from simulation.geometry import LedPose, ReceiverNode, axis_distances

UNASSIGNED = -1
INTERFERENCE_MODES = ("own", "cross")


@dataclass(eq=False)
class LinkBudget:
    """Everything a heuristic needs: H_mu with the mirrors in place plus noise and limits."""

    gains: np.ndarray  # (M, U)
    axis_distance: np.ndarray  # (M, U)
    noise: float  # N0 * B
    bandwidth: float
    p_max: float
    tau: float = 0.1
    interference: str = "own"

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.axis_distance = np.asarray(self.axis_distance, dtype=float)
        if self.gains.ndim != 2 or self.axis_distance.shape != self.gains.shape:
            raise ValueError("Gains and axis distances must both be (M, U) matrices")
        if np.any(self.gains < 0):
            raise ValueError("Channel gains must be non-negative")
        if self.interference not in INTERFERENCE_MODES:
            raise ValueError(f"Unknown interference mode {self.interference!r}")
        if not self.noise > 0:
            raise ValueError("Noise power must be positive")

    @property
    def num_leds(self) -> int:
        return self.gains.shape[0]

    @property
    def num_users(self) -> int:
        return self.gains.shape[1]

    @property
    def covered(self) -> np.ndarray:
        """LED m covers user u when some LoS or placed-mirror path reaches it."""
        return self.gains > 0

    @classmethod
    def from_tensor(cls, tensor: ChannelTensor, xi, leds: Sequence[LedPose], users: Sequence[ReceiverNode],
                    scenario) -> "LinkBudget":
        columns = tensor.user_indices()
        gains = tensor.total(xi)[:, columns]
        positions = np.array([u.position for u in users], dtype=float).reshape(-1, 3)
        distance = np.array([axis_distances(led, positions) for led in leds]).reshape(len(leds), -1)
        return cls(
            gains=gains,
            axis_distance=distance,
            noise=scenario.noise_power,
            bandwidth=scenario.bandwidth,
            p_max=scenario.p_max,
            tau=scenario.tau,
            interference=scenario.interference,
        )

    @classmethod
    def from_arrays(cls, gains, noise: float = 5e-13, bandwidth: float = 20e6, p_max: float = 0.1,
                    tau: float = 0.1, axis_distance=None, interference: str = "own") -> "LinkBudget":
        gains = np.asarray(gains, dtype=float)
        if axis_distance is None:
            axis_distance = np.zeros_like(gains)
        return cls(gains, np.asarray(axis_distance, dtype=float), noise, bandwidth, p_max, tau, interference)


@dataclass(eq=False)
class Assignment:
    eps: np.ndarray  # LED -> user index, UNASSIGNED for illumination only
    powers: np.ndarray
    tau: float
    per_user_sinr: np.ndarray
    per_user_throughput: np.ndarray
    heuristic: str = ""

    @property
    def min_sinr(self) -> float:
        return float(self.per_user_sinr.min()) if self.per_user_sinr.size else float("nan")

    @property
    def min_throughput(self) -> float:
        return float(self.per_user_throughput.min()) if self.per_user_throughput.size else float("nan")

    @property
    def avg_throughput(self) -> float:
        return float(self.per_user_throughput.mean()) if self.per_user_throughput.size else float("nan")

    def leds_of(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.eps == u)


def association_matrix(eps, num_users: int) -> np.ndarray:
    """One-hot (M, U) matrix of eps; unassigned rows are all zero."""
    eps = np.asarray(eps, dtype=int)
    onehot = np.zeros((eps.shape[0], num_users))
    assigned = eps >= 0
    onehot[np.flatnonzero(assigned), eps[assigned]] = 1.0
    return onehot


def received_matrix(eps, P, gains) -> np.ndarray:
    """C[u, k] = sum over LEDs m assigned to k of H_mu * P_m."""
    gains = np.asarray(gains, dtype=float)
    weighted = gains * np.asarray(P, dtype=float)[:, None]
    return weighted.T @ association_matrix(eps, gains.shape[1])


def sinr_from_received(C: np.ndarray, noise: float, interference: str = "own") -> np.ndarray:
    """SINR for every user from a (..., U, U) received matrix.

    "own": interferer k contributes its own signal S_k squared.
    "cross": interferer k contributes the light of its LEDs as seen at u.
    """
    signal = np.diagonal(C, axis1=-2, axis2=-1)
    U = C.shape[-1]
    off = ~np.eye(U, dtype=bool)
    if interference == "own":
        squared = signal**2
        interfering = np.where(off, squared[..., None, :], 0.0).sum(axis=-1)
    elif interference == "cross":
        interfering = np.where(off, C**2, 0.0).sum(axis=-1)
    else:
        raise ValueError(f"Unknown interference mode {interference!r}")
    return signal**2 / (noise + interfering)


def sinr_vector(eps, P, link: LinkBudget) -> np.ndarray:
    return sinr_from_received(received_matrix(eps, P, link.gains), link.noise, link.interference)


def sinr(u: int, eps, P, link: LinkBudget) -> float:
    return float(sinr_vector(eps, P, link)[u])


def throughput(gamma, bandwidth: float):
    """Shannon rate B * log2(1 + SINR) in bit/s."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be non-negative")
    rate = bandwidth * np.log2(1.0 + gamma)
    return float(rate) if rate.ndim == 0 else rate


def min_sinr(assignment: Assignment) -> float:
    return assignment.min_sinr


def boosted_power(p_prev: float, tau: float, p_max: float) -> float:
    return min(p_prev * (1.0 + tau), p_max)


def contested_power(p_prev: float, kappa: float, tau: float) -> float:
    return max(p_prev * (1.0 - kappa), p_prev * (1.0 - tau))


def kappa_ratio(numerator: float, denominator: float) -> float:
    if denominator <= 0:
        return math.inf
    return numerator / denominator


def initial_powers(P_prev, link: LinkBudget) -> np.ndarray:
    """Illumination-duty power for every LED before any assignment."""
    return np.array([boosted_power(p, link.tau, link.p_max) for p in np.asarray(P_prev, dtype=float)])


def make_assignment(eps, powers, link: LinkBudget, heuristic: str = "") -> Assignment:
    eps = np.asarray(eps, dtype=int)
    powers = np.asarray(powers, dtype=float)
    gamma = sinr_vector(eps, powers, link)
    return Assignment(
        eps=eps,
        powers=powers,
        tau=link.tau,
        per_user_sinr=gamma,
        per_user_throughput=throughput(gamma, link.bandwidth) if gamma.size else np.zeros(0),
        heuristic=heuristic,
    )


def check_prev_powers(P_prev, link: LinkBudget, heuristic: Optional[str] = None) -> np.ndarray:
    P_prev = np.asarray(P_prev, dtype=float).reshape(-1)
    if P_prev.shape[0] != link.num_leds:
        raise ValueError(
            f"{heuristic or 'assignment'}: got {P_prev.shape[0]} stage-1 powers for {link.num_leds} LEDs"
        )
    if np.any(P_prev < 0) or np.any(P_prev > link.p_max * (1 + 1e-9)):
        raise ValueError(f"{heuristic or 'assignment'}: stage-1 powers must lie in [0, p_max]")
    return np.minimum(P_prev, link.p_max)
