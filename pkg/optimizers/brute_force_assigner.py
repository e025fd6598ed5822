"""
ExhaustiveAssigner: exact max-min SINR over every association and a per-LED power grid.
Only usable on tiny instances; it is the reference the heuristics are checked against.
"""

import itertools
import math
from typing import List, Tuple

import numpy as np

from optimizers.design_model import ModelError
from optimizers.link_budget import (
    UNASSIGNED,
    Assignment,
    LinkBudget,
    boosted_power,
    check_prev_powers,
    contested_power,
    initial_powers,
    kappa_ratio,
    make_assignment,
)
from optimizers.nua_assigner import NearestUserAssigner, nearest_pair
from optimizers.ssa_led_assigner import StrongestSignalLedAssigner, strongest_pair
from optimizers.ssa_user_assigner import StrongestSignalUserAssigner

MAX_LEDS = 8
MAX_USERS = 3
# fixed-point sweeps when tightening the own-mode signal floors
FLOOR_SWEEPS = 8
# relative margin under a value that must stay reachable (a seed, or a tie)
SLACK = 1e-9


class MaxMinSearch:
    """Depth-first branch and bound over (user, power level) choices per LED.

    LEDs are decided strongest first so the bounds tighten early. A subtree is cut when no
    completion can beat the incumbent: beating it puts a floor under every user's signal
    (raised to a fixed point in "own" mode, where the floors feed each other's
    interference), and the remaining LEDs, each serving one user at its top level at most,
    must cover the shortfall. Equal values go to the lexicographically smallest eps, so a
    subtree that could still produce a smaller eps is only cut when it cannot even tie.
    """

    def __init__(self, link: LinkBudget, levels: List[np.ndarray]):
        H = link.gains
        self.num_leds, self.num_users = H.shape
        self.noise = float(link.noise)
        self.own = link.interference == "own"

        top = np.array([lv.max() if lv.size else 0.0 for lv in levels])
        reach = H * top[:, None]
        strength = reach.max(axis=1) if self.num_users else np.zeros(self.num_leds)
        self.order = sorted(range(self.num_leds), key=lambda m: (-strength[m], m))
        self.rows = [H[m].tolist() for m in self.order]
        self.reach = [reach[m].tolist() for m in self.order]
        self.options = []
        for m in self.order:
            options = [(UNASSIGNED, 0.0)]
            options += [(int(u), float(p)) for u in np.flatnonzero(H[m] > 0) for p in levels[m]]
            self.options.append(options)

        self.subsets = [users for r in range(1, self.num_users + 1)
                        for users in itertools.combinations(range(self.num_users), r)]
        # capacity[d][i]: signal the LEDs from depth d on could add to subset i, each serving one user
        capacity = np.zeros((self.num_leds + 1, len(self.subsets)))
        for d in range(self.num_leds - 1, -1, -1):
            m = self.order[d]
            capacity[d] = capacity[d + 1] + [reach[m, list(users)].max() for users in self.subsets]
        self.capacity = capacity.tolist()

        self.best_value = 0.0
        self.best_eps: Tuple[int, ...] = (UNASSIGNED,) * self.num_leds
        self.best_powers: Tuple[float, ...] = (0.0,) * self.num_leds
        self.nodes = 0

    def seed(self, value: float):
        """Start from a known achievable value instead of zero."""
        threshold = value * (1.0 - SLACK)
        if threshold > self.best_value:
            self.best_value = threshold
            self.best_eps = (self.num_users,) * self.num_leds  # above every real eps

    def run(self) -> Tuple[np.ndarray, np.ndarray]:
        U, M = self.num_users, self.num_leds
        self._descend(0, [0.0] * (U * U), [UNASSIGNED] * M, [0.0] * M)
        if max(self.best_eps, default=UNASSIGNED) >= U:
            raise RuntimeError("Exhaustive search never reached its seeded value")
        return np.array(self.best_eps, dtype=int), np.array(self.best_powers, dtype=float)

    def _descend(self, depth: int, C: List[float], eps: List[int], powers: List[float]):
        self.nodes += 1
        if depth == self.num_leds:
            value = self._value(C)
            key = tuple(eps)
            if value > self.best_value or (value == self.best_value and key < self.best_eps):
                self.best_value = value
                self.best_eps = key
                self.best_powers = tuple(powers)
            return
        # undecided LEDs still at UNASSIGNED make eps the smallest key this subtree can give
        if self._cut(depth, C, ties=tuple(eps) < self.best_eps):
            return

        U = self.num_users
        m = self.order[depth]
        row = self.rows[depth]
        for k, p in self.options[depth]:
            if k == UNASSIGNED:
                child = C
            else:
                child = list(C)
                for u in range(U):
                    child[u * U + k] += row[u] * p
            eps[m], powers[m] = k, p
            self._descend(depth + 1, child, eps, powers)
        eps[m], powers[m] = UNASSIGNED, 0.0

    def _interference(self, C: List[float], u: int) -> float:
        U = self.num_users
        if self.own:
            return sum(C[k * U + k] ** 2 for k in range(U) if k != u)
        return sum(C[u * U + k] ** 2 for k in range(U) if k != u)

    def _value(self, C: List[float]) -> float:
        U, N = self.num_users, self.noise
        return min(C[u * U + u] ** 2 / (N + self._interference(C, u)) for u in range(U))

    def _cut(self, depth: int, C: List[float], ties: bool) -> bool:
        """True when no completion beats the incumbent (or, with ties, even matches it)."""
        U, N = self.num_users, self.noise
        best = self.best_value * (1.0 - SLACK) if ties else self.best_value
        signal = [C[u * U + u] for u in range(U)]

        # floor[u] bounds S_u^2 from below in every completion that reaches the incumbent
        if self.own:
            floor = [s * s for s in signal]
            total = sum(floor)
            for _ in range(FLOOR_SWEEPS):
                raised = False
                for u in range(U):
                    required = best * (N + total - floor[u])
                    if required > floor[u]:
                        total += required - floor[u]
                        floor[u] = required
                        raised = True
                if not raised:
                    break
        else:
            floor = [best * (N + self._interference(C, u)) for u in range(U)]

        need = [max(0.0, math.sqrt(floor[u]) - signal[u]) for u in range(U)]
        for users, capacity in zip(self.subsets, self.capacity[depth]):
            shortfall = sum(need[u] for u in users)
            if shortfall > 0 and shortfall >= capacity:
                return True

        short = [u for u in range(U) if need[u] > 0]
        if len(short) >= 2:
            share = sum(max(self.reach[d][u] / need[u] for u in short) for d in range(depth, self.num_leds))
            if share <= len(short):
                return True
        return False


class ExhaustiveAssigner:
    """Exact search over every eps (lexicographic, unassigned first) and every power level
    combination, warm-started from the best heuristic value."""

    name = "exhaustive"

    def __init__(self, max_leds: int = MAX_LEDS, max_users: int = MAX_USERS):
        self.max_leds = max_leds
        self.max_users = max_users
        self.nodes_explored = 0

    def power_levels(self, link: LinkBudget, P_prev) -> List[np.ndarray]:
        """Per-LED grid {P(1-tau), P, min(P(1+tau), Pmax)} plus the contested level
        max(P(1-kappa), P(1-tau)) of every kappa NUA, SSA-User or SSA-LED can give that LED.

        Levels come back highest first.
        """
        P_prev = np.asarray(P_prev, dtype=float)
        H = link.gains
        coverage = link.covered
        strongest_in = [H[coverage[:, u], u].max() if coverage[:, u].any() else 0.0
                        for u in range(link.num_users)]
        levels = []
        for m in range(link.num_leds):
            p = P_prev[m]
            grid = {p * (1.0 - link.tau), p, boosted_power(p, link.tau, link.p_max)}
            covered = np.flatnonzero(coverage[m])
            if covered.size >= 2:
                for pick in (nearest_pair, strongest_pair):
                    u_i, u_j = pick(link, covered, m)
                    grid.add(contested_power(p, kappa_ratio(H[m, u_j], H[m, u_i]), link.tau))
            for u in covered:
                grid.add(contested_power(p, kappa_ratio(strongest_in[u], H[m, u]), link.tau))
            levels.append(np.array(sorted(grid, reverse=True)))
        return levels

    def assign(self, link: LinkBudget, P_prev) -> Assignment:
        if link.num_leds > self.max_leds or link.num_users > self.max_users:
            raise ModelError(
                f"Exhaustive assignment is limited to {self.max_leds} LEDs and {self.max_users} users, "
                f"got {link.num_leds} and {link.num_users}"
            )
        P_prev = check_prev_powers(P_prev, link, self.name)
        base = initial_powers(P_prev, link)
        M, U = link.num_leds, link.num_users
        if U == 0:
            return make_assignment(np.full(M, UNASSIGNED), base, link, self.name)

        search = MaxMinSearch(link, self.power_levels(link, P_prev))
        for heuristic in (NearestUserAssigner(), StrongestSignalUserAssigner(), StrongestSignalLedAssigner()):
            search.seed(heuristic.assign(link, P_prev).min_sinr)
        eps, chosen = search.run()
        self.nodes_explored = search.nodes

        powers = base.copy()
        assigned = eps != UNASSIGNED
        powers[assigned] = chosen[assigned]
        return make_assignment(eps, powers, link, self.name)


def brute_force_assign(link: LinkBudget, P_prev) -> Assignment:
    return ExhaustiveAssigner().assign(link, P_prev)
