"""
StrongestSignalLedAssigner: LED-by-LED scan, assignment by channel strength with a crowd limit.
"""

import math
from typing import Optional

import numpy as np

from optimizers.link_budget import (
    UNASSIGNED,
    Assignment,
    LinkBudget,
    check_prev_powers,
    contested_power,
    initial_powers,
    kappa_ratio,
    make_assignment,
)


def default_crowd_threshold(num_users: int) -> int:
    """3 % of the users, but never below one."""
    return max(1, math.ceil(0.03 * num_users))


def strongest_pair(link: LinkBudget, covered: np.ndarray, m: int):
    """The two covered users LED m reaches most strongly, strongest first."""
    strongest = covered[np.lexsort((covered, -link.gains[m, covered]))]
    return strongest[0], strongest[1]


class StrongestSignalLedAssigner:
    """LEDs covering a crowd larger than the threshold stay on illumination duty."""

    name = "ssa-led"

    def __init__(self, crowd_threshold: Optional[int] = None):
        if crowd_threshold is not None and crowd_threshold < 1:
            raise ValueError("crowd_threshold must be at least 1")
        self.crowd_threshold = crowd_threshold

    def assign(self, link: LinkBudget, P_prev) -> Assignment:
        P_prev = check_prev_powers(P_prev, link, self.name)
        threshold = self.crowd_threshold or default_crowd_threshold(link.num_users)
        powers = initial_powers(P_prev, link)
        eps = np.full(link.num_leds, UNASSIGNED, dtype=int)

        coverage = link.covered
        for m in range(link.num_leds):
            covered = np.flatnonzero(coverage[m])
            if covered.size == 0:
                continue
            if covered.size == 1:
                eps[m] = covered[0]
                continue
            if covered.size > threshold:
                continue
            u_i, u_j = strongest_pair(link, covered, m)
            eps[m] = u_i
            kappa = kappa_ratio(link.gains[m, u_j], link.gains[m, u_i])
            powers[m] = contested_power(P_prev[m], kappa, link.tau)

        return make_assignment(eps, powers, link, self.name)


def ssa_led_assign(link: LinkBudget, P_prev, crowd_threshold: Optional[int] = None) -> Assignment:
    return StrongestSignalLedAssigner(crowd_threshold).assign(link, P_prev)
