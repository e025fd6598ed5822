"""
NearestUserAssigner: LED-by-LED assignment to the covered user closest to the beam axis.
"""

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


def nearest_pair(link: LinkBudget, covered: np.ndarray, m: int):
    """The two covered users closest to LED m's beam axis, nearest first."""
    # lexsort: last key is primary, so ties fall back to the lower user index
    nearest = covered[np.lexsort((covered, link.axis_distance[m, covered]))]
    return nearest[0], nearest[1]


class NearestUserAssigner:
    """Assigns each LED to the covered user nearest its beam axis."""

    name = "nua"

    def assign(self, link: LinkBudget, P_prev) -> Assignment:
        P_prev = check_prev_powers(P_prev, link, self.name)
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
            u_i, u_j = nearest_pair(link, covered, m)
            eps[m] = u_i
            kappa = kappa_ratio(link.gains[m, u_j], link.gains[m, u_i])
            powers[m] = contested_power(P_prev[m], kappa, link.tau)

        return make_assignment(eps, powers, link, self.name)


def nua_assign(link: LinkBudget, P_prev) -> Assignment:
    return NearestUserAssigner().assign(link, P_prev)
