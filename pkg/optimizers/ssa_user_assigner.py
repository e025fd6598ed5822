"""
StrongestSignalUserAssigner: user-by-user assignment in priority order.
"""

from typing import Optional, Sequence

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


class StrongestSignalUserAssigner:
    """Visits users in priority order and hands each one every free LED reaching it.

    When some LED reaching the user already serves another user, the strongest free LED is
    discounted by kappa = H(strongest incoming LED) / H(strongest free LED).
    """

    name = "ssa-user"

    def __init__(self, order: Optional[Sequence[int]] = None):
        self.order = None if order is None else [int(u) for u in order]

    def _priority(self, num_users: int):
        if self.order is None:
            return list(range(num_users))
        if sorted(self.order) != list(range(num_users)):
            raise ValueError(f"User order must be a permutation of 0..{num_users - 1}")
        return self.order

    def assign(self, link: LinkBudget, P_prev) -> Assignment:
        P_prev = check_prev_powers(P_prev, link, self.name)
        powers = initial_powers(P_prev, link)
        eps = np.full(link.num_leds, UNASSIGNED, dtype=int)

        coverage = link.covered
        for u in self._priority(link.num_users):
            incoming = np.flatnonzero(coverage[:, u])
            if incoming.size == 0:
                continue
            free = incoming[eps[incoming] == UNASSIGNED]
            if free.size == 0:
                continue
            eps[free] = u
            if free.size == incoming.size:
                continue
            # argmax keeps the lowest LED index on ties
            m_j = incoming[np.argmax(link.gains[incoming, u])]
            m_i = free[np.argmax(link.gains[free, u])]
            kappa = kappa_ratio(link.gains[m_j, u], link.gains[m_i, u])
            powers[m_i] = contested_power(P_prev[m_i], kappa, link.tau)

        return make_assignment(eps, powers, link, self.name)


def ssa_user_assign(link: LinkBudget, P_prev, order: Optional[Sequence[int]] = None) -> Assignment:
    return StrongestSignalUserAssigner(order).assign(link, P_prev)
