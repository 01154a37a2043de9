"""
Stage 2: seating the deliberative committee.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import groupby
from typing import Dict, Tuple

from .errors import DomainError, EmptySocietyError
from .ledger import Ledger, format_rational

logger = logging.getLogger(__name__)

Fingerprint = Tuple[Tuple[int, Fraction], ...]


@dataclass(frozen=True)
class Committee:
    """Seated experts and their power at the moment of seating."""

    members: Tuple[int, ...]
    powers: Dict[int, Fraction]

    @property
    def total_power(self) -> Fraction:
        return sum(self.powers.values(), Fraction(0))

    def __contains__(self, agent: object) -> bool:
        return agent in self.powers

    def __len__(self) -> int:
        return len(self.members)

    def to_payload(self) -> Dict[str, object]:
        return {
            "members": [{"id": m, "power": format_rational(self.powers[m])} for m in self.members]
        }


def _rank_key(agent: int, power: Fraction, appeals: Tuple[Fraction, ...]):
    return (-power, tuple(-a for a in appeals), agent)


def select_committee(ledger: Ledger, k: int) -> Committee:
    """Seat the top-k agents by power.

    A tie straddling the last seat is broken by comparing appeals of order
    2, 3, ..., n in turn. If agents remain tied across the boundary after
    every order, the whole tied group is left out and only agents strictly
    above the tie-inducing power sit, possibly fewer than k.
    """
    if not 1 <= k < ledger.agent_count:
        raise DomainError(f"committee size must lie in [1, {ledger.agent_count - 1}], got {k}")

    powers = ledger.powers()
    candidates = [agent for agent, power in enumerate(powers) if power > 0]
    if not candidates:
        raise EmptySocietyError("every agent holds zero voting power")

    appeals = {agent: ledger.appeal_vector(agent) for agent in candidates}
    ranked = sorted(candidates, key=lambda a: _rank_key(a, powers[a], appeals[a]))

    if len(ranked) <= k:
        seated = ranked
    else:
        seated = []
        for power, group in groupby(ranked, key=lambda a: powers[a]):
            group = list(group)
            free = k - len(seated)
            if len(group) <= free:
                seated.extend(group)
                if len(seated) == k:
                    break
                continue
            # the tie straddles the boundary: can appeals split it cleanly?
            if appeals[group[free - 1]] != appeals[group[free]]:
                seated.extend(group[:free])
            else:
                logger.debug("unbroken tie at power %s; seating %d of %d", power, len(seated), k)
            break

    members = tuple(seated)
    return Committee(members=members, powers={m: powers[m] for m in members})


def committee_fingerprint(committee: Committee) -> Fingerprint:
    """Canonical (member, exact power) pairs; equal iff the committee is unchanged."""
    return tuple(sorted(committee.powers.items()))

