"""
Opinions, votes and ratification by the society outside the committee.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Optional, TYPE_CHECKING

from .errors import DomainError, UnauthorizedError
from .ledger import format_rational
from .proposal import Correction, Proposal

if TYPE_CHECKING:
    from .election import Committee


class Distance(str, Enum):
    EUCLIDEAN = "euclidean"
    L1 = "l1"


def distance_key(a: Proposal, b: Proposal, distance: Distance = Distance.EUCLIDEAN) -> Fraction:
    """Exact, order-preserving distance: squared for euclidean, plain for l1."""
    if a.dimension != b.dimension:
        raise DomainError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    diffs = (x - y for x, y in zip(a.exact(), b.exact()))
    if Distance(distance) is Distance.L1:
        return sum((abs(d) for d in diffs), Fraction(0))
    return sum((d * d for d in diffs), Fraction(0))


@dataclass(frozen=True)
class Opinion:
    """An agent's optimum and the total order it induces over proposals."""

    owner: int
    optimum: Proposal
    distance: Distance = Distance.EUCLIDEAN

    def distance_to(self, proposal: Proposal) -> Fraction:
        return distance_key(proposal, self.optimum, self.distance)


def prefers(opinion: Opinion, a: Proposal, b: Proposal) -> bool:
    """a is weakly preferred to b.

    Closer to the optimum wins; at equal distance the lexicographically
    smaller vector wins, which makes the relation antisymmetric.
    """
    da, db = opinion.distance_to(a), opinion.distance_to(b)
    if da != db:
        return da < db
    return a.values <= b.values


@dataclass(frozen=True)
class Voter:
    """An agent outside the committee, as seen by the tally."""

    agent: int
    power: Fraction
    engaged: bool
    opinion: Opinion


def vote(
    voter: int,
    correction: Correction,
    current: Proposal,
    status_quo: Proposal,
    power: Fraction,
    engaged: bool,
    opinion: Opinion,
    committee: Optional["Committee"] = None,
) -> Fraction:
    """The voter's favourable power for a correction (0 when against).

    A disengaged voter never objects, so its power counts as favourable.
    """
    if committee is not None and voter in committee:
        raise UnauthorizedError(f"committee member {voter} cannot vote on corrections")
    if not engaged:
        return power
    favourable = prefers(opinion, correction.target, current) and prefers(opinion, current, status_quo)
    return power if favourable else Fraction(0)


@dataclass(frozen=True)
class Tally:
    favourable: Fraction
    total: Fraction

    @property
    def passed(self) -> bool:
        # strict majority of the outside power
        return self.favourable > self.total / 2

    def to_payload(self) -> Dict[str, object]:
        return {
            "favourable": format_rational(self.favourable),
            "total": format_rational(self.total),
            "passed": self.passed,
        }


def tally(correction: Correction, outside_voters: Iterable[Voter], current: Proposal, status_quo: Proposal) -> Tally:
    favourable = Fraction(0)
    total = Fraction(0)
    for voter in outside_voters:
        favourable += vote(voter.agent, correction, current, status_quo, voter.power, voter.engaged, voter.opinion)
        total += voter.power
    return Tally(favourable, total)


def ratify(correction: Correction, outside_voters: Iterable[Voter], current: Proposal, status_quo: Proposal) -> bool:
    """True iff more than half of the outside power is favourable."""
    return tally(correction, outside_voters, current, status_quo).passed
