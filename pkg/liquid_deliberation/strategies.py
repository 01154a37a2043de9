"""
Agent behaviour: stage-1 delegation policies and correction authoring.

Strategies only read. They receive a view of the ledger and the opinions and
return announcements or draft targets; the engine applies whatever is valid.
Voting is not a strategy, it follows from `preference`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, TYPE_CHECKING

import numpy as np

from .errors import DomainError
from .ledger import Ledger, format_rational, parse_rational
from .preference import Opinion, distance_key, prefers
from .proposal import Correction, CorrectionSet, Metric, Proposal, corpus_delta

if TYPE_CHECKING:
    from .election import Committee


class StrategyKind(str, Enum):
    NOOP = "noop"
    STICK = "stick"
    RANDOM_DELEGATE = "random_delegate"
    PROXIMITY_DELEGATE = "proximity_delegate"
    EXPERT_SEEKER = "expert_seeker"
    RETRACT = "retract"


class CorrectionPolicy(str, Enum):
    GREEDY = "greedy"
    BUILDER = "builder"
    ABSTAIN = "abstain"


def _fraction(value) -> Fraction:
    if isinstance(value, str):
        return parse_rational(value)
    return Fraction(value)


@dataclass(frozen=True)
class StrategySpec:
    """How one agent delegates and, when seated, authors corrections.

    `fraction` is the delegation share rho, `pool_size` the number m of top
    power holders an expert seeker considers.
    """

    kind: StrategyKind = StrategyKind.NOOP
    fraction: Fraction = Fraction(1)
    pool_size: int = 1
    seed_offset: int = 0
    correction: CorrectionPolicy = CorrectionPolicy.GREEDY

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        object.__setattr__(self, "correction", CorrectionPolicy(self.correction))
        object.__setattr__(self, "fraction", _fraction(self.fraction))
        if not 0 <= self.fraction <= 1:
            raise DomainError(f"delegation fraction must lie in [0, 1], got {self.fraction}")
        if int(self.pool_size) < 1:
            raise DomainError(f"pool size must be at least 1, got {self.pool_size}")

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "StrategySpec":
        unknown = set(data) - {"kind", "fraction", "pool_size", "seed_offset", "correction"}
        if unknown:
            raise DomainError(f"unknown strategy fields {sorted(unknown)}")
        try:
            return cls(
                kind=data.get("kind", "noop"),
                fraction=data.get("fraction", 1),
                pool_size=int(data.get("pool_size", 1)),
                seed_offset=int(data.get("seed_offset", 0)),
                correction=data.get("correction", "greedy"),
            )
        except (TypeError, ValueError) as e:
            raise DomainError(str(e)) from e

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind.value,
            "fraction": format_rational(self.fraction),
            "pool_size": self.pool_size,
            "seed_offset": self.seed_offset,
            "correction": self.correction.value,
        }


@dataclass(frozen=True)
class Announcement:
    kind: str  # "transfer" or "reclaim"
    unit_id: int
    sender: int
    recipient: Optional[int] = None


@dataclass(frozen=True)
class DelegationView:
    """What an agent may look at during one stage-1 sub-round.

    `units` are the units offered to the agent in this sub-round: everything
    it holds in sub-round 0, only what it just received afterwards.
    """

    agent: int
    ledger: Ledger
    opinions: Sequence[Opinion]
    proposal: Proposal
    t: int
    sub_round: int
    units: Tuple[int, ...]


def _nearest(agent: int, candidates: Sequence[int], opinions: Sequence[Opinion]) -> Optional[int]:
    own = opinions[agent]
    others = [j for j in candidates if j != agent]
    if not others:
        return None
    return min(others, key=lambda j: (distance_key(opinions[j].optimum, own.optimum, own.distance), j))


def _top_holders(ledger: Ledger, agent: int, m: int) -> List[int]:
    """The m largest power holders, minus the agent itself if it is among them."""
    powers = ledger.powers()
    ranked = sorted((j for j in range(ledger.agent_count) if powers[j] > 0), key=lambda j: (-powers[j], j))
    return [j for j in ranked[:m] if j != agent]


def delegate_decide(agent: int, view: DelegationView, spec: StrategySpec, rng: np.random.Generator) -> List[Announcement]:
    """Announcements the agent makes in one stage-1 sub-round."""
    kind = spec.kind
    n = view.ledger.agent_count

    if kind in (StrategyKind.NOOP, StrategyKind.STICK):
        return []

    if kind is StrategyKind.RETRACT:
        if view.sub_round > 0:
            return []
        delegated = view.ledger.delegated_units(agent)
        count = math.floor(spec.fraction * len(delegated))
        return [Announcement("reclaim", uid, agent) for uid in delegated[:count]]

    if kind is StrategyKind.RANDOM_DELEGATE:
        announcements = []
        rho = float(spec.fraction)
        for uid in view.units:
            if rng.random() < rho:
                recipient = int(rng.integers(n - 1))
                if recipient >= agent:
                    recipient += 1
                announcements.append(Announcement("transfer", uid, agent, recipient))
        return announcements

    if kind is StrategyKind.PROXIMITY_DELEGATE:
        recipient = _nearest(agent, range(n), view.opinions)
    else:
        recipient = _nearest(agent, _top_holders(view.ledger, agent, spec.pool_size), view.opinions)
    if recipient is None:
        return []
    count = math.floor(spec.fraction * len(view.units))
    return [Announcement("transfer", uid, agent, recipient) for uid in view.units[:count]]


def _pull_within_budget(target: List[float], base: Proposal, budget: Fraction, metric: Metric) -> Proposal:
    # float rounding can leave the target a few ulps over budget
    candidate = Proposal(tuple(target))
    while corpus_delta(candidate, base, metric) > budget:
        target = [
            x if x == b else math.nextafter(x, b)
            for x, b in zip(target, base.values)
        ]
        candidate = Proposal(tuple(target))
    return candidate


def correct_decide(
    member: int,
    budget: Fraction,
    current: Proposal,
    opinion: Opinion,
    metric: Metric,
    rng: Optional[np.random.Generator] = None,
    base: Optional[Proposal] = None,
) -> Optional[Proposal]:
    """Greedy move from the base toward the member's optimum.

    Under l1_normalized the step beta = min(1, budget * s / |optimum - base|_1)
    makes the budget bind unless the optimum is reachable. Under
    hamming_fraction the floor(budget * s) coordinates furthest from the
    optimum jump to it. Returns None when there is nothing to change.
    """
    start = base if base is not None else current
    s = start.dimension
    origin, goal = start.exact(), opinion.optimum.exact()
    gaps = [g - x for x, g in zip(origin, goal)]
    if not any(gaps):
        return None

    if Metric(metric) is Metric.HAMMING_FRACTION:
        quota = math.floor(budget * s)
        order = sorted((m for m in range(s) if gaps[m]), key=lambda m: (-abs(gaps[m]), m))
        chosen = order[:quota]
        if not chosen:
            return None
        return start.replace_coordinates({m: opinion.optimum[m] for m in chosen})

    beta = min(Fraction(1), budget * s / sum(abs(g) for g in gaps))
    if beta == 1:
        return opinion.optimum
    target = [float(x + beta * g) for x, g in zip(origin, gaps)]
    candidate = _pull_within_budget(target, start, budget, metric)
    return None if candidate == start else candidate


@dataclass(frozen=True)
class Draft:
    target: Proposal
    parent: Optional[int] = None


def author_correction(
    member: int,
    spec: StrategySpec,
    budget: Fraction,
    current: Proposal,
    opinion: Opinion,
    metric: Metric,
    rng: np.random.Generator,
    earlier: Sequence[Correction] = (),
) -> Optional[Draft]:
    """The member's correction for this step, if any.

    A builder extends the earlier correction it likes best, provided it likes
    that correction better than the current proposal.
    """
    if spec.correction is CorrectionPolicy.ABSTAIN:
        return None

    if spec.correction is CorrectionPolicy.BUILDER:
        liked = [c for c in earlier if c.author != member and prefers(opinion, c.target, current) and c.target != current]
        if liked:
            parent = min(liked, key=lambda c: (opinion.distance_to(c.target), c.id))
            target = correct_decide(member, budget, current, opinion, metric, rng, base=parent.target)
            if target is not None:
                return Draft(target, parent.id)

    target = correct_decide(member, budget, current, opinion, metric, rng)
    return Draft(target) if target is not None else None


def amend_decide(first: Correction, second: Correction, committee: "Committee", corrections: CorrectionSet) -> Proposal:
    """Joint amendment of two conflicting corrections.

    Contested coordinates get the power-weighted average of both targets;
    uncontested changes of either side are kept.
    """
    weight_a = sum((committee.powers[a] for a in first.authors), Fraction(0))
    weight_b = sum((committee.powers[b] for b in second.authors), Fraction(0))
    touched_a, touched_b = corrections.changes(first), corrections.changes(second)

    changes: Dict[int, float] = {}
    for m in sorted(touched_a | touched_b):
        a, b = first.target[m], second.target[m]
        if m in touched_a and m in touched_b and a != b:
            mixed = (weight_a * Fraction(a) + weight_b * Fraction(b)) / (weight_a + weight_b)
            changes[m] = float(mixed)
        elif m in touched_a:
            changes[m] = a
        else:
            changes[m] = b
    return corrections.base.replace_coordinates(changes)
