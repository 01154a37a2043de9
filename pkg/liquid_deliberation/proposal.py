"""
Proposal vectors, the corpus-change metric f, and committee corrections.

A correction carries the full corrected vector. Its cost is measured against
its own base: the current proposal for a root correction, or the parent's
target for a correction that builds upon another member's.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, TYPE_CHECKING

from .errors import DomainError, LineageError, UnauthorizedError, UnresolvedConflictError
from .ledger import format_rational

if TYPE_CHECKING:
    from .election import Committee

logger = logging.getLogger(__name__)


class Metric(str, Enum):
    L1_NORMALIZED = "l1_normalized"
    HAMMING_FRACTION = "hamming_fraction"


@dataclass(frozen=True)
class Proposal:
    """A point of [0, 1]^s."""

    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise DomainError("a proposal needs at least one coordinate")
        for m, v in enumerate(values):
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"coordinate {m} = {v} outside [0, 1]")
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, *values: float) -> "Proposal":
        return cls(tuple(values))

    @property
    def dimension(self) -> int:
        return len(self.values)

    def exact(self) -> Tuple[Fraction, ...]:
        """Coordinates as the exact rationals the floats denote."""
        return tuple(Fraction(v) for v in self.values)

    def replace_coordinates(self, changes: Dict[int, float]) -> "Proposal":
        values = list(self.values)
        for m, v in changes.items():
            values[m] = v
        return Proposal(tuple(values))

    def to_list(self) -> List[float]:
        return list(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __getitem__(self, m: int) -> float:
        return self.values[m]


def _check_dimensions(a: Proposal, b: Proposal) -> None:
    if a.dimension != b.dimension:
        raise DomainError(f"dimension mismatch: {a.dimension} vs {b.dimension}")


def corpus_delta(a: Proposal, b: Proposal, metric: Metric = Metric.L1_NORMALIZED) -> Fraction:
    """Share of the corpus that differs between `a` and `b`, in [0, 1]."""
    _check_dimensions(a, b)
    metric = Metric(metric)
    s = a.dimension
    if metric is Metric.HAMMING_FRACTION:
        return Fraction(sum(1 for x, y in zip(a.values, b.values) if x != y), s)
    return sum((abs(x - y) for x, y in zip(a.exact(), b.exact())), Fraction(0)) / s


def changed_coordinates(target: Proposal, base: Proposal) -> Set[int]:
    _check_dimensions(target, base)
    return {m for m, (x, y) in enumerate(zip(target.values, base.values)) if x != y}


def budget_share(member: int, committee: "Committee") -> Fraction:
    """The member's power as a share of the whole committee's power."""
    if member not in committee.powers:
        raise DomainError(f"agent {member} is not seated on the committee")
    return committee.powers[member] / committee.total_power


@dataclass(frozen=True)
class Correction:
    """A budgeted edit of the proposal authored in one iteration.

    Amendments produced jointly by conflicting authors list the second author
    (and any further ones) in `coauthors`.
    """

    id: int
    author: int
    target: Proposal
    iteration: int
    parent: Optional[int] = None
    cost: Fraction = Fraction(0)
    coauthors: Tuple[int, ...] = ()
    kind: str = "correction"

    @property
    def authors(self) -> Tuple[int, ...]:
        return (self.author,) + self.coauthors

    def to_payload(self) -> Dict[str, object]:
        payload: Dict[str, object] = {
            "id": self.id,
            "author": self.author,
            "parent": self.parent,
            "target": self.target.to_list(),
            "cost": format_rational(self.cost),
        }
        if self.coauthors:
            payload["coauthors"] = list(self.coauthors)
        return payload


@dataclass(frozen=True)
class Validation:
    accepted: bool
    reason: str
    cost: Fraction
    budget: Fraction


class CorrectionSet:
    """The corrections of one iteration, with their build-upon forest."""

    def __init__(self, iteration: int, base: Proposal, corrections: Iterable[Correction] = ()):
        self.iteration = iteration
        self.base = base
        self._by_id: Dict[int, Correction] = {}
        self._next_id = 0
        for correction in corrections:
            self.add(correction)

    def add(self, correction: Correction) -> Correction:
        if correction.id in self._by_id:
            raise LineageError(f"duplicate correction id {correction.id}")
        self._by_id[correction.id] = correction
        self._next_id = max(self._next_id, correction.id + 1)
        return correction

    def propose(
        self,
        author: int,
        target: Proposal,
        metric: Metric = Metric.L1_NORMALIZED,
        parent: Optional[int] = None,
        coauthors: Sequence[int] = (),
        kind: str = "correction",
    ) -> Correction:
        """Register a new correction, costing it against its effective base."""
        base = self.base if parent is None else self.get(parent).target
        correction = Correction(
            id=self._next_id,
            author=author,
            target=target,
            iteration=self.iteration,
            parent=parent,
            cost=corpus_delta(target, base, metric),
            coauthors=tuple(coauthors),
            kind=kind,
        )
        return self.add(correction)

    def get(self, correction_id: int) -> Correction:
        try:
            return self._by_id[correction_id]
        except KeyError:
            raise LineageError(f"correction {correction_id} is not part of iteration {self.iteration}") from None

    def subset(self, ids: Iterable[int]) -> "CorrectionSet":
        chosen = CorrectionSet(self.iteration, self.base, (self._by_id[i] for i in sorted(set(ids))))
        chosen._next_id = max(chosen._next_id, self._next_id)
        return chosen

    def __iter__(self) -> Iterator[Correction]:
        return iter(sorted(self._by_id.values(), key=lambda c: c.id))

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, correction_id: object) -> bool:
        return correction_id in self._by_id

    @property
    def ids(self) -> List[int]:
        return sorted(self._by_id)

    def ancestors(self, correction: Correction) -> List[Correction]:
        """Parent, grandparent, ... of a correction, nearest first."""
        chain: List[Correction] = []
        seen = {correction.id}
        current = correction
        while current.parent is not None:
            parent = self.get(current.parent)
            if parent.id in seen:
                raise LineageError(f"build-upon cycle through correction {parent.id}")
            if parent.iteration != correction.iteration:
                raise LineageError(
                    f"correction {correction.id} builds on {parent.id} from iteration {parent.iteration}"
                )
            seen.add(parent.id)
            chain.append(parent)
            current = parent
        return chain

    def base_of(self, correction: Correction) -> Proposal:
        if correction.parent is None:
            return self.base
        return self.get(correction.parent).target

    def changes(self, correction: Correction) -> Set[int]:
        """Coordinates the correction or any of its ancestors changed."""
        touched = changed_coordinates(correction.target, self.base_of(correction))
        for ancestor in self.ancestors(correction):
            touched |= changed_coordinates(ancestor.target, self.base_of(ancestor))
        return touched

    def root_of(self, correction: Correction) -> Correction:
        lineage = self.ancestors(correction)
        return lineage[-1] if lineage else correction

    def families(self) -> List[List[Correction]]:
        """Corrections grouped by the root they build upon, ordered by root id."""
        groups: Dict[int, List[Correction]] = {}
        for correction in self:
            groups.setdefault(self.root_of(correction).id, []).append(correction)
        return [groups[root] for root in sorted(groups)]

    def related(self, a: Correction, b: Correction) -> bool:
        """True when one correction builds (transitively) upon the other."""
        return a.id in {x.id for x in self.ancestors(b)} or b.id in {x.id for x in self.ancestors(a)}

    def to_payload(self) -> List[Dict[str, object]]:
        return [correction.to_payload() for correction in self]


def validate_correction(
    correction: Correction,
    committee: "Committee",
    base: Proposal,
    metric: Metric = Metric.L1_NORMALIZED,
    lineage: Optional[CorrectionSet] = None,
) -> Validation:
    """Check a correction against its authors' budget.

    The budget of a jointly authored amendment is the sum of its authors'
    shares. A build-upon correction is costed against its parent's target.
    """
    for author in correction.authors:
        if author not in committee.powers:
            raise UnauthorizedError(f"agent {author} is not on the committee and cannot author corrections")

    effective_base = base
    if correction.parent is not None:
        if lineage is None:
            raise LineageError(f"correction {correction.id} builds on {correction.parent} without a lineage")
        parent = lineage.get(correction.parent)
        lineage.ancestors(correction)
        if parent.author == correction.author:
            raise LineageError(f"agent {correction.author} cannot build upon its own correction")
        effective_base = parent.target

    budget = sum((budget_share(a, committee) for a in correction.authors), Fraction(0))
    cost = corpus_delta(correction.target, effective_base, metric)
    if cost > budget:
        return Validation(False, f"cost {float(cost):.6g} exceeds budget {float(budget):.6g}", cost, budget)
    return Validation(True, "within budget", cost, budget)


def _conflicting(corrections: CorrectionSet, a: Correction, b: Correction) -> bool:
    if corrections.related(a, b):
        return False
    shared = corrections.changes(a) & corrections.changes(b)
    return any(a.target[m] != b.target[m] for m in shared)


def detect_conflicts(corrections: CorrectionSet, among: Optional[Iterable[int]] = None) -> List[Tuple[int, int]]:
    """Pairs of corrections that set a common changed coordinate differently.

    `among` restricts the comparison to some corrections of the set while the
    rest still serve as ancestors.
    """
    ids = sorted(among) if among is not None else corrections.ids
    pairs = []
    for i, first in enumerate(ids):
        for second in ids[i + 1:]:
            if _conflicting(corrections, corrections.get(first), corrections.get(second)):
                pairs.append((first, second))
    return pairs


def richest_chain(accepted: CorrectionSet) -> Correction:
    """The correction building upon the most others; ties go to the lowest author."""
    if not len(accepted):
        raise DomainError("no accepted corrections to choose from")
    return min(accepted, key=lambda c: (-len(accepted.ancestors(c)), c.author, c.id))


def family_heads(accepted: CorrectionSet) -> List[Correction]:
    heads = []
    for family in accepted.families():
        heads.append(richest_chain(accepted.subset(c.id for c in family)))
    return heads


def assemble_next(current: Proposal, accepted: CorrectionSet) -> Proposal:
    """Apply the surviving corrections to the current proposal.

    Only the richest head of each build-upon family is applied, carrying its
    ancestors' changes with it.
    """
    if not len(accepted):
        return current
    heads = family_heads(accepted)
    conflicts = detect_conflicts(accepted, among=[h.id for h in heads])
    if conflicts:
        raise UnresolvedConflictError(f"conflicting corrections reached assembly: {conflicts}")

    changes: Dict[int, float] = {}
    for head in heads:
        for m in accepted.changes(head):
            changes[m] = head.target[m]
    return current.replace_coordinates(changes)
