"""
Voting-power units, dilution and the ledger that owns them.

Every unit carries an exact rational value and a chain of custody, original
owner first and current holder last. Each ownership mutation multiplies the
unit's value by (1 - c).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Set, Tuple

from .errors import (
    DomainError,
    NoOpReclaimError,
    ProtocolPhaseError,
    RetiredUnitError,
    UnauthorizedError,
)

logger = logging.getLogger(__name__)

_RATIONAL = re.compile(r"^\s*(\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(text: str) -> Fraction:
    """Parse a non-negative "num/den" (or bare integer) string."""
    match = _RATIONAL.match(str(text))
    if not match:
        raise DomainError(f"malformed rational {text!r}, expected 'num/den'")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise DomainError(f"zero denominator in {text!r}")
    return Fraction(numerator, denominator)


def format_rational(value: Fraction) -> str:
    """Serialize an exact rational as "num/den"."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Dilution:
    """The dilution factor c = numerator / denominator, with 0 < c < 1."""

    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0:
            raise DomainError("dilution denominator must be positive")
        factor = Fraction(self.numerator, self.denominator)
        if not 0 < factor < 1:
            raise DomainError(f"dilution must lie strictly between 0 and 1, got {factor}")
        # lowest terms
        object.__setattr__(self, "numerator", factor.numerator)
        object.__setattr__(self, "denominator", factor.denominator)

    @classmethod
    def parse(cls, text: str) -> "Dilution":
        factor = parse_rational(text)
        return cls(factor.numerator, factor.denominator)

    @property
    def factor(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def retained(self) -> Fraction:
        """Share of a unit's value that survives one mutation."""
        return 1 - self.factor

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class Unit:
    """One indivisible voting-power unit."""

    id: int
    value: Fraction
    chain: Tuple[int, ...]
    mutation_count: int = 0
    initial_value: Fraction = Fraction(1)
    retired: bool = False

    @property
    def owner(self) -> int:
        return self.chain[0]

    @property
    def holder(self) -> int:
        return self.chain[-1]

    def to_dict(self) -> Dict[str, object]:
        return {
            "id": self.id,
            "value": format_rational(self.value),
            "chain": list(self.chain),
            "mutation_count": self.mutation_count,
        }


@dataclass(frozen=True)
class MutationEvent:
    """One entry of the ledger's mutation log."""

    kind: str  # "transfer" or "reclaim"
    unit_id: int
    actor: int
    recipient: int
    value_before: Fraction
    value_after: Fraction
    chain_after: Tuple[int, ...]
    mutation_count: int

    def to_payload(self) -> Dict[str, object]:
        payload: Dict[str, object] = {"unit": self.unit_id}
        if self.kind == "reclaim":
            payload["owner"] = self.actor
        else:
            payload["from"] = self.actor
            payload["to"] = self.recipient
        payload["value"] = format_rational(self.value_after)
        payload["chain"] = list(self.chain_after)
        payload["mutation_count"] = self.mutation_count
        return payload


class Ledger:
    """The universe U of voting-power units for one run.

    Single writer: the engine mutates it during stage 1 only. Per-holder power
    and holdings are kept as incremental indexes next to the unit list.
    """

    def __init__(self, agent_count: int, dilution: Dilution):
        if agent_count < 1:
            raise DomainError("a society needs at least one agent")
        self.agent_count = agent_count
        self.dilution = dilution
        self.history: List[MutationEvent] = []
        self._units: List[Unit] = []
        self._power: List[Fraction] = [Fraction(0)] * agent_count
        self._holdings: List[Set[int]] = [set() for _ in range(agent_count)]
        self._started = False

    # -- lifecycle -----------------------------------------------------

    @property
    def started(self) -> bool:
        return self._started

    def start(self) -> None:
        """Close issuance; called by the engine before iteration t = 0."""
        self._started = True

    def issue_units(self, owner: int, count: int, initial_value: Fraction = Fraction(1)) -> List[int]:
        """Issue `count` fresh units to `owner` and return their ids."""
        if self._started:
            raise ProtocolPhaseError("units can only be issued before the simulation starts")
        self._check_agent(owner)
        if count < 1:
            raise DomainError(f"unit count must be positive, got {count}")
        initial_value = Fraction(initial_value)
        if not 0 < initial_value <= 1:
            raise DomainError(f"initial unit value must lie in (0, 1], got {initial_value}")

        ids = []
        for _ in range(count):
            unit = Unit(
                id=len(self._units),
                value=initial_value,
                chain=(owner,),
                initial_value=initial_value,
            )
            self._units.append(unit)
            self._attach(unit)
            ids.append(unit.id)
        return ids

    # -- reads ---------------------------------------------------------

    @property
    def units(self) -> Tuple[Unit, ...]:
        return tuple(self._units)

    def unit(self, unit_id: int) -> Unit:
        if not 0 <= unit_id < len(self._units):
            raise DomainError(f"unknown unit {unit_id}")
        return self._units[unit_id]

    def power(self, agent: int) -> Fraction:
        """Voting power: total value of the units the agent currently holds."""
        self._check_agent(agent)
        return self._power[agent]

    def powers(self) -> List[Fraction]:
        return list(self._power)

    def appeal(self, agent: int, order: int) -> Fraction:
        """Value the agent holds through chains of length exactly `order`."""
        self._check_agent(agent)
        if not 2 <= order <= self.agent_count:
            raise DomainError(f"appeal order must lie in [2, {self.agent_count}], got {order}")
        return sum(
            (self._units[uid].value for uid in self._holdings[agent] if len(self._units[uid].chain) == order),
            Fraction(0),
        )

    def appeal_vector(self, agent: int) -> Tuple[Fraction, ...]:
        """Appeals of orders 2..n in one pass over the agent's holdings."""
        self._check_agent(agent)
        buckets = [Fraction(0)] * (self.agent_count + 1)
        for uid in self._holdings[agent]:
            unit = self._units[uid]
            buckets[len(unit.chain)] += unit.value
        return tuple(buckets[2:])

    def total_power(self) -> Fraction:
        return sum((unit.value for unit in self._units), Fraction(0))

    def held_units(self, agent: int) -> List[int]:
        """Live units whose current holder is the agent, ascending ids."""
        self._check_agent(agent)
        return sorted(uid for uid in self._holdings[agent] if not self._units[uid].retired)

    def delegated_units(self, agent: int) -> List[int]:
        """Live units the agent passed on and may still redirect or reclaim."""
        self._check_agent(agent)
        return [
            unit.id
            for unit in self._units
            if not unit.retired and unit.holder != agent and agent in unit.chain
        ]

    # -- mutations -----------------------------------------------------

    def transfer(self, unit_id: int, sender: int, recipient: int) -> Unit:
        """Move a unit from `sender` to `recipient`, applying one dilution.

        `sender` may be the current holder (plain delegation) or any earlier
        owner in the chain (redelegation): the chain is cut right after the
        sender's first occurrence and the recipient appended.
        """
        unit = self._live(unit_id)
        if sender not in unit.chain:
            raise UnauthorizedError(f"agent {sender} is not in the chain of unit {unit_id}")
        self._check_agent(recipient)
        if recipient == sender:
            raise DomainError(f"agent {sender} cannot transfer unit {unit_id} to itself")

        cut = unit.chain.index(sender) + 1
        chain = unit.chain[:cut] + (recipient,)
        if len(chain) > self.agent_count:
            raise DomainError(
                f"chain of unit {unit_id} would grow to {len(chain)} owners in a society of {self.agent_count}"
            )
        return self._mutate(unit, chain, "transfer", sender, recipient)

    def reclaim(self, unit_id: int, owner: int) -> Unit:
        """Pull a delegated unit back to an earlier owner, applying one dilution."""
        unit = self._live(unit_id)
        if unit.holder == owner:
            raise NoOpReclaimError(f"agent {owner} already holds unit {unit_id}")
        if owner not in unit.chain:
            raise UnauthorizedError(f"agent {owner} is not in the chain of unit {unit_id}")
        chain = unit.chain[: unit.chain.index(owner) + 1]
        return self._mutate(unit, chain, "reclaim", owner, owner)

    def retire_below(self, floor: Fraction) -> List[int]:
        """Force every live unit valued below `floor` to zero."""
        retired = []
        for unit in self._units:
            if not unit.retired and unit.value < floor:
                self._detach(unit)
                updated = replace(unit, value=Fraction(0), retired=True)
                self._units[unit.id] = updated
                self._attach(updated)
                retired.append(unit.id)
        if retired:
            logger.debug("retired %d units below %s", len(retired), floor)
        return retired

    def to_dict(self) -> Dict[str, object]:
        return {
            "agent_count": self.agent_count,
            "dilution": str(self.dilution),
            "units": [unit.to_dict() for unit in self._units],
        }

    # -- internals -----------------------------------------------------

    def _mutate(self, unit: Unit, chain: Tuple[int, ...], kind: str, actor: int, recipient: int) -> Unit:
        updated = replace(
            unit,
            chain=chain,
            value=unit.value * self.dilution.retained,
            mutation_count=unit.mutation_count + 1,
        )
        self._detach(unit)
        self._units[unit.id] = updated
        self._attach(updated)
        self.history.append(
            MutationEvent(
                kind=kind,
                unit_id=unit.id,
                actor=actor,
                recipient=recipient,
                value_before=unit.value,
                value_after=updated.value,
                chain_after=chain,
                mutation_count=updated.mutation_count,
            )
        )
        logger.debug("%s unit %d by %d -> chain %s", kind, unit.id, actor, chain)
        return updated

    def _live(self, unit_id: int) -> Unit:
        unit = self.unit(unit_id)
        if unit.retired:
            raise RetiredUnitError(f"unit {unit_id} was retired by the power floor")
        return unit

    def _attach(self, unit: Unit) -> None:
        self._holdings[unit.holder].add(unit.id)
        self._power[unit.holder] += unit.value

    def _detach(self, unit: Unit) -> None:
        self._holdings[unit.holder].discard(unit.id)
        self._power[unit.holder] -= unit.value

    def _check_agent(self, agent: int) -> None:
        if not 0 <= agent < self.agent_count:
            raise DomainError(f"agent {agent} outside [0, {self.agent_count})")
