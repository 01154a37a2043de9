#!/usr/bin/env python3
"""
The deliberation loop as a LangGraph state machine.

Each iteration walks three nodes: delegation (stage 1), election (stage 2)
and minting (stage 3). Stop rules are checked after delegation and after
election; a stop after election skips that iteration's minting.
"""

from __future__ import annotations

import logging
import operator
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Annotated, Any, Dict, List, Optional, Sequence, Tuple, TypedDict

from langchain_core.runnables import RunnableConfig
from langgraph.graph import END, StateGraph

from .election import Committee, committee_fingerprint, select_committee
from .errors import (
    DeliberationError,
    DomainError,
    NoOpReclaimError,
    RetiredUnitError,
    SafetyCapError,
    UnauthorizedError,
)
from .ledger import Ledger, MutationEvent, format_rational
from .preference import Tally, Voter, tally
from .proposal import (
    Correction,
    CorrectionSet,
    Proposal,
    Validation,
    assemble_next,
    budget_share,
    detect_conflicts,
    family_heads,
    validate_correction,
)
from .scenarios import Scenario
from .strategies import (
    Announcement,
    DelegationView,
    StrategySpec,
    amend_decide,
    author_correction,
    delegate_decide,
)

logger = logging.getLogger(__name__)


class StopReason(str, Enum):
    NO_INITIAL_TRANSFERS = "no_initial_transfers"
    ALL_POWER_EQUAL = "all_power_equal"
    COMMITTEE_UNCHANGED_TWICE = "committee_unchanged_twice"
    PROPOSAL_UNCHANGED_TWICE = "proposal_unchanged_twice"
    POWER_EXHAUSTED = "power_exhausted"


@dataclass
class Outcome:
    """What happened to one correction, replacement or amendment."""

    correction: Correction
    validation: Validation
    tally: Optional[Tally] = None
    orphaned: bool = False

    @property
    def ratified(self) -> bool:
        return self.validation.accepted and self.tally is not None and self.tally.passed

    @property
    def accepted(self) -> bool:
        return self.ratified and not self.orphaned


@dataclass
class IterationRecord:
    t: int
    proposal_before: Proposal
    transfers: List[MutationEvent] = field(default_factory=list)
    retired: List[int] = field(default_factory=list)
    powers: List[Fraction] = field(default_factory=list)
    total_power: Fraction = Fraction(0)
    committee: Optional[Committee] = None
    corrections: Optional[CorrectionSet] = None
    outcomes: Dict[int, Outcome] = field(default_factory=dict)
    replacements: List[int] = field(default_factory=list)
    amendments: List[int] = field(default_factory=list)
    surviving: List[int] = field(default_factory=list)
    proposal_after: Optional[Proposal] = None
    stop_reason: Optional[StopReason] = None


class Simulation:
    """Mutable state of a single run: ledger, current proposal, history.

    Trace events are buffered here and handed to the graph state by each node.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.config = scenario.config
        self.ledger: Ledger = scenario.build_ledger()
        self.rngs = scenario.agent_rngs()
        self.proposal: Proposal = scenario.config.initial_proposal
        self.history: List[IterationRecord] = []
        self._pending: List[Dict[str, Any]] = []

    @property
    def record(self) -> IterationRecord:
        return self.history[-1]

    def emit(self, t: int, stage: str, event: str, payload: Dict[str, Any]) -> None:
        self._pending.append({"t": t, "stage": stage, "event": event, "payload": payload})

    def drain(self) -> List[Dict[str, Any]]:
        events, self._pending = self._pending, []
        return events

    def announce_setup(self) -> None:
        config = self.config
        self.emit(0, "setup", "scenario", {
            "n": config.n,
            "k": config.k,
            "s": config.s,
            "c": str(config.c),
            "metric": config.metric.value,
            "distance": config.distance.value,
            "seed": config.seed,
            "status_quo": config.status_quo.to_list(),
            "initial_proposal": config.initial_proposal.to_list(),
            "optima": [o.optimum.to_list() for o in self.scenario.opinions],
            "engaged": list(self.scenario.engaged),
            "initial_powers": [format_rational(p) for p in self.ledger.powers()],
        })


# -- stage 1 -----------------------------------------------------------------

def _apply(ledger: Ledger, announcement: Announcement) -> MutationEvent:
    if announcement.kind == "reclaim":
        ledger.reclaim(announcement.unit_id, announcement.sender)
    else:
        ledger.transfer(announcement.unit_id, announcement.sender, announcement.recipient)
    return ledger.history[-1]


def run_stage1(sim: Simulation, strategies: Optional[Sequence[StrategySpec]] = None) -> List[MutationEvent]:
    """Delegation sub-rounds until one is quiet or n have elapsed.

    Sub-round 0 offers each agent everything it holds; later sub-rounds offer
    only the units it received in the previous one.
    """
    strategies = strategies or sim.scenario.strategies
    ledger, t, n = sim.ledger, sim.record.t, sim.config.n
    mutations: List[MutationEvent] = []
    offered = {agent: tuple(ledger.held_units(agent)) for agent in range(n)}

    for sub_round in range(n):
        received: Dict[int, List[int]] = defaultdict(list)
        before = len(mutations)
        for agent in range(n):
            view = DelegationView(
                agent=agent,
                ledger=ledger,
                opinions=sim.scenario.opinions,
                proposal=sim.proposal,
                t=t,
                sub_round=sub_round,
                units=offered[agent],
            )
            for announcement in delegate_decide(agent, view, strategies[agent], sim.rngs[agent]):
                try:
                    event = _apply(ledger, announcement)
                except (DomainError, UnauthorizedError, NoOpReclaimError, RetiredUnitError) as e:
                    logger.info("dropped announcement %s at t=%d: %s", announcement, t, e)
                    continue
                mutations.append(event)
                received[event.chain_after[-1]].append(event.unit_id)
                sim.emit(t, "delegation", event.kind, event.to_payload())
        if len(mutations) == before:
            break
        offered = {agent: tuple(sorted(received[agent])) for agent in range(n)}

    logger.debug("t=%d stage 1: %d mutations", t, len(mutations))
    return mutations


# -- stage 3 -----------------------------------------------------------------

def _outside_voters(sim: Simulation, committee: Committee) -> List[Voter]:
    powers = sim.record.powers
    return [
        Voter(agent, powers[agent], sim.scenario.engaged[agent], sim.scenario.opinions[agent])
        for agent in range(sim.config.n)
        if agent not in committee
    ]


def _decide(sim: Simulation, correction: Correction, corrections: CorrectionSet,
            committee: Committee, voters: List[Voter], event: str) -> Outcome:
    """Validate against the budget, then put it to the outside vote."""
    t = sim.record.t
    validation = validate_correction(correction, committee, corrections.base, sim.config.metric, corrections)
    outcome = Outcome(correction, validation)
    if validation.accepted:
        outcome.tally = tally(correction, voters, corrections.base, sim.config.status_quo)
    sim.emit(t, "minting", event, {
        **correction.to_payload(),
        "kind": correction.kind,
        "budget": format_rational(validation.budget),
        "within_budget": validation.accepted,
        "reason": validation.reason,
    })
    if outcome.tally is not None:
        sim.emit(t, "minting", "vote_tally", {"correction": correction.id, **outcome.tally.to_payload()})
    else:
        logger.info("t=%d correction %d by %d rejected: %s", t, correction.id, correction.author, validation.reason)
    sim.record.outcomes[correction.id] = outcome
    return outcome


def _resolve_conflicts(sim: Simulation, corrections: CorrectionSet, survivors: List[int],
                       committee: Committee, voters: List[Voter]) -> List[int]:
    """Second step: conflicting pairs are replaced by joint amendments.

    Rounds repeat until the survivors are conflict-free; each round pairs
    conflicts greedily in id order and every pair shrinks the pool.
    """
    while True:
        pairs = detect_conflicts(corrections, among=survivors)
        if not pairs:
            return survivors
        consumed: set = set()
        amended: List[int] = []
        for a, b in pairs:
            if a in consumed or b in consumed:
                continue
            consumed.update((a, b))
            first, second = corrections.get(a), corrections.get(b)
            # ancestors' authors co-sign: their changes are carried into the amendment
            lineage = [first, *corrections.ancestors(first), second, *corrections.ancestors(second)]
            authors = list(dict.fromkeys(author for c in lineage for author in c.authors))
            target = amend_decide(first, second, committee, corrections)
            amendment = corrections.propose(
                authors[0], target, sim.config.metric, coauthors=authors[1:], kind="amendment"
            )
            sim.record.amendments.append(amendment.id)
            if _decide(sim, amendment, corrections, committee, voters, "amendment").accepted:
                amended.append(amendment.id)
        survivors = sorted([s for s in survivors if s not in consumed] + amended)


def run_stage3(sim: Simulation, strategies: Optional[Sequence[StrategySpec]] = None
               ) -> Tuple[CorrectionSet, List[int], List[int]]:
    """Corrections, ratification and amendments for the seated committee.

    Returns the iteration's correction set, the ids of the amendments made in
    the second step and the ids of the corrections that shape the next proposal.
    """
    strategies = strategies or sim.scenario.strategies
    record, config = sim.record, sim.config
    committee = record.committee
    opinions = sim.scenario.opinions
    corrections = CorrectionSet(record.t, sim.proposal)
    record.corrections = corrections
    voters = _outside_voters(sim, committee)

    # step 1: one correction per member, each validated and put to the vote
    emitted: List[Correction] = []
    for member in committee.members:
        draft = author_correction(
            member, strategies[member], budget_share(member, committee), sim.proposal,
            opinions[member], config.metric, sim.rngs[member], earlier=emitted,
        )
        if draft is None:
            continue
        correction = corrections.propose(member, draft.target, config.metric, parent=draft.parent)
        emitted.append(correction)
        _decide(sim, correction, corrections, committee, voters, "correction")

    # a build-upon whose base was voted down falls; its author may try again
    for correction in emitted:
        lineage = corrections.ancestors(correction)
        if not any(not record.outcomes[a.id].accepted for a in lineage):
            continue
        record.outcomes[correction.id].orphaned = True
        member = correction.author
        draft = author_correction(
            member, strategies[member], budget_share(member, committee), sim.proposal,
            opinions[member], config.metric, sim.rngs[member],
        )
        if draft is None:
            continue
        replacement = corrections.propose(member, draft.target, config.metric, kind="replacement")
        record.replacements.append(replacement.id)
        _decide(sim, replacement, corrections, committee, voters, "replacement")

    accepted = corrections.subset(cid for cid, outcome in record.outcomes.items() if outcome.accepted)
    heads = [head.id for head in family_heads(accepted)] if len(accepted) else []

    # step 2: amendments for conflicting survivors
    survivors = _resolve_conflicts(sim, corrections, heads, committee, voters)
    record.surviving = survivors
    return corrections, list(record.amendments), survivors


def _lineage_closure(corrections: CorrectionSet, ids: Sequence[int]) -> CorrectionSet:
    chosen = set(ids)
    for cid in ids:
        chosen.update(a.id for a in corrections.ancestors(corrections.get(cid)))
    return corrections.subset(chosen)


def _recheck_budgets(sim: Simulation, corrections: CorrectionSet, survivors: Sequence[int]) -> None:
    committee = sim.record.committee
    for cid in survivors:
        validation = validate_correction(
            corrections.get(cid), committee, corrections.base, sim.config.metric, corrections
        )
        if not validation.accepted:
            raise DeliberationError(f"correction {cid} no longer fits its budget at assembly")


# -- stopping ----------------------------------------------------------------

def _all_equal_positive(powers: Sequence[Fraction]) -> bool:
    return bool(powers) and powers[0] > 0 and all(p == powers[0] for p in powers)


def check_stop(history: Sequence[IterationRecord]) -> Optional[StopReason]:
    """Evaluate the stopping rules on the latest (possibly partial) record.

    Before the committee is seated only the rules that make an election
    pointless are checked; afterwards the full precedence applies.
    """
    if not history:
        return None
    current = history[-1]
    previous = history[-2] if len(history) > 1 else None
    ever_mutated = any(record.transfers for record in history)

    if current.t == 0 and not ever_mutated:
        return StopReason.NO_INITIAL_TRANSFERS
    if ever_mutated and _all_equal_positive(current.powers):
        return StopReason.ALL_POWER_EQUAL
    if current.committee is not None and previous is not None and previous.committee is not None:
        if committee_fingerprint(current.committee) == committee_fingerprint(previous.committee):
            return StopReason.COMMITTEE_UNCHANGED_TWICE
    if current.committee is not None and previous is not None:
        if current.proposal_before == previous.proposal_before:
            return StopReason.PROPOSAL_UNCHANGED_TWICE
    if current.total_power == 0:
        return StopReason.POWER_EXHAUSTED
    return None


# -- graph -------------------------------------------------------------------

class DeliberationState(TypedDict):
    """State carried between the graph's nodes."""
    t: int
    proposal: Proposal
    events: Annotated[List[Dict[str, Any]], operator.add]
    stop_reason: Optional[StopReason]
    capped: bool


def build_stage_graph(sim: Simulation):
    """Compile the three-stage loop for one simulation."""

    def delegation_node(state: DeliberationState):
        t = state["t"]
        record = IterationRecord(t=t, proposal_before=sim.proposal)
        sim.history.append(record)
        record.transfers = run_stage1(sim)

        record.retired = sim.ledger.retire_below(sim.config.power_floor)
        if record.retired:
            sim.emit(t, "delegation", "retire", {"units": record.retired})
        record.powers = sim.ledger.powers()
        record.total_power = sim.ledger.total_power()
        sim.emit(t, "delegation", "powers", {
            "powers": [format_rational(p) for p in record.powers],
            "total": format_rational(record.total_power),
        })
        return {"events": sim.drain(), "stop_reason": check_stop(sim.history)}

    def election_node(state: DeliberationState):
        record = sim.record
        record.committee = select_committee(sim.ledger, sim.config.k)
        sim.emit(record.t, "election", "committee", record.committee.to_payload())
        return {"events": sim.drain(), "stop_reason": check_stop(sim.history)}

    def minting_node(state: DeliberationState):
        record = sim.record
        if len(record.committee):
            corrections, _, survivors = run_stage3(sim)
            _recheck_budgets(sim, corrections, survivors)
            after = assemble_next(sim.proposal, _lineage_closure(corrections, survivors))
        else:
            survivors, after = [], sim.proposal
        record.proposal_after = after
        sim.emit(record.t, "minting", "proposal", {
            "before": record.proposal_before.to_list(),
            "after": after.to_list(),
            "surviving": survivors,
        })
        sim.proposal = after
        next_t = record.t + 1
        return {
            "events": sim.drain(),
            "t": next_t,
            "proposal": after,
            "capped": next_t >= sim.config.max_iterations,
        }

    def stop_node(state: DeliberationState):
        record = sim.record
        record.stop_reason = state["stop_reason"]
        record.proposal_after = sim.proposal
        logger.info("deliberation stopped at t=%d: %s", record.t, record.stop_reason.value)
        sim.emit(record.t, "stop", "stop", {
            "reason": record.stop_reason.value,
            "T": record.t,
            "final_proposal": sim.proposal.to_list(),
            "total_power": format_rational(record.total_power),
            "ledger": sim.ledger.to_dict(),
        })
        return {"events": sim.drain()}

    def after_check(state: DeliberationState) -> str:
        return "stop" if state["stop_reason"] is not None else "continue"

    def after_minting(state: DeliberationState) -> str:
        return "cap" if state["capped"] else "continue"

    workflow = StateGraph(DeliberationState)

    workflow.add_node("delegation", delegation_node)
    workflow.add_node("election", election_node)
    workflow.add_node("minting", minting_node)
    workflow.add_node("stop", stop_node)

    workflow.set_entry_point("delegation")
    workflow.add_conditional_edges("delegation", after_check, {"continue": "election", "stop": "stop"})
    workflow.add_conditional_edges("election", after_check, {"continue": "minting", "stop": "stop"})
    workflow.add_conditional_edges("minting", after_minting, {"continue": "delegation", "cap": END})
    workflow.add_edge("stop", END)

    return workflow.compile()


@dataclass
class RunResult:
    final_proposal: Proposal
    trace: List[Dict[str, Any]]
    stop_reason: Optional[StopReason]
    T: int
    history: List[IterationRecord]
    ledger: Ledger


def run(scenario: Scenario) -> RunResult:
    """Run the deliberation until a stopping rule fires.

    Raises SafetyCapError (carrying the partial result) if max_iterations
    elapse first.
    """
    sim = Simulation(scenario)
    sim.ledger.start()
    sim.announce_setup()

    app = build_stage_graph(sim)
    initial_state = {
        "t": 0,
        "proposal": sim.proposal,
        "events": sim.drain(),
        "stop_reason": None,
        "capped": False,
    }
    config: RunnableConfig = {"recursion_limit": 3 * scenario.config.max_iterations + 10}
    final = app.invoke(initial_state, config=config)

    result = RunResult(
        final_proposal=final["proposal"],
        trace=final["events"],
        stop_reason=final["stop_reason"],
        T=sim.record.t,
        history=sim.history,
        ledger=sim.ledger,
    )
    if result.stop_reason is None:
        raise SafetyCapError(
            f"no stopping rule fired within {scenario.config.max_iterations} iterations", result
        )
    return result
