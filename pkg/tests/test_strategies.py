"""
Tests for delegation policies and correction authoring.
"""

from fractions import Fraction

import numpy as np
import pytest

from liquid_deliberation.election import Committee
from liquid_deliberation.errors import DomainError
from liquid_deliberation.ledger import Dilution, Ledger
from liquid_deliberation.preference import Opinion
from liquid_deliberation.proposal import CorrectionSet, Metric, Proposal, corpus_delta
from liquid_deliberation.strategies import (
    CorrectionPolicy,
    DelegationView,
    StrategyKind,
    StrategySpec,
    amend_decide,
    author_correction,
    correct_decide,
    delegate_decide,
)


def _opinions(*optima):
    return tuple(Opinion(i, Proposal.of(*o)) for i, o in enumerate(optima))


class TestStrategySpec:
    """Parsing and validating strategy settings."""

    def test_from_dict(self):
        """Test a full strategy object is parsed."""
        spec = StrategySpec.from_dict({"kind": "expert_seeker", "fraction": "1/2", "pool_size": 3, "correction": "builder"})
        assert spec.kind is StrategyKind.EXPERT_SEEKER
        assert spec.fraction == Fraction(1, 2)
        assert spec.pool_size == 3
        assert spec.correction is CorrectionPolicy.BUILDER
        assert StrategySpec.from_dict(spec.to_dict()) == spec

    def test_rejects_bad_values(self):
        """Test unknown kinds, fields and out-of-range fractions."""
        with pytest.raises(DomainError):
            StrategySpec.from_dict({"kind": "bribe"})
        with pytest.raises(DomainError):
            StrategySpec.from_dict({"kind": "noop", "colour": "red"})
        with pytest.raises(DomainError):
            StrategySpec.from_dict({"kind": "random_delegate", "fraction": "3/2"})
        with pytest.raises(DomainError):
            StrategySpec.from_dict({"kind": "expert_seeker", "pool_size": 0})


class TestDelegateDecide:
    """Stage-1 announcements."""

    def setup_method(self):
        self.ledger = Ledger(8, Dilution(1, 10))
        for agent in range(8):
            self.ledger.issue_units(agent, 10)
        self.opinions = _opinions(*[(x / 10,) for x in (0, 1, 2, 3, 4, 5, 6, 8)])
        self.rng = np.random.default_rng(0)

    def _view(self, agent, sub_round=0):
        return DelegationView(
            agent=agent,
            ledger=self.ledger,
            opinions=self.opinions,
            proposal=Proposal.of(0.5),
            t=0,
            sub_round=sub_round,
            units=tuple(self.ledger.held_units(agent)),
        )

    def test_noop_and_stick(self):
        """Test passive strategies announce nothing."""
        for kind in (StrategyKind.NOOP, StrategyKind.STICK):
            assert delegate_decide(0, self._view(0), StrategySpec(kind), self.rng) == []

    def test_proximity_delegate(self):
        """Test half of ten units go to the nearest opinion."""
        spec = StrategySpec(StrategyKind.PROXIMITY_DELEGATE, Fraction(1, 2))
        announcements = delegate_decide(7, self._view(7), spec, self.rng)
        assert len(announcements) == 5
        assert {a.recipient for a in announcements} == {6}
        assert all(a.sender == 7 and a.kind == "transfer" for a in announcements)
        assert [a.unit_id for a in announcements] == self.ledger.held_units(7)[:5]

    def test_expert_seeker_restricted_to_top_holders(self):
        """Test the recipient is the nearest among the top-m holders."""
        for uid in self.ledger.held_units(0)[:5]:
            self.ledger.transfer(uid, 0, 2)
        spec = StrategySpec(StrategyKind.EXPERT_SEEKER, Fraction(1), pool_size=1)
        announcements = delegate_decide(7, self._view(7), spec, self.rng)
        assert {a.recipient for a in announcements} == {2}
        assert len(announcements) == 10

    def test_expert_seeker_in_own_pool(self):
        """Test a top holder's own seat in the pool is not refilled by the next agent."""
        for uid in self.ledger.held_units(0)[:5]:
            self.ledger.transfer(uid, 0, 2)
        alone = StrategySpec(StrategyKind.EXPERT_SEEKER, Fraction(1), pool_size=1)
        assert delegate_decide(2, self._view(2), alone, self.rng) == []
        pair = StrategySpec(StrategyKind.EXPERT_SEEKER, Fraction(1), pool_size=2)
        announcements = delegate_decide(2, self._view(2), pair, self.rng)
        assert {a.recipient for a in announcements} == {1}

    def test_random_delegate_replays(self):
        """Test a seeded random delegator is replay-stable and never self-delegates."""
        spec = StrategySpec(StrategyKind.RANDOM_DELEGATE, Fraction(1, 2))
        first = delegate_decide(3, self._view(3), spec, np.random.default_rng([5, 1, 3, 0]))
        second = delegate_decide(3, self._view(3), spec, np.random.default_rng([5, 1, 3, 0]))
        assert first == second
        assert all(a.recipient != 3 and 0 <= a.recipient < 8 for a in first)

    def test_retract(self):
        """Test a retracting agent reclaims floor(rho * delegated) units."""
        for uid in self.ledger.held_units(1)[:4]:
            self.ledger.transfer(uid, 1, 5)
        spec = StrategySpec(StrategyKind.RETRACT, Fraction(1, 2))
        announcements = delegate_decide(1, self._view(1), spec, self.rng)
        assert [(a.kind, a.unit_id) for a in announcements] == [("reclaim", 10), ("reclaim", 11)]
        assert delegate_decide(1, self._view(1, sub_round=1), spec, self.rng) == []


class TestCorrectDecide:
    """The greedy move toward the optimum."""

    def test_full_budget_reaches_optimum(self):
        """Test a budget of one jumps straight to the optimum."""
        opinion = Opinion(0, Proposal.of(0.9, 0.1))
        target = correct_decide(0, Fraction(1), Proposal.of(0.2, 0.6), opinion, Metric.L1_NORMALIZED)
        assert target == opinion.optimum

    def test_partial_step_binds(self):
        """Test budget 1/4 from (0, 0) toward (1, 1) lands on (1/4, 1/4)."""
        opinion = Opinion(0, Proposal.of(1.0, 1.0))
        current = Proposal.of(0.0, 0.0)
        target = correct_decide(0, Fraction(1, 4), current, opinion, Metric.L1_NORMALIZED)
        assert target == Proposal.of(0.25, 0.25)
        assert corpus_delta(target, current) == Fraction(1, 4)

    def test_inexact_step_stays_within_budget(self):
        """Test float rounding never pushes a step over budget."""
        opinion = Opinion(0, Proposal.of(0.9, 0.3, 0.7))
        current = Proposal.of(0.1, 0.8, 0.2)
        budget = Fraction(1, 7)
        target = correct_decide(0, budget, current, opinion, Metric.L1_NORMALIZED)
        assert corpus_delta(target, current) <= budget

    def test_hamming_largest_gaps(self):
        """Test the floor(budget * s) furthest coordinates jump to the optimum."""
        opinion = Opinion(0, Proposal.of(0.9, 0.5, 0.0, 0.6))
        current = Proposal.of(0.5, 0.5, 0.5, 0.5)
        target = correct_decide(0, Fraction(1, 2), current, opinion, Metric.HAMMING_FRACTION)
        assert target == Proposal.of(0.9, 0.5, 0.0, 0.5)
        assert corpus_delta(target, current, Metric.HAMMING_FRACTION) == Fraction(1, 2)

    def test_at_optimum(self):
        """Test nothing is emitted when the proposal already is the optimum."""
        opinion = Opinion(0, Proposal.of(0.3))
        assert correct_decide(0, Fraction(1), Proposal.of(0.3), opinion, Metric.L1_NORMALIZED) is None


class TestAuthorCorrection:
    """Correction policies of seated members."""

    def setup_method(self):
        self.current = Proposal.of(0.5, 0.5)
        self.rng = np.random.default_rng(0)

    def test_abstain(self):
        """Test an abstaining member authors nothing."""
        spec = StrategySpec(correction=CorrectionPolicy.ABSTAIN)
        opinion = Opinion(0, Proposal.of(1.0, 1.0))
        assert author_correction(0, spec, Fraction(1), self.current, opinion, Metric.L1_NORMALIZED, self.rng) is None

    def test_builder_extends_liked_correction(self):
        """Test a builder builds on an earlier correction it prefers."""
        corrections = CorrectionSet(0, self.current)
        earlier = corrections.propose(0, Proposal.of(0.75, 0.5))
        spec = StrategySpec(correction=CorrectionPolicy.BUILDER)
        opinion = Opinion(1, Proposal.of(1.0, 1.0))
        draft = author_correction(1, spec, Fraction(1, 8), self.current, opinion, Metric.L1_NORMALIZED, self.rng, [earlier])
        assert draft.parent == earlier.id
        assert corpus_delta(draft.target, earlier.target) <= Fraction(1, 8)

    def test_builder_ignores_disliked_correction(self):
        """Test a builder falls back to a root correction."""
        corrections = CorrectionSet(0, self.current)
        earlier = corrections.propose(0, Proposal.of(0.0, 0.5))
        spec = StrategySpec(correction=CorrectionPolicy.BUILDER)
        opinion = Opinion(1, Proposal.of(1.0, 1.0))
        draft = author_correction(1, spec, Fraction(1), self.current, opinion, Metric.L1_NORMALIZED, self.rng, [earlier])
        assert draft.parent is None
        assert draft.target == opinion.optimum


class TestAmendDecide:
    """Joint amendments of conflicting corrections."""

    def test_power_weighted_average(self):
        """Test the contested coordinate is the power-weighted mean."""
        base = Proposal.of(0.5, 0.5, 0.5)
        corrections = CorrectionSet(0, base)
        a = corrections.propose(0, Proposal.of(1.0, 0.2, 0.5))
        b = corrections.propose(1, Proposal.of(0.0, 0.5, 0.9))
        committee = Committee((0, 1), {0: Fraction(3), 1: Fraction(1)})
        assert amend_decide(a, b, committee, corrections) == Proposal.of(0.75, 0.2, 0.9)
