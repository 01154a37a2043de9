"""
Tests for proposals, the corpus metric and correction bookkeeping.
"""

from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liquid_deliberation.election import Committee
from liquid_deliberation.errors import DomainError, LineageError, UnauthorizedError, UnresolvedConflictError
from liquid_deliberation.proposal import (
    Correction,
    CorrectionSet,
    Metric,
    Proposal,
    assemble_next,
    budget_share,
    corpus_delta,
    detect_conflicts,
    family_heads,
    richest_chain,
    validate_correction,
)

L1 = Metric.L1_NORMALIZED
HAMMING = Metric.HAMMING_FRACTION


class TestProposal:
    """The proposal vector type."""

    def test_bounds(self):
        """Test coordinates must lie in [0, 1]."""
        with pytest.raises(DomainError):
            Proposal.of(0.5, 1.5)
        with pytest.raises(DomainError):
            Proposal(())
        assert Proposal.of(0, 1).values == (0.0, 1.0)

    def test_replace_coordinates(self):
        """Test replacing one coordinate leaves the original untouched."""
        p = Proposal.of(0.2, 0.4)
        q = p.replace_coordinates({0: 0.9})
        assert q == Proposal.of(0.9, 0.4)
        assert p == Proposal.of(0.2, 0.4)


class TestCorpusDelta:
    """The change metric f."""

    def test_one_coordinate_moved(self):
        """Test one coordinate moved by 0.1 out of four."""
        a = Proposal.of(0.2, 0.4, 0.6, 0.8)
        b = Proposal.of(0.2, 0.5, 0.6, 0.8)
        assert float(corpus_delta(a, b, L1)) == pytest.approx(0.025)
        assert corpus_delta(a, b, HAMMING) == Fraction(1, 4)

    def test_identity_and_maximum(self):
        """Test zero on equal vectors and one on opposite corners."""
        a = Proposal.of(0.3, 0.7)
        assert corpus_delta(a, a, L1) == 0
        assert corpus_delta(a, a, HAMMING) == 0
        assert corpus_delta(Proposal.of(0, 0), Proposal.of(1, 1), L1) == 1
        assert corpus_delta(Proposal.of(0, 0), Proposal.of(1, 1), HAMMING) == 1

    def test_dimension_mismatch(self):
        """Test vectors of different length are refused."""
        with pytest.raises(DomainError):
            corpus_delta(Proposal.of(0.1), Proposal.of(0.1, 0.2))

    @given(
        st.lists(st.floats(0, 1), min_size=3, max_size=3),
        st.lists(st.floats(0, 1), min_size=3, max_size=3),
        st.lists(st.floats(0, 1), min_size=3, max_size=3),
        st.sampled_from(list(Metric)),
    )
    @settings(max_examples=200, deadline=None)
    def test_metric_axioms(self, a, b, c, metric):
        """Test symmetry, identity and the triangle inequality."""
        a, b, c = Proposal(tuple(a)), Proposal(tuple(b)), Proposal(tuple(c))
        assert corpus_delta(a, b, metric) == corpus_delta(b, a, metric)
        assert (corpus_delta(a, b, metric) == 0) == (a == b)
        assert corpus_delta(a, c, metric) <= corpus_delta(a, b, metric) + corpus_delta(b, c, metric)
        assert 0 <= corpus_delta(a, b, metric) <= 1


class TestBudgets:
    """Budget shares and validation against them."""

    def setup_method(self):
        self.committee = Committee((0, 1), {0: Fraction(3), 1: Fraction(1)})
        self.base = Proposal.of(0.2, 0.4, 0.6, 0.8)

    def test_shares(self):
        """Test shares of a {3, 1} committee sum to one."""
        assert budget_share(0, self.committee) == Fraction(3, 4)
        assert budget_share(1, self.committee) == Fraction(1, 4)
        assert sum(budget_share(m, self.committee) for m in self.committee.members) == 1
        assert budget_share(7, Committee((7,), {7: Fraction(2)})) == 1
        with pytest.raises(DomainError):
            budget_share(5, self.committee)

    def test_within_budget(self):
        """Test a 0.025 change under a 3/4 share is accepted."""
        corrections = CorrectionSet(0, self.base)
        c = corrections.propose(0, Proposal.of(0.2, 0.5, 0.6, 0.8), L1)
        verdict = validate_correction(c, self.committee, self.base, L1, corrections)
        assert verdict.accepted
        assert verdict.budget == Fraction(3, 4)

    def test_hamming_over_budget(self):
        """Test two of four coordinates changed under a 1/4 share is rejected."""
        corrections = CorrectionSet(0, self.base)
        c = corrections.propose(1, Proposal.of(0.3, 0.5, 0.6, 0.8), HAMMING)
        verdict = validate_correction(c, self.committee, self.base, HAMMING, corrections)
        assert not verdict.accepted
        assert verdict.cost == Fraction(1, 2)

    def test_build_upon_costed_against_parent(self):
        """Test a build-upon is measured from its parent, not the proposal."""
        base = Proposal.of(0.0, 0.0, 0.0)
        committee = Committee((0, 1), {0: Fraction(1), 1: Fraction(1)})
        corrections = CorrectionSet(0, base)
        parent = corrections.propose(0, Proposal.of(1.0, 0.5, 0.0), L1)
        child = corrections.propose(1, Proposal.of(1.0, 0.5, 1.0), L1, parent=parent.id)

        assert corpus_delta(child.target, base, L1) == Fraction(5, 6)
        assert child.cost == Fraction(1, 3)
        assert validate_correction(child, committee, base, L1, corrections).accepted

    def test_outsider_cannot_author(self):
        """Test a correction by a non-member raises."""
        corrections = CorrectionSet(0, self.base)
        c = corrections.propose(4, self.base, L1)
        with pytest.raises(UnauthorizedError):
            validate_correction(c, self.committee, self.base, L1, corrections)

    def test_lineage_errors(self):
        """Test self build-upon and missing lineage."""
        corrections = CorrectionSet(0, self.base)
        parent = corrections.propose(0, Proposal.of(0.3, 0.4, 0.6, 0.8), L1)
        own = corrections.propose(0, Proposal.of(0.3, 0.5, 0.6, 0.8), L1, parent=parent.id)
        with pytest.raises(LineageError):
            validate_correction(own, self.committee, self.base, L1, corrections)
        with pytest.raises(LineageError):
            validate_correction(own, self.committee, self.base, L1)

    def test_amendment_budget_is_sum_of_shares(self):
        """Test a jointly authored correction may spend both shares."""
        corrections = CorrectionSet(0, self.base)
        joint = corrections.propose(0, Proposal.of(1.0, 1.0, 1.0, 0.8), L1, coauthors=(1,), kind="amendment")
        verdict = validate_correction(joint, self.committee, self.base, L1, corrections)
        assert verdict.budget == 1
        assert verdict.accepted

    def test_cross_iteration_parent(self):
        """Test a parent from another iteration is a lineage error."""
        old = Correction(0, 0, self.base, iteration=0)
        corrections = CorrectionSet(1, self.base)
        corrections.add(old)
        child = corrections.propose(1, self.base, L1, parent=0)
        with pytest.raises(LineageError):
            corrections.ancestors(child)


class TestConflicts:
    """Conflict detection between accepted corrections."""

    def setup_method(self):
        self.base = Proposal.of(0.5, 0.5, 0.5)
        self.corrections = CorrectionSet(0, self.base)

    def test_disjoint_coordinates(self):
        """Test corrections touching different coordinates never conflict."""
        self.corrections.propose(0, Proposal.of(0.1, 0.5, 0.5))
        self.corrections.propose(1, Proposal.of(0.5, 0.9, 0.5))
        assert detect_conflicts(self.corrections) == []

    def test_same_coordinate_different_values(self):
        """Test a shared coordinate set to 0.3 and 0.7 conflicts."""
        self.corrections.propose(0, Proposal.of(0.5, 0.5, 0.3))
        self.corrections.propose(1, Proposal.of(0.5, 0.5, 0.7))
        assert detect_conflicts(self.corrections) == [(0, 1)]

    def test_agreement_is_not_conflict(self):
        """Test two corrections agreeing on a value."""
        self.corrections.propose(0, Proposal.of(0.5, 0.5, 0.9))
        self.corrections.propose(1, Proposal.of(0.2, 0.5, 0.9))
        assert detect_conflicts(self.corrections) == []

    def test_lineage_never_conflicts(self):
        """Test a build-upon overriding its parent is not a conflict."""
        parent = self.corrections.propose(0, Proposal.of(0.9, 0.5, 0.5))
        self.corrections.propose(1, Proposal.of(0.8, 0.5, 0.5), parent=parent.id)
        assert detect_conflicts(self.corrections) == []

    def test_assembly_refuses_conflicts(self):
        """Test unresolved conflicts reaching assembly raise."""
        self.corrections.propose(0, Proposal.of(0.5, 0.5, 0.3))
        self.corrections.propose(1, Proposal.of(0.5, 0.5, 0.7))
        with pytest.raises(UnresolvedConflictError):
            assemble_next(self.base, self.corrections)


class TestLineage:
    """Richest-chain selection and assembly."""

    def setup_method(self):
        self.base = Proposal.of(0.0, 0.0, 0.0, 0.0)
        self.corrections = CorrectionSet(0, self.base)

    def test_longest_chain_wins(self):
        """Test a chain A <- B <- C resolves to C."""
        a = self.corrections.propose(0, Proposal.of(0.1, 0.0, 0.0, 0.0))
        b = self.corrections.propose(1, Proposal.of(0.1, 0.2, 0.0, 0.0), parent=a.id)
        c = self.corrections.propose(2, Proposal.of(0.1, 0.2, 0.3, 0.0), parent=b.id)
        assert richest_chain(self.corrections) == c
        assert self.corrections.changes(c) == {0, 1, 2}
        assert assemble_next(self.base, self.corrections) == Proposal.of(0.1, 0.2, 0.3, 0.0)

    def test_single_root(self):
        """Test a lone correction is its own head."""
        a = self.corrections.propose(3, Proposal.of(0.0, 0.0, 0.0, 0.4))
        assert richest_chain(self.corrections) == a

    def test_equal_depth_goes_to_lower_author(self):
        """Test two equally deep branches resolve to the lower author id."""
        root = self.corrections.propose(0, Proposal.of(0.1, 0.0, 0.0, 0.0))
        self.corrections.propose(4, Proposal.of(0.1, 0.4, 0.0, 0.0), parent=root.id)
        two = self.corrections.propose(2, Proposal.of(0.1, 0.0, 0.2, 0.0), parent=root.id)
        assert richest_chain(self.corrections) == two
        assert family_heads(self.corrections) == [two]

    def test_nothing_accepted(self):
        """Test an empty set leaves the proposal as it was."""
        assert assemble_next(self.base, self.corrections) is self.base

    def test_single_change(self):
        """Test one correction changes exactly one coordinate."""
        self.corrections.propose(0, Proposal.of(0.4, 0.0, 0.0, 0.0))
        after = assemble_next(self.base, self.corrections)
        assert after == Proposal.of(0.4, 0.0, 0.0, 0.0)

    def test_disjoint_order_independent(self):
        """Test disjoint corrections assemble the same in every order."""
        drafts = [
            (0, Proposal.of(0.4, 0.0, 0.0, 0.0)),
            (1, Proposal.of(0.0, 0.6, 0.0, 0.0)),
            (2, Proposal.of(0.0, 0.0, 0.0, 0.8)),
        ]
        results = set()
        for order in permutations(drafts):
            corrections = CorrectionSet(0, self.base)
            for author, target in order:
                corrections.propose(author, target)
            results.add(assemble_next(self.base, corrections))
        assert results == {Proposal.of(0.4, 0.6, 0.0, 0.8)}

    def test_payload(self):
        """Test the trace form of a correction."""
        c = self.corrections.propose(0, Proposal.of(0.5, 0.0, 0.0, 0.0))
        assert c.to_payload() == {"id": 0, "author": 0, "parent": None, "target": [0.5, 0.0, 0.0, 0.0], "cost": "1/8"}
