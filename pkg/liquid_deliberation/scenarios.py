"""
Concrete scenarios: samplers expanded from the seed, plus stock configs.

All randomness of a run comes from `ScenarioConfig.seed`. The sampler stream
and every agent's stream are derived from it independently, so the order in
which agents are evaluated cannot change what any of them draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from .config import OpinionSampler, ScenarioConfig
from .ledger import Dilution, Ledger
from .preference import Distance, Opinion
from .proposal import Metric, Proposal
from .strategies import CorrectionPolicy, StrategyKind, StrategySpec

_SAMPLER_STREAM = 0
_AGENT_STREAM = 1


def sampler_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, _SAMPLER_STREAM])


def agent_rng(seed: int, agent: int, offset: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, _AGENT_STREAM, agent, offset])


def _sample_optima(config: ScenarioConfig, rng: np.random.Generator) -> Tuple[Proposal, ...]:
    sampler = config.opinions
    if not isinstance(sampler, OpinionSampler):
        return tuple(sampler)
    if sampler.kind == "gaussian":
        draws = np.clip(rng.normal(np.asarray(sampler.mean), sampler.stddev, size=(config.n, config.s)), 0.0, 1.0)
    else:
        draws = rng.random((config.n, config.s))
    return tuple(Proposal(tuple(float(x) for x in row)) for row in draws)


@dataclass
class Scenario:
    """A config with its samplers expanded; the input of one run."""

    config: ScenarioConfig
    opinions: Tuple[Opinion, ...]
    engaged: Tuple[bool, ...]
    strategies: Tuple[StrategySpec, ...]

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "Scenario":
        rng = sampler_rng(config.seed)
        optima = _sample_optima(config, rng)
        engaged = tuple(bool(x) for x in rng.random(config.n) < config.engagement_probability)
        strategies = config.strategies or (StrategySpec(),) * config.n
        return cls(
            config=config,
            opinions=tuple(Opinion(i, optimum, config.distance) for i, optimum in enumerate(optima)),
            engaged=engaged,
            strategies=strategies,
        )

    def agent_rngs(self) -> List[np.random.Generator]:
        """Fresh per-agent streams; every run starts them from scratch."""
        return [agent_rng(self.config.seed, i, spec.seed_offset) for i, spec in enumerate(self.strategies)]

    def build_ledger(self) -> Ledger:
        """Issue every agent its endowment, unit ids dense in agent order."""
        ledger = Ledger(self.config.n, self.config.c)
        for agent, count in enumerate(self.config.units_per_agent):
            ledger.issue_units(agent, count, self.config.initial_value)
        return ledger


def demo_config(seed: int = 7) -> ScenarioConfig:
    """Ten agents, three seats, two subjects and a mix of delegation habits."""
    kinds = [
        StrategySpec(StrategyKind.PROXIMITY_DELEGATE, Fraction(1, 2)),
        StrategySpec(StrategyKind.EXPERT_SEEKER, Fraction(1, 4), pool_size=3),
        StrategySpec(StrategyKind.RANDOM_DELEGATE, Fraction(1, 5)),
        StrategySpec(StrategyKind.STICK, correction=CorrectionPolicy.BUILDER),
        StrategySpec(StrategyKind.RETRACT, Fraction(1, 2)),
    ]
    config = ScenarioConfig(
        n=10,
        k=3,
        s=2,
        c=Dilution(1, 10),
        initial_proposal=Proposal.of(0.5, 0.5),
        status_quo=Proposal.of(0.1, 0.9),
        units_per_agent=(20,) * 10,
        engagement_probability=0.8,
        opinions=OpinionSampler("gaussian", (0.6, 0.4), 0.2),
        strategies=tuple(kinds[i % len(kinds)] for i in range(10)),
        seed=seed,
    )
    return ScenarioConfig.from_dict(config.to_dict())


def random_config(seed: int, max_agents: int = 50, max_units: int = 10) -> ScenarioConfig:
    """A scenario drawn from the ranges the termination suite sweeps."""
    rng = np.random.default_rng([seed, 99])
    n = int(rng.integers(3, max_agents + 1))
    s = int(rng.integers(1, 9))
    k = int(rng.integers(1, n))
    c = Dilution(int(rng.integers(1, 51)), 100)

    status_quo = tuple(float(x) for x in rng.random(s))
    initial = tuple(float(x) for x in rng.random(s))
    if initial == status_quo:
        initial = tuple(1.0 - x for x in status_quo)
        if initial == status_quo:
            initial = (0.0,) * s if status_quo[0] != 0.0 else (1.0,) * s

    kinds = list(StrategyKind)
    policies = list(CorrectionPolicy)
    strategies = tuple(
        StrategySpec(
            kind=kinds[int(rng.integers(len(kinds)))],
            fraction=Fraction(int(rng.integers(0, 5)), 4),
            pool_size=int(rng.integers(1, 4)),
            correction=policies[int(rng.integers(len(policies)))],
        )
        for _ in range(n)
    )
    opinions = OpinionSampler() if rng.random() < 0.5 else OpinionSampler(
        "gaussian", tuple(float(x) for x in rng.random(s)), float(rng.uniform(0.05, 0.3))
    )
    config = ScenarioConfig(
        n=n,
        k=k,
        s=s,
        c=c,
        initial_proposal=Proposal(initial),
        status_quo=Proposal(status_quo),
        units_per_agent=tuple(int(x) for x in rng.integers(1, max_units + 1, size=n)),
        metric=list(Metric)[int(rng.integers(2))],
        distance=list(Distance)[int(rng.integers(2))],
        engagement_probability=float(rng.choice([1.0, 0.8, 0.5])),
        opinions=opinions,
        strategies=strategies,
        seed=seed,
    )
    return ScenarioConfig.from_dict(config.to_dict())
