"""
Scenario configuration: JSON in, a validated frozen ScenarioConfig out.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import ConfigError, DeliberationError
from .ledger import Dilution, format_rational, parse_rational
from .preference import Distance
from .proposal import Metric, Proposal
from .store import read_json, write_json_atomic
from .strategies import StrategySpec

DEFAULT_UNITS_PER_AGENT = 100
DEFAULT_POWER_FLOOR = Fraction(1, 10**9)
DEFAULT_MAX_ITERATIONS = 1_000_000

_KNOWN_KEYS = {
    "n", "k", "s", "c", "units_per_agent", "initial_value", "initial_proposal", "status_quo",
    "metric", "distance", "engagement_probability", "power_floor", "opinions", "strategies",
    "seed", "max_iterations",
}


@dataclass(frozen=True)
class OpinionSampler:
    """Draws every agent's optimum from the scenario seed."""

    kind: str = "uniform"
    mean: Tuple[float, ...] = ()
    stddev: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "uniform":
            return {"sampler": "uniform"}
        return {"sampler": "gaussian", "mean": list(self.mean), "stddev": self.stddev}


Opinions = Union[Tuple[Proposal, ...], OpinionSampler]


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    k: int
    s: int
    c: Dilution
    initial_proposal: Proposal
    status_quo: Proposal
    units_per_agent: Tuple[int, ...]
    initial_value: Fraction = Fraction(1)
    metric: Metric = Metric.L1_NORMALIZED
    distance: Distance = Distance.EUCLIDEAN
    engagement_probability: float = 1.0
    power_floor: Fraction = DEFAULT_POWER_FLOOR
    opinions: Opinions = field(default_factory=OpinionSampler)
    strategies: Tuple[StrategySpec, ...] = ()
    seed: int = 0
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        opinions: Any
        if isinstance(self.opinions, OpinionSampler):
            opinions = self.opinions.to_dict()
        else:
            opinions = [p.to_list() for p in self.opinions]
        return {
            "n": self.n,
            "k": self.k,
            "s": self.s,
            "c": str(self.c),
            "units_per_agent": list(self.units_per_agent),
            "initial_value": format_rational(self.initial_value),
            "initial_proposal": self.initial_proposal.to_list(),
            "status_quo": self.status_quo.to_list(),
            "metric": self.metric.value,
            "distance": self.distance.value,
            "engagement_probability": self.engagement_probability,
            "power_floor": format_rational(self.power_floor),
            "opinions": opinions,
            "strategies": [spec.to_dict() for spec in self.strategies],
            "seed": self.seed,
            "max_iterations": self.max_iterations,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        return _Validator(data).build()


class _Validator:
    """Collects every problem in a config document before giving up."""

    def __init__(self, data: Dict[str, Any]):
        self.data = data if isinstance(data, dict) else {}
        self.problems: List[str] = []
        if not isinstance(data, dict):
            self.problems.append("<root>: expected a JSON object")

    def fail(self, path: str, message: str) -> None:
        self.problems.append(f"{path}: {message}")

    def integer(self, key: str, default: Optional[int] = None, minimum: Optional[int] = None) -> Optional[int]:
        if key not in self.data:
            if default is None:
                self.fail(key, "missing required field")
            return default
        value = self.data[key]
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(key, f"expected an integer, got {value!r}")
            return None
        if minimum is not None and value < minimum:
            self.fail(key, f"must be at least {minimum}, got {value}")
            return None
        return value

    def rational(self, key: str, default: Optional[Fraction] = None) -> Optional[Fraction]:
        if key not in self.data:
            if default is None:
                self.fail(key, "missing required field")
            return default
        try:
            return parse_rational(self.data[key])
        except DeliberationError as e:
            self.fail(key, str(e))
            return None

    def vector(self, path: str, value: Any, s: Optional[int]) -> Optional[Proposal]:
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            self.fail(path, "expected a list of numbers")
            return None
        if s is not None and len(value) != s:
            self.fail(path, f"expected {s} coordinates, got {len(value)}")
            return None
        try:
            return Proposal(tuple(value))
        except DeliberationError as e:
            self.fail(path, str(e))
            return None

    def choice(self, key: str, enum, default):
        value = self.data.get(key, default.value)
        try:
            return enum(value)
        except ValueError:
            self.fail(key, f"expected one of {[e.value for e in enum]}, got {value!r}")
            return default

    def build(self) -> ScenarioConfig:
        for key in sorted(set(self.data) - _KNOWN_KEYS):
            self.fail(key, "unknown field")

        n = self.integer("n", minimum=2)
        k = self.integer("k", minimum=1)
        s = self.integer("s", minimum=1)
        if n is not None and k is not None and k >= n:
            self.fail("k", f"committee size must be smaller than the society (k < n), got k={k}, n={n}")

        c = None
        if "c" not in self.data:
            self.fail("c", "missing required field")
        else:
            try:
                c = Dilution.parse(self.data["c"])
            except DeliberationError as e:
                self.fail("c", str(e))

        initial = self.vector("initial_proposal", self.data.get("initial_proposal"), s)
        status_quo = self.vector("status_quo", self.data.get("status_quo"), s)
        if initial is not None and status_quo is not None and initial == status_quo:
            self.fail("initial_proposal", "the initial proposal must differ from the status quo")

        units = self._units(n)
        initial_value = self.rational("initial_value", Fraction(1))
        if initial_value is not None and not 0 < initial_value <= 1:
            self.fail("initial_value", f"must lie in (0, 1], got {initial_value}")

        engagement = self.data.get("engagement_probability", 1.0)
        if isinstance(engagement, bool) or not isinstance(engagement, (int, float)) or not 0 <= engagement <= 1:
            self.fail("engagement_probability", f"expected a probability in [0, 1], got {engagement!r}")
            engagement = 1.0

        floor = self.rational("power_floor", DEFAULT_POWER_FLOOR)
        if floor is not None and floor >= 1:
            self.fail("power_floor", f"must be below 1, got {floor}")

        config_kwargs = dict(
            metric=self.choice("metric", Metric, Metric.L1_NORMALIZED),
            distance=self.choice("distance", Distance, Distance.EUCLIDEAN),
            opinions=self._opinions(n, s),
            strategies=self._strategies(n),
            seed=self.integer("seed", default=0, minimum=0),
            max_iterations=self.integer("max_iterations", default=DEFAULT_MAX_ITERATIONS, minimum=1),
        )

        if self.problems:
            raise ConfigError(self.problems)
        return ScenarioConfig(
            n=n,
            k=k,
            s=s,
            c=c,
            initial_proposal=initial,
            status_quo=status_quo,
            units_per_agent=units,
            initial_value=initial_value,
            engagement_probability=float(engagement),
            power_floor=floor,
            **config_kwargs,
        )

    def _units(self, n: Optional[int]) -> Tuple[int, ...]:
        value = self.data.get("units_per_agent", DEFAULT_UNITS_PER_AGENT)
        if isinstance(value, int) and not isinstance(value, bool):
            if value < 1:
                self.fail("units_per_agent", f"must be positive, got {value}")
            return (value,) * (n or 0)
        if isinstance(value, list):
            if n is not None and len(value) != n:
                self.fail("units_per_agent", f"expected {n} entries, got {len(value)}")
            for i, count in enumerate(value):
                if isinstance(count, bool) or not isinstance(count, int) or count < 1:
                    self.fail(f"units_per_agent[{i}]", f"expected a positive integer, got {count!r}")
            return tuple(value)
        self.fail("units_per_agent", f"expected an integer or a list, got {value!r}")
        return ()

    def _opinions(self, n: Optional[int], s: Optional[int]) -> Opinions:
        value = self.data.get("opinions", {"sampler": "uniform"})
        if isinstance(value, list):
            if n is not None and len(value) != n:
                self.fail("opinions", f"expected {n} optima, got {len(value)}")
            optima = [self.vector(f"opinions[{i}]", v, s) for i, v in enumerate(value)]
            return tuple(p for p in optima if p is not None)
        if not isinstance(value, dict):
            self.fail("opinions", "expected a list of optima or a sampler object")
            return OpinionSampler()

        kind = value.get("sampler")
        if kind == "uniform":
            return OpinionSampler()
        if kind != "gaussian":
            self.fail("opinions.sampler", f"expected 'uniform' or 'gaussian', got {kind!r}")
            return OpinionSampler()

        mean = value.get("mean", 0.5)
        if isinstance(mean, (int, float)) and not isinstance(mean, bool):
            mean = [float(mean)] * (s or 0)
        mean_vector = self.vector("opinions.mean", mean, s)
        stddev = value.get("stddev")
        if isinstance(stddev, bool) or not isinstance(stddev, (int, float)) or stddev < 0:
            self.fail("opinions.stddev", f"expected a non-negative number, got {stddev!r}")
            stddev = 0.0
        return OpinionSampler("gaussian", mean_vector.values if mean_vector else (), float(stddev))

    def _strategies(self, n: Optional[int]) -> Tuple[StrategySpec, ...]:
        value = self.data.get("strategies", {"kind": "noop"})
        entries = value if isinstance(value, list) else [value] * (n or 0)
        if isinstance(value, list) and n is not None and len(value) != n:
            self.fail("strategies", f"expected {n} entries, got {len(value)}")
        specs = []
        for i, entry in enumerate(entries):
            path = f"strategies[{i}]" if isinstance(value, list) else "strategies"
            if not isinstance(entry, dict):
                self.fail(path, "expected a strategy object")
                continue
            try:
                specs.append(StrategySpec.from_dict(entry))
            except DeliberationError as e:
                self.fail(path, str(e))
                if not isinstance(value, list):
                    break
        return tuple(specs)


def load_config(path: Union[str, os.PathLike]) -> ScenarioConfig:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise ConfigError([f"<root>: not valid JSON ({e})"]) from e
    except OSError as e:
        raise ConfigError([f"<root>: cannot read {path} ({e})"]) from e
    return ScenarioConfig.from_dict(data)


def save_config(config: ScenarioConfig, path: Union[str, os.PathLike]) -> None:
    write_json_atomic(Path(path), config.to_dict())
