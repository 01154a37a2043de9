"""
Metrics over finished runs: power concentration, termination, representativeness.

Everything here reads traces, never live engine state, so a persisted
trace.jsonl always re-summarizes to the same numbers.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import ScenarioConfig
from .errors import TraceParseError, UndefinedMetricError
from .engine import run
from .ledger import format_rational, parse_rational
from .preference import Distance
from .scenarios import Scenario

logger = logging.getLogger(__name__)

AGGREGATE_COLUMNS = [
    "seed",
    "T",
    "stop_reason",
    "final_gini",
    "max_top_share",
    "final_distance_mean",
    "final_distance_weighted",
    "error",
]


def gini(powers: Sequence[Fraction]) -> float:
    """Gini coefficient of a power distribution, computed exactly.

    Uses the sorted-rank form (2 * sum(i * x_i) / (n * sum x)) - (n + 1) / n,
    which equals the double sum of |p_i - p_j| over 2n * sum p.
    """
    values = np.sort(np.array([Fraction(p) for p in powers], dtype=object))
    n = len(values)
    if n == 0:
        raise UndefinedMetricError("Gini coefficient of an empty distribution")
    total = values.sum()
    if total == 0:
        raise UndefinedMetricError("Gini coefficient is undefined when every power is zero")
    index = np.arange(1, n + 1, dtype=object)
    ranked = (index * values).sum()
    return float(Fraction(2) * ranked / (n * total) - Fraction(n + 1, n))


def _series_gini(powers: Sequence[Fraction]) -> float:
    return 0.0 if not any(powers) else gini(powers)


@dataclass
class RunSummary:
    T: int
    stop_reason: str
    gini_series: List[float] = field(default_factory=list)
    top_share_series: List[float] = field(default_factory=list)
    total_power_series: List[str] = field(default_factory=list)
    final_distance_mean: float = 0.0
    final_distance_weighted: float = 0.0
    final_proposal: List[float] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def final_gini(self) -> float:
        return self.gini_series[-1] if self.gini_series else 0.0

    @property
    def max_top_share(self) -> float:
        return max(self.top_share_series, default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_row(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "T": self.T,
            "stop_reason": self.stop_reason,
            "final_gini": self.final_gini,
            "max_top_share": self.max_top_share,
            "final_distance_mean": self.final_distance_mean,
            "final_distance_weighted": self.final_distance_weighted,
            "error": "",
        }


def _distance(a: np.ndarray, b: np.ndarray, distance: Distance) -> float:
    if distance is Distance.L1:
        return float(np.abs(a - b).sum())
    return float(np.sqrt(((a - b) ** 2).sum()))


def summarize(trace: Iterable[Dict[str, Any]]) -> RunSummary:
    """Re-derive a RunSummary from a trace's events.

    A stage with no seated committee (a run stopping right after delegation)
    contributes a top share of 0.
    """
    header: Optional[Dict[str, Any]] = None
    stop: Optional[Dict[str, Any]] = None
    powers_by_t: Dict[int, List[Fraction]] = {}
    totals_by_t: Dict[int, Fraction] = {}
    committee_by_t: Dict[int, Fraction] = {}

    for number, event in enumerate(trace):
        try:
            t, kind, payload = event["t"], event["event"], event["payload"]
        except (KeyError, TypeError) as e:
            raise TraceParseError(f"event {number} is malformed: {event!r}") from e
        if kind == "scenario":
            header = payload
        elif kind == "powers":
            powers_by_t[t] = [parse_rational(p) for p in payload["powers"]]
            totals_by_t[t] = parse_rational(payload["total"])
        elif kind == "committee":
            committee_by_t[t] = sum((parse_rational(m["power"]) for m in payload["members"]), Fraction(0))
        elif kind == "stop":
            stop = payload

    if header is None:
        raise TraceParseError("trace has no scenario header")
    if stop is None:
        raise TraceParseError("trace ends without a stop event; the run is truncated or hit the safety cap")

    T = int(stop["T"])
    missing = [t for t in range(T + 1) if t not in powers_by_t]
    if missing:
        raise TraceParseError(f"trace lacks power snapshots for iterations {missing}")

    gini_series = [_series_gini(powers_by_t[t]) for t in range(T + 1)]
    top_share_series = [
        float(committee_by_t[t] / totals_by_t[t]) if t in committee_by_t and totals_by_t[t] else 0.0
        for t in range(T + 1)
    ]

    final = np.array(stop["final_proposal"], dtype=float)
    optima = np.array(header["optima"], dtype=float)
    weights = np.array([float(parse_rational(p)) for p in header["initial_powers"]])
    distance = Distance(header.get("distance", Distance.EUCLIDEAN.value))
    mean = optima.mean(axis=0)
    weighted = np.average(optima, axis=0, weights=weights) if weights.sum() > 0 else mean

    return RunSummary(
        T=T,
        stop_reason=stop["reason"],
        gini_series=gini_series,
        top_share_series=top_share_series,
        total_power_series=[format_rational(totals_by_t[t]) for t in range(T + 1)],
        final_distance_mean=_distance(final, mean, distance),
        final_distance_weighted=_distance(final, weighted, distance),
        final_proposal=[float(x) for x in final],
        seed=header.get("seed"),
    )


def run_seed(template: ScenarioConfig, seed: int) -> Dict[str, Any]:
    """One batch row: run the template under `seed` and summarize it.

    Any failure is reported in the row instead of propagating, so one bad
    seed never aborts a sweep.
    """
    try:
        result = run(Scenario.from_config(template.with_seed(seed)))
        summary = summarize(result.trace)
    except Exception as e:
        logger.warning("seed %d failed with %s: %s", seed, type(e).__name__, e)
        return {"seed": seed, "summary": None, "error": f"{type(e).__name__}: {e}"}
    return {"seed": seed, "summary": summary.to_dict(), "error": ""}


def _failed_row(seed: int, error: str) -> Dict[str, Any]:
    row = {column: None for column in AGGREGATE_COLUMNS}
    row.update(seed=seed, error=error)
    return row


@dataclass
class BatchResult:
    table: pd.DataFrame
    summaries: Dict[int, RunSummary]

    @property
    def failed(self) -> int:
        return int((self.table["error"] != "").sum()) if len(self.table) else 0

    def aggregates(self) -> Dict[str, Any]:
        return aggregate(self.table)


def aggregate(table: pd.DataFrame) -> Dict[str, Any]:
    """Mean/median T, stop-reason histogram and failure count of a batch table."""
    if table.empty:
        return {"runs": 0, "failed": 0, "mean_T": None, "median_T": None, "stop_reasons": {}}
    ok = table[table["error"] == ""]
    histogram = ok["stop_reason"].value_counts()
    return {
        "runs": int(len(table)),
        "failed": int(len(table) - len(ok)),
        "mean_T": float(ok["T"].mean()) if len(ok) else None,
        "median_T": float(ok["T"].median()) if len(ok) else None,
        "stop_reasons": {reason: int(histogram[reason]) for reason in sorted(histogram.index)},
    }


def batch(template: ScenarioConfig, seeds: Sequence[int], jobs: int = 1) -> BatchResult:
    """Run the template once per seed and collect the rows, sorted by seed.

    With jobs > 1 the seeds run in joblib worker processes; rows do not
    depend on the order in which they complete.
    """
    seeds = list(seeds)
    outcomes = Parallel(n_jobs=max(1, jobs))(delayed(run_seed)(template, seed) for seed in seeds)

    rows = []
    summaries: Dict[int, RunSummary] = {}
    for outcome in sorted(outcomes, key=lambda o: o["seed"]):
        if outcome["summary"] is None:
            rows.append(_failed_row(outcome["seed"], outcome["error"]))
            continue
        summary = RunSummary(**outcome["summary"])
        summaries[outcome["seed"]] = summary
        rows.append(summary.to_row())

    table = pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)
    logger.info("batch of %d seeds done, %d failed", len(seeds), int((table["error"] != "").sum()) if rows else 0)
    return BatchResult(table=table, summaries=summaries)
