#!/usr/bin/env python3
"""
Command-line entry point: run, batch, validate, summarize, graph.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from .analysis import aggregate, batch, summarize
from .config import load_config
from .engine import Simulation, build_stage_graph, run
from .errors import ConfigError, SafetyCapError, TraceParseError
from .scenarios import Scenario, demo_config
from .store import RunArtifacts, read_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_SAFETY_CAP = 3
EXIT_BATCH_FAILED = 4


def parse_seed_range(text: str) -> List[int]:
    """'A..B' (inclusive) or a single seed."""
    try:
        if ".." in text:
            start, end = (int(part) for part in text.split("..", 1))
        else:
            start = end = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a seed or a range A..B, got {text!r}") from None
    if start < 0 or end < start:
        raise argparse.ArgumentTypeError(f"empty or negative seed range {text!r}")
    return list(range(start, end + 1))


def _report_config_error(error: ConfigError) -> int:
    print("❌ Invalid scenario:")
    for problem in error.problems:
        print(f"   • {problem}")
    return EXIT_CONFIG


def cmd_run(config_path: Path, out_dir: Path) -> int:
    try:
        config = load_config(config_path)
    except ConfigError as e:
        return _report_config_error(e)

    print(f"🗳️ Running {config_path} (n={config.n}, k={config.k}, s={config.s}, seed={config.seed})")
    try:
        result = run(Scenario.from_config(config))
    except SafetyCapError as e:
        print(f"🛑 {e}")
        try:
            with RunArtifacts(out_dir) as artifacts:
                artifacts.add_jsonl("trace.partial.jsonl", e.partial.trace)
        except OSError as io_error:
            logger.error("could not save the partial trace: %s", io_error)
        return EXIT_SAFETY_CAP

    summary = summarize(result.trace)
    try:
        with RunArtifacts(out_dir) as artifacts:
            artifacts.add_jsonl("trace.jsonl", result.trace)
            artifacts.add_json("summary.json", summary.to_dict())
            artifacts.add_json("final_proposal.json", {
                "T": result.T,
                "stop_reason": result.stop_reason.value,
                "final_proposal": result.final_proposal.to_list(),
            })
    except OSError as e:
        print(f"❌ Could not write results to {out_dir}: {e}")
        return EXIT_IO

    print(f"✅ Stopped at T={result.T}: {result.stop_reason.value}")
    print(f"📄 Artifacts written to {out_dir}")
    return EXIT_OK


def cmd_batch(template_path: Path, seeds: List[int], out_dir: Path, jobs: int) -> int:
    try:
        template = load_config(template_path)
    except ConfigError as e:
        return _report_config_error(e)

    print(f"🎲 Running {len(seeds)} seeds with {jobs} job(s)")
    result = batch(template, seeds, jobs=jobs)
    stats = aggregate(result.table)
    try:
        with RunArtifacts(out_dir) as artifacts:
            artifacts.add_table("aggregate.csv", result.table)
            artifacts.add_json("aggregate.json", stats)
            for seed, summary in sorted(result.summaries.items()):
                artifacts.add_json(f"summaries/seed-{seed}.json", summary.to_dict())
    except OSError as e:
        print(f"❌ Could not write results to {out_dir}: {e}")
        return EXIT_IO

    print(f"📊 Mean T: {stats['mean_T']}  Median T: {stats['median_T']}")
    for reason, count in stats["stop_reasons"].items():
        print(f"   {reason}: {count}")
    if stats["failed"]:
        print(f"⚠️ {stats['failed']} seed(s) failed, see the error column of aggregate.csv")
        return EXIT_BATCH_FAILED
    print(f"✅ Batch written to {out_dir}")
    return EXIT_OK


def cmd_validate(config_path: Path) -> int:
    try:
        config = load_config(config_path)
    except ConfigError as e:
        return _report_config_error(e)
    print(f"✅ {config_path} is a valid scenario (n={config.n}, k={config.k}, s={config.s})")
    return EXIT_OK


def cmd_summarize(trace_path: Path) -> int:
    try:
        summary = summarize(read_trace(trace_path))
    except OSError as e:
        print(f"❌ Cannot read {trace_path}: {e}")
        return EXIT_IO
    except TraceParseError as e:
        print(f"❌ {e}")
        return EXIT_IO
    print(f"🏁 T={summary.T} ({summary.stop_reason})")
    print(f"⚖️ Final Gini: {summary.final_gini:.4f}   Max committee share: {summary.max_top_share:.4f}")
    print(f"🎯 Distance to mean optimum: {summary.final_distance_mean:.6f}")
    print(f"🎯 Distance to power-weighted optimum: {summary.final_distance_weighted:.6f}")
    return EXIT_OK


def cmd_graph() -> int:
    app = build_stage_graph(Simulation(Scenario.from_config(demo_config())))
    print(app.get_graph().draw_ascii())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    default_out = os.getenv("LIQUID_DELIBERATION_OUT", "results")
    default_jobs = int(os.getenv("LIQUID_DELIBERATION_JOBS", "1"))

    parser = argparse.ArgumentParser(prog="liquid-deliberation", description="Liquid deliberation simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run one scenario")
    run_parser.add_argument("config", type=Path)
    run_parser.add_argument("--out", type=Path, default=Path(default_out))

    batch_parser = commands.add_parser("batch", help="run a scenario template over a seed range")
    batch_parser.add_argument("template", type=Path)
    batch_parser.add_argument("--seeds", type=parse_seed_range, required=True, help="A..B, inclusive")
    batch_parser.add_argument("--out", type=Path, default=Path(default_out))
    batch_parser.add_argument("--jobs", type=int, default=default_jobs)

    validate_parser = commands.add_parser("validate", help="check a scenario file")
    validate_parser.add_argument("config", type=Path)

    summarize_parser = commands.add_parser("summarize", help="summarize a persisted trace")
    summarize_parser.add_argument("trace", type=Path)

    commands.add_parser("graph", help="print the stage graph")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=os.getenv("LIQUID_DELIBERATION_LOG_LEVEL", "WARNING").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)

    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "batch":
        return cmd_batch(args.template, args.seeds, args.out, max(1, args.jobs))
    if args.command == "validate":
        return cmd_validate(args.config)
    if args.command == "summarize":
        return cmd_summarize(args.trace)
    return cmd_graph()


if __name__ == "__main__":
    sys.exit(main())
