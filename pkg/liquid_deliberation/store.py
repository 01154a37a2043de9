"""
Persistence of run artifacts: traces, summaries and tables.

Every file lands through write-then-rename so a crashed run never leaves a
truncated artifact behind.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List

import pandas as pd

from .errors import TraceParseError

logger = logging.getLogger(__name__)


def _dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def _dump_jsonl(events: Iterable[Dict[str, Any]]) -> str:
    return "".join(json.dumps(event, ensure_ascii=False, separators=(",", ":")) + "\n" for event in events)


def _temp_path(target: Path) -> Path:
    fd, name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    os.close(fd)
    return Path(name)


def write_text_atomic(path: Path, text: str) -> None:
    path = Path(path)
    temp = _temp_path(path)
    try:
        with open(temp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(temp, path)
    except BaseException:
        temp.unlink(missing_ok=True)
        raise


def write_json_atomic(path: Path, data: Any) -> None:
    write_text_atomic(path, _dump_json(data))


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def read_trace(path: Path) -> List[Dict[str, Any]]:
    """Load a JSONL trace; a torn final line means the trace is truncated."""
    events = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise TraceParseError(f"{path}:{number}: {e}") from e
    return events


def table_to_csv(table: pd.DataFrame) -> str:
    return table.to_csv(index=False, lineterminator="\n", float_format="%.12g")


class RunArtifacts:
    """Stages a run's output files and publishes them all at once.

    Usage:
        with RunArtifacts(out_dir) as artifacts:
            artifacts.add_jsonl("trace.jsonl", events)
            artifacts.add_json("summary.json", summary)
    Leaving the block normally renames every staged file into place; an
    exception removes them all.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self._staged: List[tuple] = []

    def __enter__(self) -> "RunArtifacts":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def add_text(self, name: str, text: str) -> None:
        target = self.out_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        temp = _temp_path(target)
        self._staged.append((temp, target))
        with open(temp, "w", encoding="utf-8", newline="") as f:
            f.write(text)

    def add_json(self, name: str, data: Any) -> None:
        self.add_text(name, _dump_json(data))

    def add_jsonl(self, name: str, events: Iterable[Dict[str, Any]]) -> None:
        self.add_text(name, _dump_jsonl(events))

    def add_table(self, name: str, table: pd.DataFrame) -> None:
        self.add_text(name, table_to_csv(table))

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            for temp, target in self._staged:
                os.replace(temp, target)
            logger.debug("published %d artifacts to %s", len(self._staged), self.out_dir)
        else:
            for temp, _ in self._staged:
                temp.unlink(missing_ok=True)
        self._staged = []
        return False
