"""Glue between run directories, replay files and the metric suite.

A *run* is one tracker x space x mechanism: a ``run.json`` definition
plus one replay-compatible box file (and optional meta sidecar) per space
entry. The same scoring path serves the local report command and the
submission service, which is what makes their outputs byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence as Seq, Tuple, Union

from . import attributes, calibration, dataset, engine, metrics
from .attributes import AttributeTable
from .calibration import ChallengeFlags
from .errors import LoadError
from .geometry import Environment, Sequence
from .metrics import SequenceScores
from .report import RunResult
from .spaces import SpaceEntry

RUN_SCHEMA = 1


@dataclass(frozen=True)
class RunDefinition:
    tracker: str
    space: str
    mechanism: str
    manifest: str
    entries: Tuple[SpaceEntry, ...]


def write_run_definition(run: RunDefinition, run_dir: Union[str, Path]) -> None:
    doc = {
        "schema": RUN_SCHEMA,
        "tracker": run.tracker,
        "space": run.space,
        "mechanism": run.mechanism,
        "manifest": run.manifest,
        "entries": [
            {"id": e.id, "sequence": e.sequence_id, "start": e.start, "end": e.end}
            for e in run.entries
        ],
    }
    Path(run_dir, "run.json").write_bytes(
        (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
    )


def read_run_definition(run_dir: Union[str, Path]) -> RunDefinition:
    path = Path(run_dir, "run.json")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot parse run definition {path}: {exc}") from exc
    if doc.get("schema") != RUN_SCHEMA:
        raise LoadError(f"{path}: unsupported run schema {doc.get('schema')!r}")
    try:
        entries = tuple(
            SpaceEntry(e["id"], e["sequence"], int(e["start"]), int(e["end"]))
            for e in doc["entries"]
        )
        return RunDefinition(
            tracker=doc["tracker"],
            space=doc["space"],
            mechanism=doc["mechanism"],
            manifest=doc.get("manifest", ""),
            entries=entries,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{path}: bad run definition: {exc}") from exc


def entry_sequence(env: Environment, entry: SpaceEntry) -> Sequence:
    seq = env.sequence(entry.sequence_id)
    if entry.start == 0 and entry.end == len(seq):
        return seq
    return dataset.slice_sequence(seq, entry.start, entry.end, entry.id)


def load_attribute_tables(
    attrs_dir: Union[str, Path], sequence_ids: Seq[str]
) -> Dict[str, AttributeTable]:
    out = {}
    root = Path(attrs_dir)
    for seq_id in sequence_ids:
        path = root / seq_id / "attributes.csv"
        if not path.is_file():
            raise LoadError(f"missing attribute table {path}")
        out[seq_id] = attributes.read_table(path)
    return out


def load_flag_tables(
    attrs_dir: Union[str, Path], sequence_ids: Seq[str]
) -> Dict[str, ChallengeFlags]:
    out = {}
    root = Path(attrs_dir)
    for seq_id in sequence_ids:
        path = root / seq_id / "flags.csv"
        if not path.is_file():
            raise LoadError(f"missing flags table {path}")
        out[seq_id] = calibration.read_flags(path)
    return out


def slice_table(table: AttributeTable, entry: SpaceEntry) -> AttributeTable:
    if entry.start == 0 and entry.end == len(table):
        return table
    return AttributeTable(
        sequence_id=entry.id,
        records=table.records[entry.start : entry.end],
        mode=table.mode,
    )


def slice_flags(flags: ChallengeFlags, entry: SpaceEntry) -> ChallengeFlags:
    if entry.start == 0 and entry.end == len(flags):
        return flags
    return ChallengeFlags(sequence_id=entry.id, rows=flags.rows[entry.start : entry.end])


TrajectoryProvider = Callable[[SpaceEntry, Sequence], Tuple[engine.Trajectory, Optional[engine.RestartLog]]]


def score_entries(
    env: Environment,
    run: RunDefinition,
    provider: TrajectoryProvider,
    tables: Optional[Mapping[str, AttributeTable]] = None,
    flags: Optional[Mapping[str, ChallengeFlags]] = None,
) -> RunResult:
    """Score every entry of a run and aggregate to a report row."""
    per_seq: List[SequenceScores] = []
    logs: List[Optional[engine.RestartLog]] = []
    for entry in run.entries:
        seq = entry_sequence(env, entry)
        traj, log = provider(entry, seq)
        attr_table = None
        flag_table = None
        if tables is not None and entry.sequence_id in tables:
            attr_table = slice_table(tables[entry.sequence_id], entry)
        if flags is not None and entry.sequence_id in flags:
            flag_table = slice_flags(flags[entry.sequence_id], entry)
        per_seq.append(metrics.score_sequence(traj, seq, attr_table, flag_table, log))
        logs.append(log)
    return RunResult(
        tracker=run.tracker,
        space=run.space,
        mechanism=run.mechanism,
        aggregate=metrics.aggregate_environment(per_seq, logs),
        weighted=metrics.aggregate_environment(per_seq, logs, weighted=True),
        per_sequence=tuple(per_seq),
    )


def score_run_dir(
    run_dir: Union[str, Path],
    env: Environment,
    attrs_dir: Optional[Union[str, Path]] = None,
) -> RunResult:
    """Score a run directory produced by the eval command."""
    run_dir = Path(run_dir)
    run = read_run_definition(run_dir)
    tables = flags = None
    if attrs_dir is not None:
        seq_ids = sorted({e.sequence_id for e in run.entries})
        tables = load_attribute_tables(attrs_dir, seq_ids)
        flags_root = Path(attrs_dir)
        if all((flags_root / sid / "flags.csv").is_file() for sid in seq_ids):
            flags = load_flag_tables(attrs_dir, seq_ids)

    def provider(entry: SpaceEntry, seq: Sequence):
        csv_path = run_dir / f"{entry.id}.csv"
        if not csv_path.is_file():
            raise LoadError(f"missing result file {csv_path}")
        return engine.read_run_entry(csv_path, seq)

    return score_entries(env, run, provider, tables, flags)


def discover_runs(runs_dir: Union[str, Path]) -> List[Path]:
    """All run directories under a root (any directory with a run.json)."""
    root = Path(runs_dir)
    if (root / "run.json").is_file():
        return [root]
    found = sorted(p.parent for p in root.rglob("run.json"))
    if not found:
        raise LoadError(f"no run.json found under {root}")
    return found
