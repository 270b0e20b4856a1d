"""Command-line interface.

Subcommands follow the pipeline order::

    sotverse annotate  --manifest M --mode full --out attrs/
    sotverse calibrate --manifest M --attrs attrs/ --out thresholds.json
    sotverse classify  --manifest M --attrs attrs/ --thresholds T.json
    sotverse construct --manifest M --attrs attrs/ --attr all --thresholds T.json --out spaces/
    sotverse eval      --manifest M --space spaces/ratio.json --mechanism ope \
                       --tracker-cmd "reftracker --policy oracle:gt.csv" --out runs/r1
    sotverse report    --runs runs/ --out report/
    sotverse serve     --data service-data/ --bind 127.0.0.1:8080
    sotverse summary   --manifest M
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

from . import (
    attributes,
    calibration,
    dataset,
    engine,
    protocol,
    report,
    scoring,
    service,
    spaces,
)
from .errors import ConfigError, SOTVerseError
from .scoring import RunDefinition


def _fail(message: str):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(1)


def cmd_annotate(args) -> None:
    env = dataset.load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def work(seq):
        table = attributes.annotate_sequence(seq, mode=args.mode)
        seq_dir = out / seq.id
        seq_dir.mkdir(parents=True, exist_ok=True)
        attributes.write_table(table, seq_dir / "attributes.csv")
        return seq.id

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for seq_id in pool.map(work, env.sequences):
                print(f"annotated {seq_id}", file=sys.stderr)
    else:
        for seq in env.sequences:
            work(seq)
            print(f"annotated {seq.id}", file=sys.stderr)


def _load_policy(path: Optional[str]) -> calibration.CalibrationPolicy:
    if path is None:
        return calibration.DEFAULT_POLICY
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    sides = doc.get("sides", dict(calibration.ATTRIBUTE_SIDES))
    exclusions = {
        attr: {side: frozenset(ids) for side, ids in spec.items()}
        for attr, spec in doc.get("exclusions", {}).items()
    }
    policy = calibration.CalibrationPolicy(sides=sides, exclusions=exclusions)
    policy.validate()
    return policy


def cmd_calibrate(args) -> None:
    env = dataset.load_manifest(args.manifest)
    tables = scoring.load_attribute_tables(args.attrs, [s.id for s in env.sequences])
    thresholds = calibration.calibrate_thresholds(
        env, tables, _load_policy(args.policy), set_id=args.id
    )
    calibration.write_thresholds(thresholds, args.out)
    print(f"wrote {args.out}", file=sys.stderr)


def cmd_classify(args) -> None:
    env = dataset.load_manifest(args.manifest)
    thresholds = (
        calibration.load_thresholds(args.thresholds)
        if args.thresholds
        else calibration.default_thresholds()
    )
    out = Path(args.out or args.attrs)
    tables = scoring.load_attribute_tables(args.attrs, [s.id for s in env.sequences])
    for seq in env.sequences:
        flags = calibration.classify_table(tables[seq.id], thresholds)
        seq_dir = out / seq.id
        seq_dir.mkdir(parents=True, exist_ok=True)
        calibration.write_flags(flags, seq_dir / "flags.csv")
        print(f"classified {seq.id}", file=sys.stderr)


def cmd_construct(args) -> None:
    env = dataset.load_manifest(args.manifest)
    thresholds = (
        calibration.load_thresholds(args.thresholds)
        if args.thresholds
        else calibration.default_thresholds()
    )
    tables = scoring.load_attribute_tables(args.attrs, [s.id for s in env.sequences])
    names = list(attributes.ATTRIBUTE_NAMES) if args.attr == "all" else [args.attr]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policy = spaces.StartPointPolicy(
        min_scale=args.min_scale,
        min_sharpness=args.min_sharpness,
        absence_margin=args.absence_margin,
    )
    for name in names:
        subspace = spaces.construct_subspace(
            env, name, thresholds, tables, policy, args.min_length
        )
        spaces.write_subspace(subspace, out / f"{name}.json")
        print(f"{name}: {len(subspace)} subsequences", file=sys.stderr)


def _entry_starts(seq, table, args) -> spaces.StartPointList:
    policy = spaces.StartPointPolicy(
        min_scale=args.min_scale,
        min_sharpness=args.min_sharpness,
        absence_margin=args.absence_margin,
    )
    return spaces.find_start_points(seq, table, policy)


def cmd_eval(args) -> None:
    env = dataset.load_manifest(args.manifest)
    space_id, entries = spaces.resolve_space(env, args.space)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mechanism = args.mechanism
    rope_policy = engine.RopePolicy(
        fail_overlap_threshold=args.fail_threshold, consecutive_n=args.consecutive
    )

    attr_tables: Dict[str, attributes.AttributeTable] = {}
    if args.attrs:
        attr_tables = scoring.load_attribute_tables(
            args.attrs, sorted({e.sequence_id for e in entries})
        )

    def table_for(entry, seq):
        if entry.sequence_id in attr_tables:
            return scoring.slice_table(attr_tables[entry.sequence_id], entry)
        return attributes.annotate_sequence(seq, mode="annotation-only")

    tracker_name = args.tracker_name or "tracker"
    shared_session = None
    if args.replay is None and args.listen:
        host, port = _parse_bind(args.listen)
        print(f"waiting for tracker on {host}:{port} ...", file=sys.stderr)
        channel, _ = protocol.SocketChannel.listen_once(host, port, timeout=args.timeout)
        shared_session = engine.TrackerSession(channel, timeout=args.timeout)
        tracker_name = shared_session.handshake()
    elif args.replay is None and not args.tracker_cmd:
        _fail("eval needs --tracker-cmd, --listen or --replay")

    try:
        for entry in entries:
            seq = scoring.entry_sequence(env, entry)
            log = None
            if args.replay is not None:
                src = Path(args.replay) / f"{entry.id}.csv"
                traj = engine.load_trajectory(src, seq, tracker_name)
            else:
                if shared_session is not None:
                    session = shared_session
                else:
                    channel = protocol.ProcessChannel(args.tracker_cmd)
                    session = engine.TrackerSession(channel, timeout=args.timeout)
                    tracker_name = session.handshake()
                try:
                    if mechanism == "rope":
                        starts = _entry_starts(seq, table_for(entry, seq), args)
                        traj, log = engine.run_rope(session, seq, starts, rope_policy)
                    else:
                        traj = engine.run_ope(session, seq)
                finally:
                    if shared_session is None:
                        session.close()
            engine.write_trajectory(traj, out / f"{entry.id}.csv")
            engine.write_run_meta(
                traj,
                out / f"{entry.id}.meta.json",
                log,
                include_times=args.replay is None,
            )
            status = f" [{traj.error}]" if traj.error else ""
            print(f"evaluated {entry.id}{status}", file=sys.stderr)
    finally:
        if shared_session is not None:
            shared_session.close()

    run = RunDefinition(
        tracker=tracker_name,
        space=space_id,
        mechanism=mechanism,
        manifest=str(Path(args.manifest).resolve()),
        entries=tuple(entries),
    )
    scoring.write_run_definition(run, out)


def cmd_report(args) -> None:
    run_dirs = scoring.discover_runs(args.runs)
    results = []
    env_cache: Dict[str, object] = {}
    for run_dir in run_dirs:
        run = scoring.read_run_definition(run_dir)
        manifest = args.manifest or run.manifest
        if not manifest:
            _fail(f"{run_dir}: run.json has no manifest path; pass --manifest")
        env = env_cache.get(manifest)
        if env is None:
            env = dataset.load_manifest(manifest)
            env_cache[manifest] = env
        results.append(scoring.score_run_dir(run_dir, env, args.attrs))
    path = report.write_report_bundle(results, args.out)
    print(f"wrote {path}", file=sys.stderr)


def cmd_summary(args) -> None:
    env = dataset.load_manifest(args.manifest)
    stats = dataset.dataset_summary(env)
    print(f"environment: {env.id} ({env.kind})")
    print(f"videos:        {stats.videos}")
    print(f"min frames:    {stats.min_frames}")
    print(f"mean frames:   {stats.mean_frames}")
    print(f"max frames:    {stats.max_frames}")
    print(f"total frames:  {stats.total_frames}")
    print(f"absent frames: {stats.absent_frames}")


def _parse_bind(bind: str):
    host, _, port = bind.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise ConfigError(f"bad host:port {bind!r}") from None


def cmd_serve(args) -> None:
    host, port = _parse_bind(args.bind)
    svc = service.EvalService(args.data, host, port)
    print(f"serving on http://{svc.host}:{svc.port}", file=sys.stderr)
    try:
        svc.serve_forever()
    except KeyboardInterrupt:
        svc.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sotverse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="compute per-frame challenge attributes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=("full", "annotation-only"), default="full")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("calibrate", help="derive abnormality thresholds from attributes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", help="JSON calibration policy (sides, exclusions)")
    p.add_argument("--id", default="calibrated")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("classify", help="write per-frame challenge flags")
    p.add_argument("--manifest", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--thresholds", help="thresholds.json (default: shipped defaults)")
    p.add_argument("--out", help="output root (default: the attrs directory)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("construct", help="mine challenging subsequence spaces")
    p.add_argument("--manifest", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--attr", default="all", choices=("all",) + attributes.ATTRIBUTE_NAMES)
    p.add_argument("--thresholds", help="thresholds.json (default: shipped defaults)")
    p.add_argument("--out", required=True)
    p.add_argument("--min-length", type=int, default=spaces.MIN_SUBSEQUENCE_FRAMES)
    p.add_argument("--min-scale", type=float, default=spaces.DEFAULT_START_POLICY.min_scale)
    p.add_argument(
        "--min-sharpness", type=float, default=spaces.DEFAULT_START_POLICY.min_sharpness
    )
    p.add_argument(
        "--absence-margin", type=int, default=spaces.DEFAULT_START_POLICY.absence_margin
    )
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("eval", help="run a tracker (or replay results) over a space")
    p.add_argument("--manifest", required=True)
    p.add_argument("--space", help="subspace JSON; omit to use every full sequence")
    p.add_argument("--mechanism", choices=("ope", "rope"), default="ope")
    p.add_argument("--tracker-cmd", help="tracker subprocess command line")
    p.add_argument("--listen", help="host:port; wait for a tracker to connect over TCP")
    p.add_argument("--replay", help="directory of pre-recorded <entry>.csv result files")
    p.add_argument("--attrs", help="attribute tables (for R-OPE start points)")
    p.add_argument("--out", required=True)
    p.add_argument("--tracker-name", help="name for replay runs")
    p.add_argument("--timeout", type=float, default=60.0, help="per-reply timeout (s)")
    p.add_argument("--fail-threshold", type=float, default=0.5)
    p.add_argument("--consecutive", type=int, default=10)
    p.add_argument("--min-scale", type=float, default=spaces.DEFAULT_START_POLICY.min_scale)
    p.add_argument(
        "--min-sharpness", type=float, default=spaces.DEFAULT_START_POLICY.min_sharpness
    )
    p.add_argument(
        "--absence-margin", type=int, default=spaces.DEFAULT_START_POLICY.absence_margin
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="score run directories into a report bundle")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="override the manifest recorded in run.json")
    p.add_argument("--attrs", help="attribute/flags tables for challenge indicators")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("summary", help="print environment statistics")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("serve", help="run the submission/leaderboard service")
    p.add_argument("--data", required=True)
    p.add_argument("--bind", default="127.0.0.1:8146")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SOTVerseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
