"""Minimal submission and leaderboard service.

Workflow mirror of the hosted platform: upload result files, score them
offline, fetch the report, rank submissions. Storage is a content-
addressed directory plus an append-only index -- no database, so the
whole service restarts from disk losing nothing.

HTTP surface (all responses are schema-versioned JSON):

* ``POST /api/v1/submissions`` -- multipart form with an ``archive`` zip
  (one ``<entry>.csv`` replay file per space entry) and a ``meta`` JSON
  field ``{"tracker": ..., "space": ..., "mechanism": "ope"}``.
* ``GET /api/v1/submissions/{id}/report`` -- the report, or a status
  document while queued, or the failure detail.
* ``GET /api/v1/leaderboard?space=..&metric=..`` -- submissions ranked by
  a headline metric, ties broken by earlier upload.

Only OPE replays are accepted: restart-enabled evaluation needs a live
tracker session, so ``mechanism: rope`` uploads are rejected with a
pointer to the local engine.

The data directory holds ``manifest.json`` (the environment), optional
``spaces/<id>.json`` subspace files (the environment itself is always
available as a space under its own id) and optional
``attributes/<seq>/{attributes,flags}.csv`` for the challenge-aware
indicators.
"""

from __future__ import annotations

import hashlib
import io
import json
import queue
import re
import threading
import time
import zipfile
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, List, Tuple, Union
from urllib.parse import parse_qs, urlparse

from . import dataset, engine, report, scoring, spaces
from .errors import SOTVerseError
from .geometry import Environment
from .scoring import RunDefinition
from .spaces import SpaceEntry

API_SCHEMA = 1
MAX_ARCHIVE_BYTES = 64 * 1024 * 1024
LEADERBOARD_METRICS = (
    "precision",
    "normalized_precision",
    "success_auc",
    "mean_overlap",
    "challenging",
)


class ServiceError(SOTVerseError):
    def __init__(self, status: int, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.payload = {"schema": API_SCHEMA, "error": message, **extra}


class SubmissionStore:
    """Content-addressed archive store with an append-only index."""

    def __init__(self, data_dir: Union[str, Path]):
        self.data_dir = Path(data_dir)
        self.submissions_dir = self.data_dir / "submissions"
        self.submissions_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.data_dir / "index.jsonl"
        self._lock = threading.Lock()
        self.env: Environment = dataset.load_manifest(self.data_dir / "manifest.json")
        self._spaces: Dict[str, List[SpaceEntry]] = {}
        self._load_spaces()

    def _load_spaces(self) -> None:
        env_id, entries = spaces.resolve_space(self.env, None)
        self._spaces[env_id] = entries
        spaces_dir = self.data_dir / "spaces"
        if spaces_dir.is_dir():
            for path in sorted(spaces_dir.glob("*.json")):
                _, entries = spaces.resolve_space(self.env, path)
                self._spaces[path.stem] = entries

    def space_entries(self, space_id: str) -> List[SpaceEntry]:
        try:
            return self._spaces[space_id]
        except KeyError:
            raise ServiceError(
                400, f"unknown space {space_id!r}", known_spaces=sorted(self._spaces)
            ) from None

    # -------------------------------------------------------- submissions

    def submission_dir(self, sub_id: str) -> Path:
        return self.submissions_dir / sub_id

    def submit(self, archive: bytes, meta: dict) -> Tuple[str, bool]:
        """Validate and persist a submission; returns (id, was_new)."""
        tracker = meta.get("tracker")
        space_id = meta.get("space")
        mechanism = str(meta.get("mechanism", "ope")).lower()
        if not tracker or not space_id:
            raise ServiceError(400, "meta must carry tracker and space")
        if mechanism == "rope":
            raise ServiceError(
                400,
                "restart-enabled runs need a live tracker session; "
                "run them locally with `sotverse eval --mechanism rope`",
            )
        if mechanism != "ope":
            raise ServiceError(400, f"unknown mechanism {mechanism!r}")
        if len(archive) > MAX_ARCHIVE_BYTES:
            raise ServiceError(413, f"archive exceeds {MAX_ARCHIVE_BYTES} bytes")
        entries = self.space_entries(space_id)
        try:
            with zipfile.ZipFile(io.BytesIO(archive)) as zf:
                names = set(zf.namelist())
        except zipfile.BadZipFile as exc:
            raise ServiceError(400, f"archive is not a zip file: {exc}") from exc
        missing = [e.id for e in entries if f"{e.id}.csv" not in names]
        if missing:
            raise ServiceError(
                400, "archive misses result files for some sequences", missing=missing
            )
        canonical_meta = json.dumps(
            {"tracker": tracker, "space": space_id, "mechanism": mechanism},
            sort_keys=True,
            separators=(",", ":"),
        )
        digest = hashlib.sha256()
        digest.update(canonical_meta.encode())
        digest.update(b"\x00")
        digest.update(archive)
        sub_id = digest.hexdigest()
        with self._lock:
            sub_dir = self.submission_dir(sub_id)
            if sub_dir.exists():
                return sub_id, False
            tmp = sub_dir.with_suffix(".tmp")
            tmp.mkdir(parents=True)
            (tmp / "archive.zip").write_bytes(archive)
            (tmp / "meta.json").write_bytes(
                (
                    json.dumps(
                        {
                            "schema": API_SCHEMA,
                            "id": sub_id,
                            "tracker": tracker,
                            "space": space_id,
                            "mechanism": mechanism,
                            "created_at_ns": time.time_ns(),
                        },
                        indent=2,
                        sort_keys=True,
                    )
                    + "\n"
                ).encode()
            )
            tmp.rename(sub_dir)
            with open(self.index_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"id": sub_id, "space": space_id}) + "\n")
        return sub_id, True

    def meta(self, sub_id: str) -> dict:
        path = self.submission_dir(sub_id) / "meta.json"
        if not path.is_file():
            raise ServiceError(404, f"unknown submission {sub_id!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def status(self, sub_id: str) -> str:
        sub_dir = self.submission_dir(sub_id)
        if not sub_dir.is_dir():
            raise ServiceError(404, f"unknown submission {sub_id!r}")
        if (sub_dir / "report.json").is_file():
            return "scored"
        if (sub_dir / "error.json").is_file():
            return "failed"
        return "queued"

    def all_submissions(self) -> List[str]:
        return sorted(p.name for p in self.submissions_dir.iterdir() if p.is_dir())

    # ------------------------------------------------------------ scoring

    def score(self, sub_id: str) -> None:
        """Score one submission; failures are recorded, not raised."""
        sub_dir = self.submission_dir(sub_id)
        meta = self.meta(sub_id)
        try:
            entries = self.space_entries(meta["space"])
            run = RunDefinition(
                tracker=meta["tracker"],
                space=meta["space"],
                mechanism=meta["mechanism"],
                manifest=str(self.data_dir / "manifest.json"),
                entries=tuple(entries),
            )
            seq_ids = sorted({e.sequence_id for e in entries})
            attrs_dir = self.data_dir / "attributes"
            tables = flags = None
            if attrs_dir.is_dir():
                if all((attrs_dir / s / "attributes.csv").is_file() for s in seq_ids):
                    tables = scoring.load_attribute_tables(attrs_dir, seq_ids)
                if all((attrs_dir / s / "flags.csv").is_file() for s in seq_ids):
                    flags = scoring.load_flag_tables(attrs_dir, seq_ids)
            with zipfile.ZipFile(sub_dir / "archive.zip") as zf:

                def provider(entry, seq):
                    text = zf.read(f"{entry.id}.csv").decode("utf-8")
                    traj = engine.parse_trajectory(text, seq, f"{entry.id}.csv", meta["tracker"])
                    return traj, None

                result = scoring.score_entries(self.env, run, provider, tables, flags)
            doc = report.build_report_document([result])
            (sub_dir / "report.json").write_bytes(report.dump_report(doc))
        except (SOTVerseError, KeyError, OSError) as exc:
            (sub_dir / "error.json").write_bytes(
                (
                    json.dumps(
                        {"schema": API_SCHEMA, "error": f"{type(exc).__name__}: {exc}"},
                        indent=2,
                        sort_keys=True,
                    )
                    + "\n"
                ).encode()
            )

    def report_payload(self, sub_id: str) -> Tuple[int, dict]:
        status = self.status(sub_id)
        sub_dir = self.submission_dir(sub_id)
        if status == "scored":
            return 200, json.loads((sub_dir / "report.json").read_text(encoding="utf-8"))
        if status == "failed":
            detail = json.loads((sub_dir / "error.json").read_text(encoding="utf-8"))
            return 200, {"schema": API_SCHEMA, "status": "failed", "detail": detail}
        return 200, {"schema": API_SCHEMA, "status": "queued"}

    def leaderboard(self, space_id: str, metric: str) -> List[dict]:
        if metric not in LEADERBOARD_METRICS:
            raise ServiceError(
                400, f"unknown metric {metric!r}", known_metrics=list(LEADERBOARD_METRICS)
            )
        self.space_entries(space_id)  # 400 on unknown space
        rows = []
        for sub_id in self.all_submissions():
            meta = self.meta(sub_id)
            if meta.get("space") != space_id or self.status(sub_id) != "scored":
                continue
            doc = json.loads(
                (self.submission_dir(sub_id) / "report.json").read_text(encoding="utf-8")
            )
            entry = doc["results"][meta["tracker"]][space_id][meta["mechanism"]]
            value = entry["headlines"].get(metric)
            if value is None:
                continue
            rows.append(
                {
                    "id": sub_id,
                    "tracker": meta["tracker"],
                    "value": value,
                    "created_at_ns": meta.get("created_at_ns", 0),
                }
            )
        rows.sort(key=lambda r: (-r["value"], r["created_at_ns"], r["id"]))
        for rank, row in enumerate(rows, start=1):
            row["rank"] = rank
        return rows


class EvalService:
    """The HTTP server plus its single-consumer scoring worker."""

    def __init__(self, data_dir: Union[str, Path], host: str = "127.0.0.1", port: int = 0):
        self.store = SubmissionStore(data_dir)
        self._queue: "queue.Queue[Optional[str]]" = queue.Queue()
        self._worker = threading.Thread(target=self._drain, daemon=True)
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(self))
        self.host, self.port = self._httpd.server_address[:2]
        # resume anything that was queued when the previous process stopped
        for sub_id in self.store.all_submissions():
            if self.store.status(sub_id) == "queued":
                self._queue.put(sub_id)

    def enqueue(self, sub_id: str) -> None:
        self._queue.put(sub_id)

    def _drain(self) -> None:
        while True:
            sub_id = self._queue.get()
            if sub_id is None:
                return
            try:
                self.store.score(sub_id)
            finally:
                self._queue.task_done()

    def start(self) -> None:
        self._worker.start()
        threading.Thread(target=self._httpd.serve_forever, daemon=True).start()

    def serve_forever(self) -> None:
        self._worker.start()
        self._httpd.serve_forever()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._queue.put(None)


_BOUNDARY_RE = re.compile(r'boundary="?([^";]+)"?')


def parse_multipart(content_type: str, body: bytes) -> Dict[str, bytes]:
    """Fields of a multipart/form-data body, keyed by part name."""
    m = _BOUNDARY_RE.search(content_type or "")
    if not m:
        raise ServiceError(400, "missing multipart boundary")
    boundary = m.group(1).encode()
    fields: Dict[str, bytes] = {}
    for chunk in body.split(b"--" + boundary):
        chunk = chunk.strip(b"\r\n")
        if not chunk or chunk == b"--":
            continue
        header_blob, _, payload = chunk.partition(b"\r\n\r\n")
        name = None
        for line in header_blob.split(b"\r\n"):
            if line.lower().startswith(b"content-disposition"):
                nm = re.search(rb'name="([^"]+)"', line)
                if nm:
                    name = nm.group(1).decode()
        if name:
            fields[name] = payload
    return fields


def _make_handler(service: EvalService):
    store = service.store

    class Handler(BaseHTTPRequestHandler):
        server_version = "sotverse"
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, status: int, payload: dict) -> None:
            body = (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            try:
                if urlparse(self.path).path != "/api/v1/submissions":
                    raise ServiceError(404, "unknown endpoint")
                length = int(self.headers.get("Content-Length", "0"))
                if length > MAX_ARCHIVE_BYTES * 2:
                    raise ServiceError(413, "request too large")
                body = self.rfile.read(length)
                fields = parse_multipart(self.headers.get("Content-Type", ""), body)
                if "archive" not in fields or "meta" not in fields:
                    raise ServiceError(400, "multipart needs archive and meta parts")
                try:
                    meta = json.loads(fields["meta"].decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                    raise ServiceError(400, f"meta is not valid JSON: {exc}") from exc
                sub_id, created = store.submit(fields["archive"], meta)
                if created:
                    service.enqueue(sub_id)
                self._send(
                    201 if created else 200,
                    {
                        "schema": API_SCHEMA,
                        "id": sub_id,
                        "status": store.status(sub_id),
                        "duplicate": not created,
                    },
                )
            except ServiceError as exc:
                self._send(exc.status, exc.payload)

        def do_GET(self):
            try:
                parsed = urlparse(self.path)
                m = re.fullmatch(r"/api/v1/submissions/([0-9a-f]+)/report", parsed.path)
                if m:
                    status, payload = store.report_payload(m.group(1))
                    self._send(status, payload)
                    return
                if parsed.path == "/api/v1/leaderboard":
                    params = parse_qs(parsed.query)
                    space_id = params.get("space", [None])[0]
                    metric = params.get("metric", ["success_auc"])[0]
                    if not space_id:
                        raise ServiceError(400, "space query parameter is required")
                    rows = store.leaderboard(space_id, metric)
                    self._send(
                        200,
                        {
                            "schema": API_SCHEMA,
                            "space": space_id,
                            "metric": metric,
                            "entries": rows,
                        },
                    )
                    return
                raise ServiceError(404, "unknown endpoint")
            except ServiceError as exc:
                self._send(exc.status, exc.payload)

    return Handler
