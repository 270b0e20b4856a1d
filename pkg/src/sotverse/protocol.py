"""Line-delimited tracker wire protocol.

One UTF-8 JSON object per line. The engine opens with
``{"type":"hello","version":1}``; the tracker replies
``{"type":"hello","name":...}``. Each ``init`` (image path plus a ground
truth box) and each ``frame`` (image path) must be answered by exactly one
``state`` carrying the predicted box. ``quit`` ends the session. Unknown
fields are ignored on decode so the format can grow without breaking old
clients. Messages travel over the tracker process's standard streams by
default, or over a TCP connection for trackers that cannot run as
subprocesses.
"""

from __future__ import annotations

import json
import selectors
import shlex
import socket
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import DecodeError, SessionError

PROTOCOL_VERSION = 1

MESSAGE_TYPES = ("hello", "init", "frame", "state", "quit", "error")

# required payload fields per message type; bbox present iff init or state
_REQUIRED = {
    "hello": (),
    "init": ("frame", "bbox"),
    "frame": ("frame",),
    "state": ("bbox",),
    "quit": (),
    "error": ("message",),
}


@dataclass(frozen=True)
class ProtocolMessage:
    type: str
    version: Optional[int] = None
    name: Optional[str] = None
    frame: Optional[str] = None
    bbox: Optional[Tuple[float, float, float, float]] = None
    message: Optional[str] = None


def hello_engine() -> ProtocolMessage:
    return ProtocolMessage(type="hello", version=PROTOCOL_VERSION)


def hello_tracker(name: str) -> ProtocolMessage:
    return ProtocolMessage(type="hello", name=name)


def _num(v: float):
    f = float(v)
    return int(f) if f.is_integer() else f


def encode(msg: ProtocolMessage) -> str:
    """Serialize a message as one JSON line (no trailing newline)."""
    if msg.type not in MESSAGE_TYPES:
        raise DecodeError(f"unknown message type {msg.type!r}")
    doc = {"type": msg.type}
    if msg.version is not None:
        doc["version"] = msg.version
    if msg.name is not None:
        doc["name"] = msg.name
    if msg.frame is not None:
        doc["frame"] = msg.frame
    if msg.bbox is not None:
        doc["bbox"] = [_num(v) for v in msg.bbox]
    if msg.message is not None:
        doc["message"] = msg.message
    return json.dumps(doc, separators=(",", ":"))


def decode(line: str) -> ProtocolMessage:
    """Parse one line; unknown fields are ignored, bad ones are located."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"invalid JSON: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(doc, dict):
        raise DecodeError("message must be a JSON object")
    mtype = doc.get("type")
    if mtype not in MESSAGE_TYPES:
        raise DecodeError(f"unknown message type {mtype!r}", offset=_offset(line, "type"))
    for field in _REQUIRED[mtype]:
        if field not in doc:
            raise DecodeError(
                f"{mtype} message missing required field {field!r}",
                offset=_offset(line, "type"),
            )
    if mtype not in ("init", "state") and "bbox" in doc:
        raise DecodeError(
            f"{mtype} message must not carry a bbox", offset=_offset(line, "bbox")
        )
    bbox = None
    if "bbox" in doc:
        raw = doc["bbox"]
        if (
            not isinstance(raw, list)
            or len(raw) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)
        ):
            raise DecodeError(f"bbox must be 4 numbers, got {raw!r}", offset=_offset(line, "bbox"))
        bbox = tuple(float(v) for v in raw)
    version = doc.get("version")
    if version is not None and not isinstance(version, int):
        raise DecodeError("version must be an integer", offset=_offset(line, "version"))
    return ProtocolMessage(
        type=mtype,
        version=version,
        name=_opt_str(doc, "name", line),
        frame=_opt_str(doc, "frame", line),
        bbox=bbox,
        message=_opt_str(doc, "message", line),
    )


def _opt_str(doc: dict, key: str, line: str) -> Optional[str]:
    v = doc.get(key)
    if v is None:
        return None
    if not isinstance(v, str):
        raise DecodeError(f"{key} must be a string", offset=_offset(line, key))
    return v


def _offset(line: str, key: str) -> int:
    pos = line.find(f'"{key}"')
    return max(pos, 0)


class LineChannel:
    """Newline-delimited message transport over a pair of streams."""

    def read_message(self, timeout: Optional[float] = None) -> ProtocolMessage:
        raise NotImplementedError

    def write_message(self, msg: ProtocolMessage) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class ProcessChannel(LineChannel):
    """Tracker subprocess speaking the protocol on stdin/stdout."""

    def __init__(self, command: str):
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=sys.stderr.fileno() if hasattr(sys.stderr, "fileno") else None,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SessionError(f"cannot start tracker {command!r}: {exc}") from exc
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)

    def read_message(self, timeout: Optional[float] = None) -> ProtocolMessage:
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            remaining = None if deadline is None else deadline - time.monotonic()
            if remaining is not None and remaining <= 0:
                raise SessionError("tracker reply timed out")
            if not self._selector.select(remaining):
                raise SessionError("tracker reply timed out")
            line = self._proc.stdout.readline()
            if line == "":
                raise SessionError("tracker closed its output stream")
            line = line.rstrip("\n")
            if line:
                return decode(line)

    def write_message(self, msg: ProtocolMessage) -> None:
        try:
            self._proc.stdin.write(encode(msg) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SessionError(f"tracker channel broken: {exc}") from exc

    def close(self) -> None:
        self._selector.close()
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class SocketChannel(LineChannel):
    """Tracker on the other end of a TCP connection."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._reader = sock.makefile("r", encoding="utf-8", newline="\n")
        self._writer = sock.makefile("w", encoding="utf-8", newline="\n")

    @classmethod
    def listen_once(cls, host: str, port: int, timeout: Optional[float] = None):
        """Accept a single tracker connection on host:port.

        Returns (channel, bound_port); port 0 picks an ephemeral port.
        """
        server = socket.create_server((host, port))
        server.settimeout(timeout)
        try:
            bound_port = server.getsockname()[1]
            conn, _ = server.accept()
        except socket.timeout as exc:
            raise SessionError(f"no tracker connected to {host}:{port}") from exc
        finally:
            server.close()
        return cls(conn), bound_port

    def read_message(self, timeout: Optional[float] = None) -> ProtocolMessage:
        self._sock.settimeout(timeout)
        try:
            while True:
                line = self._reader.readline()
                if line == "":
                    raise SessionError("tracker closed the connection")
                line = line.rstrip("\n")
                if line:
                    return decode(line)
        except socket.timeout as exc:
            raise SessionError("tracker reply timed out") from exc
        except OSError as exc:
            raise SessionError(f"tracker channel broken: {exc}") from exc

    def write_message(self, msg: ProtocolMessage) -> None:
        try:
            self._writer.write(encode(msg) + "\n")
            self._writer.flush()
        except OSError as exc:
            raise SessionError(f"tracker channel broken: {exc}") from exc

    def close(self) -> None:
        for closer in (self._reader.close, self._writer.close, self._sock.close):
            try:
                closer()
            except OSError:
                pass
