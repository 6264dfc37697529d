"""Line-protocol adapter between the test engine and a SUT.

One UTF-8 JSON object per line in each direction::

    -> {"markers": [[x, y], ...]}
    <- {"found": true, "indexes": [i, j, k]}   or   {"found": false}
    <- {"error": "bad_marker_count" | "malformed" | "out_of_frame"}

The server answers with the reference find algorithm over TCP or
stdin/stdout. The clients pipeline requests in windows and match responses
by order, which is safe because the protocol is strictly one line in, one
line out.
"""

from __future__ import annotations

import json
import logging
import shlex
import socket
import socketserver
import subprocess
import sys
import threading
from urllib.parse import urlparse

from .errors import SutProtocolError, TransportError
from .geometry import MAX_MARKERS, MIN_MARKERS, MarkerSample, in_frame
from .sut import PcsOutput, ReferenceSut, SutConfig, find_true_markers

log = logging.getLogger(__name__)

WINDOW = 256


def _parse_markers(obj):
    if not isinstance(obj, dict) or not isinstance(obj.get("markers"), list):
        return None
    pts = []
    for p in obj["markers"]:
        if not isinstance(p, list) or len(p) != 2:
            return None
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in p):
            return None
        pts.append((p[0], p[1]))
    return pts


def handle_request(line: str, config: SutConfig) -> dict:
    try:
        obj = json.loads(line)
    except ValueError:
        return {"error": "malformed"}
    pts = _parse_markers(obj)
    if pts is None:
        return {"error": "malformed"}
    if not MIN_MARKERS <= len(pts) <= MAX_MARKERS:
        return {"error": "bad_marker_count"}
    if not all(in_frame(p) for p in pts):
        return {"error": "out_of_frame"}
    return find_true_markers(pts, config).to_json()


def _encode(obj) -> bytes:
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def serve_stream(config: SutConfig, rfile, wfile) -> None:
    """Answer requests from a binary line stream until EOF."""
    for raw in rfile:
        line = raw.decode("utf-8", errors="replace").strip()
        if not line:
            continue
        wfile.write(_encode(handle_request(line, config)))
        wfile.flush()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        try:
            serve_stream(self.server.sut_config, self.rfile, self.wfile)
        except (ConnectionError, BrokenPipeError):
            log.debug("client %s went away", self.client_address)


class AdapterServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, config: SutConfig):
        super().__init__(address, _Handler)
        self.sut_config = config


def make_server(config: SutConfig, host: str = "127.0.0.1", port: int = 0) -> AdapterServer:
    return AdapterServer((host, port), config)


def serve_adapter(config: SutConfig, endpoint: str = "stdio") -> None:
    """Serve until interrupted. ``endpoint`` is ``stdio`` or ``tcp://host:port``."""
    if endpoint == "stdio":
        serve_stream(config, sys.stdin.buffer, sys.stdout.buffer)
        return
    host, port = parse_tcp(endpoint)
    with make_server(config, host, port) as server:
        log.info("adapter listening on %s:%d", *server.server_address[:2])
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


def parse_tcp(endpoint: str) -> tuple[str, int]:
    u = urlparse(endpoint)
    if u.scheme != "tcp" or not u.hostname or u.port is None:
        raise ValueError(f"expected tcp://host:port, got {endpoint!r}")
    return u.hostname, u.port


def _decode_response(line: bytes) -> PcsOutput:
    if not line:
        raise TransportError("SUT closed the connection")
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise SutProtocolError(f"unparsable response: {line[:80]!r}") from exc
    if "error" in obj:
        raise SutProtocolError(f"SUT error: {obj['error']}")
    try:
        return PcsOutput.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise SutProtocolError(f"bad response {obj!r}") from exc


def _request(sample) -> bytes:
    markers = sample.markers if isinstance(sample, MarkerSample) else sample
    return _encode({"markers": [[int(m[0]), int(m[1])] for m in markers]})


def _exchange(wfile, rfile, samples) -> list[PcsOutput]:
    out = []
    for lo in range(0, len(samples), WINDOW):
        window = samples[lo:lo + WINDOW]
        wfile.write(b"".join(_request(s) for s in window))
        wfile.flush()
        for _ in window:
            out.append(_decode_response(rfile.readline()))
    return out


class TcpSut:
    """Client for a remote adapter; one connection per calling thread."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.host, self.port, self.timeout = host, port, timeout
        self.name = f"tcp://{host}:{port}"
        self._local = threading.local()
        self._conns = []
        self._lock = threading.Lock()

    @classmethod
    def from_url(cls, endpoint: str, timeout: float = 30.0) -> "TcpSut":
        return cls(*parse_tcp(endpoint), timeout=timeout)

    def _conn(self):
        conn = getattr(self._local, "conn", None)
        if conn is None:
            try:
                sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            except OSError as exc:
                raise TransportError(f"cannot reach SUT at {self.name}: {exc}") from exc
            conn = (sock, sock.makefile("rb"), sock.makefile("wb"))
            self._local.conn = conn
            with self._lock:
                self._conns.append(conn)
        return conn

    def find_many(self, samples) -> list[PcsOutput]:
        samples = list(samples)
        _, rfile, wfile = self._conn()
        try:
            return _exchange(wfile, rfile, samples)
        except OSError as exc:
            self._local.conn = None
            raise TransportError(f"connection to {self.name} failed: {exc}") from exc

    def find(self, sample) -> PcsOutput:
        return self.find_many([sample])[0]

    def close(self):
        with self._lock:
            for sock, rfile, wfile in self._conns:
                for f in (rfile, wfile, sock):
                    try:
                        f.close()
                    except OSError:
                        pass
            self._conns.clear()
        self._local = threading.local()


class ProcessSut:
    """Client for an adapter spoken over a child process's stdin/stdout."""

    def __init__(self, command):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.name = "exec:" + " ".join(self.argv)
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise TransportError(f"cannot start SUT {self.argv}: {exc}") from exc

    def find_many(self, samples) -> list[PcsOutput]:
        with self._lock:
            try:
                return _exchange(self._proc.stdin, self._proc.stdout, list(samples))
            except OSError as exc:
                raise TransportError(f"SUT process failed: {exc}") from exc

    def find(self, sample) -> PcsOutput:
        return self.find_many([sample])[0]

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


def open_sut(spec: str, config: SutConfig | None = None):
    """``builtin``, ``tcp://host:port`` or ``exec:<command line>``."""
    if spec == "builtin":
        return ReferenceSut(config)
    if spec.startswith("tcp://"):
        return TcpSut.from_url(spec)
    if spec.startswith("exec:"):
        return ProcessSut(spec[len("exec:"):])
    raise ValueError(f"unknown SUT {spec!r}; use builtin, tcp://host:port or exec:<cmd>")
