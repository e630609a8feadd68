"""Line-delimited JSON socket service for operator consoles.

Every session event goes out as one JSON line; inbound lines are operator
commands that get validated, acknowledged, and forwarded to the driver loop.
Delivery to a slow client is lossy by design: each client has a bounded
outbound queue that drops oldest first and tells the client how many lines
it missed.  The persisted session log is never affected.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from collections import deque

from .session import CommandBridge, validate_command

PROTOCOL = {"format": "parmi-console", "version": 1}
DEFAULT_QUEUE_LIMIT = 1024


def _dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class _Client:
    def __init__(self, sock: socket.socket, limit: int):
        self.sock = sock
        self.queue: deque[str] = deque(maxlen=limit)
        self.dropped = 0
        self.lock = threading.Lock()
        self.ready = threading.Event()
        self.alive = True
        self.inbound_seq = 0

    def push(self, line: str) -> None:
        with self.lock:
            if len(self.queue) == self.queue.maxlen:
                self.dropped += 1
            self.queue.append(line)
        self.ready.set()

    def pop_batch(self) -> list[str]:
        with self.lock:
            dropped, self.dropped = self.dropped, 0
            out = list(self.queue)
            self.queue.clear()
            self.ready.clear()
        if dropped:
            out.insert(0, _dumps({"kind": "dropped", "count": dropped}))
        return out


class ConsoleServer:
    """Accepts console clients and bridges them to a session's event stream."""

    def __init__(self, host: str, port: int, bridge: CommandBridge,
                 queue_limit: int = DEFAULT_QUEUE_LIMIT):
        self.bridge = bridge
        self.queue_limit = queue_limit
        self._clients: list[_Client] = []
        self._lock = threading.Lock()
        self._closing = threading.Event()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.address = self._sock.getsockname()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    # -- engine side ----------------------------------------------------------

    def broadcast(self, line: str) -> None:
        """Queue one event line to every connected client (never blocks)."""
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            client.push(line)

    def has_clients(self) -> bool:
        with self._lock:
            return bool(self._clients)

    def wait_for_client(self, timeout: float = 30.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.has_clients():
                return True
            time.sleep(0.02)
        return False

    def close(self, drain_seconds: float = 2.0) -> None:
        self._closing.set()
        try:
            self._sock.close()
        except OSError:
            pass
        with self._lock:
            clients = list(self._clients)
        deadline = time.monotonic() + drain_seconds
        for client in clients:  # let writer threads flush the tail
            while len(client.queue) and time.monotonic() < deadline:
                time.sleep(0.01)
        with self._lock:
            clients, self._clients = list(self._clients), []
        for client in clients:
            client.alive = False
            client.ready.set()
            try:
                client.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            client.sock.close()

    # -- socket side ------------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._closing.is_set():
            try:
                sock, _ = self._sock.accept()
            except OSError:
                return
            client = _Client(sock, self.queue_limit)
            with self._lock:
                self._clients.append(client)
            client.push(_dumps(PROTOCOL))
            threading.Thread(target=self._writer, args=(client,), daemon=True).start()
            threading.Thread(target=self._reader, args=(client,), daemon=True).start()

    def _drop_client(self, client: _Client) -> None:
        client.alive = False
        client.ready.set()
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)
        try:
            client.sock.close()
        except OSError:
            pass

    def _writer(self, client: _Client) -> None:
        while client.alive:
            client.ready.wait(timeout=0.2)
            batch = client.pop_batch()
            if not batch:
                continue
            try:
                client.sock.sendall(("\n".join(batch) + "\n").encode("utf-8"))
            except OSError:
                self._drop_client(client)
                return

    def _reader(self, client: _Client) -> None:
        buf = b""
        while client.alive:
            try:
                chunk = client.sock.recv(4096)
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                raw, buf = buf.split(b"\n", 1)
                if raw.strip():
                    self._handle_line(client, raw)
        self._drop_client(client)

    def _handle_line(self, client: _Client, raw: bytes) -> None:
        client.inbound_seq += 1
        seq = client.inbound_seq
        try:
            doc = json.loads(raw.decode("utf-8"))
            error = validate_command(doc)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            doc, error = None, f"malformed command: {exc}"
        if error is not None:
            client.push(_dumps({"reply": "error", "seq": seq, "message": error}))
            return
        self.bridge.submit(doc)
        client.push(_dumps({"reply": "ok", "seq": seq, "cmd": doc["cmd"]}))
