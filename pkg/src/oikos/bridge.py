"""WebSocket session server: one controlling client steers a live session
while any number of observers watch the streaming state.

Transport
---------
TCP.  A client opens a standard HTTP/1.1 WebSocket upgrade (RFC 6455
framing, masked client frames, text frames only).  Plain GET requests
without an upgrade header are answered from the optional static asset
directory, so a browser console can be hosted from the same port.

Every WebSocket frame carries one UTF-8 JSON message::

    {"type": <str>, "seq": <int>, "payload": <object>}

``seq`` counts each sender's own messages from 1; messages on one
connection are strictly FIFO.  Floats inside digest-bearing payloads
(snapshots, deltas, recorded actions) travel as 16-hex-digit IEEE-754
strings; plain decimal numbers appear only in display-grade fields such as
the autoplay rate.

Client to server
----------------
``hello``           ``{"protocol": "oikos/1", "role": "controller"|"observer"}``
                    — must be the first message on the connection.
``action``          ``{"actions": [<encoded action>, ...]}`` or
                    ``{"op": "autoplay", "rate": <steps per second>}``
                    — controller only; every action message is acknowledged.
``record_control``  ``{"op": "start", "target": <path>}`` /
                    ``{"op": "stop"}`` / ``{"op": "mark", "label": <str>}``
                    — controller only.
``replay_control``  ``{"op": "verify", "source": <path>}`` — controller only.
``bye``             ``{}`` — clean goodbye.

Server to client
----------------
``attach``            role grant plus session identity: scene/taxonomy/initial
                      digests, task description, current step and digest, and
                      whether the session is recording.
``snapshot``          ``{"step", "digest", "state", "static"}`` — full resync,
                      sent right after ``attach`` and on every
                      ``SNAPSHOT_INTERVAL``-th step.
``delta``             ``{"step", "digest", "changes"}`` — minimal diff whose
                      fold over the previous state reproduces the new one.
``predicate_events``  ``{"step", "events", "success", "done"}`` — goal and
                      appearance flips, sent only on steps that have any.
``action``            ``{"ack", "step", "digest", "success", "done"}`` — the
                      acknowledgment for one client action message.
``record_control``    ``{"ack", "op", "recording", "step", ...}`` — ack.
``replay_control``    ``{"ack", "ok", ...}`` — verification outcome.
``error``             ``{"code", "reason"[, "ack"]}`` — ``Busy``,
                      ``BadRequest`` and ``SessionFinished`` keep the
                      connection open; ``ProtocolViolation`` closes it.
``bye``               ``{"reason"}`` followed by a close frame.

Session rules
-------------
* One controller at a time: a second controller ``hello`` is refused with
  ``Busy`` and closed.  When the controller drops, the session pauses (any
  autoplay stops) and a reconnecting controller resumes at the same step.
* The server never advances the session on its own.  It steps exactly once
  per controller ``action`` message, or Noop-steps at a controller-chosen
  autoplay rate until that rate is set back to zero.
* A controller with ``MAX_UNACKED_ACTIONS`` action messages in flight gets
  further ones refused with ``Busy``.
* Observers sending any session-mutating message are closed with
  ``ProtocolViolation``.
"""

from __future__ import annotations

import base64
import errno
import hashlib
import itertools
import json
import logging
import math
import mimetypes
import queue
import socket
import struct
import threading
from pathlib import Path
from typing import Any, Optional
from urllib.parse import unquote, urlsplit

from .constants import MAX_UNACKED_ACTIONS, PROTOCOL_VERSION, SNAPSHOT_INTERVAL
from .errors import (
    DigestMismatch,
    KernelError,
    LogCorrupt,
    PortInUse,
    ProtocolViolation,
    SessionFinished,
)
from .runtime import EpisodeWriter, Session, create_session, decode_action, replay
from .runtime import step as step_session
from .serialize import canonical_json, diff_states, static_payload, wire_state
from .taxonomy import Taxonomy
from .world import WorldConfig

__all__ = ["BridgeServer", "serve"]

logger = logging.getLogger(__name__)

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_MAX_FRAME_BYTES = 64 * 1024 * 1024
_MAX_HTTP_HEAD = 16 * 1024
_MAX_AUTOPLAY_RATE = 1000.0

OP_CONT, OP_TEXT, OP_BINARY, OP_CLOSE, OP_PING, OP_PONG = 0, 1, 2, 8, 9, 10

CLOSE_NORMAL = 1000
CLOSE_GOING_AWAY = 1001
CLOSE_PROTOCOL_ERROR = 1002
CLOSE_TRY_AGAIN = 1013


# --- frame primitives -------------------------------------------------------------


class _SockReader:
    """recv() with a pushback buffer for bytes read past the HTTP head."""

    def __init__(self, sock: socket.socket, initial: bytes = b""):
        self.sock = sock
        self._buf = bytearray(initial)

    def read(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self.sock.recv(max(4096, n - len(self._buf)))
            if not chunk:
                raise ConnectionError("connection closed mid-frame")
            self._buf += chunk
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out


def _read_frame(reader: _SockReader) -> tuple[int, bool, bytes]:
    """Return (opcode, fin, unmasked payload) for the next client frame."""
    head = reader.read(2)
    if head[0] & 0x70:
        raise ProtocolViolation("reserved frame bits set")
    fin = bool(head[0] & 0x80)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", reader.read(2))
    elif length == 127:
        (length,) = struct.unpack(">Q", reader.read(8))
    if length > _MAX_FRAME_BYTES:
        raise ProtocolViolation(f"frame of {length} bytes exceeds the limit")
    if not masked:
        raise ProtocolViolation("client frames must be masked")
    key = reader.read(4)
    data = bytearray(reader.read(length))
    for i in range(len(data)):
        data[i] ^= key[i & 3]
    return opcode, fin, bytes(data)


def _frame_bytes(opcode: int, payload: bytes) -> bytes:
    n = len(payload)
    if n < 126:
        head = struct.pack(">BB", 0x80 | opcode, n)
    elif n < 1 << 16:
        head = struct.pack(">BBH", 0x80 | opcode, 126, n)
    else:
        head = struct.pack(">BBQ", 0x80 | opcode, 127, n)
    return head + payload


def _parse_message(raw: str) -> dict[str, Any]:
    try:
        msg = json.loads(raw)
    except ValueError as exc:
        raise ProtocolViolation(f"frame is not valid JSON: {exc}") from None
    if (not isinstance(msg, dict) or not isinstance(msg.get("type"), str)
            or not isinstance(msg.get("seq"), int)
            or not isinstance(msg.get("payload"), dict)):
        raise ProtocolViolation(
            "every message needs a string type, an integer seq and an object payload")
    return msg


# --- per-connection state ---------------------------------------------------------


class _Client:
    _ids = itertools.count(1)

    def __init__(self, sock: socket.socket, remainder: bytes = b""):
        self.sock = sock
        self.reader = _SockReader(sock, remainder)
        self.id = next(_Client._ids)
        self.role: Optional[str] = None  # granted by the session thread
        self.alive = True
        self._seq = 0
        self._io_lock = threading.Lock()
        self.pending = 0  # action messages awaiting acknowledgment
        self.pending_lock = threading.Lock()

    def send(self, mtype: str, payload: dict[str, Any]) -> bool:
        """Send one message; returns False (and goes dead) on a broken pipe."""
        try:
            with self._io_lock:
                self._seq += 1
                body = canonical_json(
                    {"payload": payload, "seq": self._seq, "type": mtype})
                self.sock.sendall(_frame_bytes(OP_TEXT, body.encode()))
            return True
        except OSError:
            self.alive = False
            return False

    def send_raw(self, opcode: int, payload: bytes) -> None:
        try:
            with self._io_lock:
                self.sock.sendall(_frame_bytes(opcode, payload))
        except OSError:
            self.alive = False

    def close(self, code: int, reason: str = "") -> None:
        if self.alive:
            self.send_raw(OP_CLOSE, struct.pack(">H", code) + reason.encode()[:120])
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


# --- session thread ---------------------------------------------------------------


class _SessionLoop(threading.Thread):
    """Sole owner of the session: every mutation arrives through its queue."""

    def __init__(self, server: "BridgeServer"):
        super().__init__(name="oikos-session", daemon=True)
        self.server = server
        self.session: Session = server.session
        self.queue: "queue.Queue[tuple]" = queue.Queue()
        self.clients: list[_Client] = []
        self.controller: Optional[_Client] = None
        self.autoplay_rate = 0.0
        self._prev_wire = wire_state(self.session.world, self.session.rng)

    # -- thread body --

    def run(self) -> None:
        while True:
            timeout = None
            if (self.autoplay_rate > 0 and self.controller is not None
                    and not self.session.done):
                timeout = 1.0 / self.autoplay_rate
            try:
                cmd = self.queue.get(timeout=timeout)
            except queue.Empty:
                self._advance([], None, None)
                continue
            kind = cmd[0]
            if kind == "shutdown":
                self._shutdown()
                return
            try:
                if kind == "attach":
                    self._attach(cmd[1], cmd[2])
                elif kind == "action":
                    self._action(cmd[1], cmd[2])
                elif kind == "record_control":
                    self._record_control(cmd[1], cmd[2])
                elif kind == "replay_control":
                    self._replay_control(cmd[1], cmd[2])
                elif kind == "detach":
                    self._detach(cmd[1])
            except Exception:
                logger.exception("bridge command %r failed", kind)

    # -- helpers --

    def _recording(self) -> bool:
        writer = self.session.writer
        return writer is not None and not writer.closed

    def _broadcast(self, mtype: str, payload: dict[str, Any]) -> None:
        for client in list(self.clients):
            if not client.send(mtype, payload):
                self._detach(client)

    def _snapshot_payload(self) -> dict[str, Any]:
        return {
            "digest": self.session.last_digest,
            "state": self._prev_wire,
            "static": static_payload(self.session.world),
            "step": self.session.step_index,
        }

    def _violation(self, client: _Client, reason: str) -> None:
        client.send("error", {"code": "ProtocolViolation", "reason": reason})
        client.close(CLOSE_PROTOCOL_ERROR, reason)
        self._detach(client)

    # -- command handlers --

    def _attach(self, client: _Client, role: str) -> None:
        if role == "controller":
            if self.controller is not None and self.controller.alive:
                client.send("error", {
                    "code": "Busy",
                    "reason": "a controlling client is already attached",
                })
                client.send("bye", {"reason": "controller slot taken"})
                client.close(CLOSE_TRY_AGAIN, "controller slot taken")
                return
            self.controller = client
        client.role = role
        self.clients.append(client)
        session = self.session
        client.send("attach", {
            "digest": session.last_digest,
            "done": session.done,
            "initial_digest": session.header["initial_digest"],
            "protocol": PROTOCOL_VERSION,
            "recording": self._recording(),
            "role": role,
            "scene_digest": session.header["scene_digest"],
            "seed": session.header["seed"],
            "step": session.step_index,
            "success": session.success,
            "task": session.header["task"],
            "taxonomy_digest": session.header["taxonomy_digest"],
        })
        client.send("snapshot", self._snapshot_payload())

    def _action(self, client: _Client, msg: dict[str, Any]) -> None:
        with client.pending_lock:
            client.pending -= 1
        if client is not self.controller:
            self._violation(client, "only the controlling client may act")
            return
        payload = msg["payload"]
        if payload.get("op") == "autoplay":
            self._set_autoplay(client, msg)
            return
        try:
            actions = [decode_action(a) for a in payload.get("actions", [])]
        except (KernelError, KeyError, TypeError, ValueError) as exc:
            client.send("error", {"ack": msg["seq"], "code": "BadRequest",
                                  "reason": f"undecodable action: {exc}"})
            return
        self._advance(actions, client, msg["seq"])

    def _set_autoplay(self, client: _Client, msg: dict[str, Any]) -> None:
        rate = msg["payload"].get("rate", 0)
        if (not isinstance(rate, (int, float)) or isinstance(rate, bool)
                or not math.isfinite(rate) or rate < 0):
            client.send("error", {"ack": msg["seq"], "code": "BadRequest",
                                  "reason": "autoplay rate must be a finite number >= 0"})
            return
        self.autoplay_rate = min(float(rate), _MAX_AUTOPLAY_RATE)
        session = self.session
        client.send("action", {
            "ack": msg["seq"],
            "autoplay": self.autoplay_rate != 0.0,
            "digest": session.last_digest,
            "done": session.done,
            "step": session.step_index,
            "success": session.success,
        })

    def _advance(self, actions: list, ack_client: Optional[_Client],
                 ack_seq: Optional[int]) -> None:
        session = self.session
        if session.done:
            self.autoplay_rate = 0.0
            if ack_client is not None:
                ack_client.send("error", {
                    "ack": ack_seq, "code": "SessionFinished",
                    "reason": f"session finished at step {session.step_index}",
                })
            return
        try:
            result = step_session(session, actions)
        except SessionFinished:
            self.autoplay_rate = 0.0
            return
        new_wire = wire_state(session.world, session.rng)
        if result.step_index % SNAPSHOT_INTERVAL == 0:
            self._prev_wire = new_wire
            self._broadcast("snapshot", self._snapshot_payload())
        else:
            changes = diff_states(self._prev_wire, new_wire)
            self._prev_wire = new_wire
            self._broadcast("delta", {
                "changes": changes,
                "digest": result.digest,
                "step": result.step_index,
            })
        if result.events:
            self._broadcast("predicate_events", {
                "done": result.done,
                "events": result.events,
                "step": result.step_index,
                "success": result.success,
            })
        if ack_client is not None:
            ack_client.send("action", {
                "ack": ack_seq,
                "digest": result.digest,
                "done": result.done,
                "step": result.step_index,
                "success": result.success,
            })
        if session.done:
            self.autoplay_rate = 0.0

    def _record_control(self, client: _Client, msg: dict[str, Any]) -> None:
        if client is not self.controller:
            self._violation(client, "only the controlling client may control recording")
            return
        payload, seq = msg["payload"], msg["seq"]
        op = payload.get("op")
        session = self.session

        def refuse(reason: str) -> None:
            client.send("error", {"ack": seq, "code": "BadRequest", "reason": reason})

        if op == "start":
            target = payload.get("target")
            if not isinstance(target, str) or not target:
                refuse("record start needs a target path")
                return
            if self._recording():
                refuse("already recording")
                return
            if session.step_index != 0:
                refuse("recording must start before the first step")
                return
            try:
                writer = EpisodeWriter(target)
            except OSError as exc:
                refuse(f"cannot open {target!r}: {exc}")
                return
            writer.write_header(session.header)
            session.writer = writer
            client.send("record_control", {
                "ack": seq, "op": "start", "recording": True,
                "step": session.step_index, "target": target,
            })
        elif op == "stop":
            if not self._recording():
                refuse("not recording")
                return
            session.close_log()
            session.writer = None
            client.send("record_control", {
                "ack": seq, "final_digest": session.last_digest, "op": "stop",
                "recording": False, "step": session.step_index,
                "success": session.success,
            })
        elif op == "mark":
            if not self._recording():
                refuse("not recording")
                return
            label = str(payload.get("label", ""))
            session.writer.write_mark(session.step_index, label)
            client.send("record_control", {
                "ack": seq, "label": label, "op": "mark", "recording": True,
                "step": session.step_index,
            })
        else:
            refuse(f"unknown record_control op {op!r}")

    def _replay_control(self, client: _Client, msg: dict[str, Any]) -> None:
        if client is not self.controller:
            self._violation(client, "only the controlling client may request replays")
            return
        payload, seq = msg["payload"], msg["seq"]
        if payload.get("op") != "verify":
            client.send("error", {"ack": seq, "code": "BadRequest",
                                  "reason": f"unknown replay_control op {payload.get('op')!r}"})
            return
        source = payload.get("source")
        if not isinstance(source, str) or not source:
            client.send("error", {"ack": seq, "code": "BadRequest",
                                  "reason": "replay verify needs a source path"})
            return
        try:
            result = replay(source, self.server.taxonomy,
                            config=self.server.config)
        except FileNotFoundError as exc:
            client.send("error", {"ack": seq, "code": "BadRequest",
                                  "reason": str(exc)})
        except DigestMismatch as exc:
            client.send("replay_control", {
                "ack": seq, "ok": False,
                "error": {"actual": exc.actual, "expected": exc.expected,
                          "kind": "DigestMismatch", "step": exc.step},
            })
        except LogCorrupt as exc:
            client.send("replay_control", {
                "ack": seq, "ok": False,
                "error": {"kind": "LogCorrupt", "reason": exc.reason},
            })
        else:
            client.send("replay_control", {
                "ack": seq, "final_digest": result.final_digest, "ok": True,
                "steps": result.steps, "success": result.success,
            })

    def _detach(self, client: _Client) -> None:
        if client in self.clients:
            self.clients.remove(client)
        if client is self.controller:
            self.controller = None
            self.autoplay_rate = 0.0  # the session pauses without its driver
        client.close(CLOSE_NORMAL)

    def _shutdown(self) -> None:
        for client in list(self.clients):
            client.send("bye", {"reason": "server shutting down"})
            client.close(CLOSE_GOING_AWAY, "server shutting down")
        self.clients.clear()
        self.controller = None
        self.session.close_log()


# --- server -----------------------------------------------------------------------


class BridgeServer:
    """Listening socket plus the session thread; one instance per session."""

    def __init__(self, session: Session, taxonomy: Taxonomy,
                 host: str = "127.0.0.1", port: int = 0,
                 static_dir=None, config: Optional[WorldConfig] = None):
        self.session = session
        self.taxonomy = taxonomy
        self.config = config
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
        except OSError as exc:
            listener.close()
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(port) from None
            raise
        listener.listen(16)
        self._listener = listener
        self.host, self.port = listener.getsockname()[:2]
        self._closed = False
        self._loop = _SessionLoop(self)
        self._loop.start()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="oikos-accept", daemon=True)
        self._accept_thread.start()

    # -- lifecycle --

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._listener.close()
        except OSError:
            pass
        self._loop.queue.put(("shutdown",))
        self._loop.join(timeout=5)

    def wait(self, timeout: Optional[float] = None) -> None:
        """Block until the session thread exits (i.e. the server is closed)."""
        self._loop.join(timeout)

    def __enter__(self) -> "BridgeServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- connection plumbing --

    def _accept_loop(self) -> None:
        while not self._closed:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._client_main, args=(sock, addr),
                             name=f"oikos-client-{addr[1]}", daemon=True).start()

    def _client_main(self, sock: socket.socket, addr) -> None:
        client: Optional[_Client] = None
        try:
            request = self._read_http_head(sock)
            if request is None:
                return
            method, target, headers, remainder = request
            if headers.get("upgrade", "").lower() != "websocket":
                self._serve_static(sock, method, target)
                return
            key = headers.get("sec-websocket-key")
            if method != "GET" or not key:
                sock.sendall(b"HTTP/1.1 400 Bad Request\r\n"
                             b"Connection: close\r\n\r\n")
                return
            accept = base64.b64encode(
                hashlib.sha1((key + _WS_GUID).encode()).digest()).decode()
            sock.sendall((
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n").encode())
            client = _Client(sock, remainder)
            self._client_messages(client)
        except ProtocolViolation as exc:
            if client is not None:
                client.send("error", {"code": "ProtocolViolation",
                                      "reason": exc.reason})
                client.close(CLOSE_PROTOCOL_ERROR, exc.reason)
        except (ConnectionError, OSError, TimeoutError):
            pass
        finally:
            if client is not None:
                self._loop.queue.put(("detach", client))
            else:
                try:
                    sock.close()
                except OSError:
                    pass

    def _client_messages(self, client: _Client) -> None:
        raw = self._next_text(client)
        if raw is None:
            return
        msg = _parse_message(raw)
        if msg["type"] != "hello":
            raise ProtocolViolation("the first message must be hello")
        payload = msg["payload"]
        if payload.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolViolation(
                f"unsupported protocol {payload.get('protocol')!r}; "
                f"this server speaks {PROTOCOL_VERSION}")
        role = payload.get("role", "observer")
        if role not in ("controller", "observer"):
            raise ProtocolViolation(f"unknown role {role!r}")
        self._loop.queue.put(("attach", client, role))

        while client.alive:
            raw = self._next_text(client)
            if raw is None:
                return
            msg = _parse_message(raw)
            mtype = msg["type"]
            if mtype == "bye":
                client.send("bye", {"reason": "goodbye"})
                client.close(CLOSE_NORMAL, "goodbye")
                return
            if mtype == "action":
                with client.pending_lock:
                    if client.pending >= MAX_UNACKED_ACTIONS:
                        busy = True
                    else:
                        busy = False
                        client.pending += 1
                if busy:
                    client.send("error", {
                        "ack": msg["seq"], "code": "Busy",
                        "reason": f"more than {MAX_UNACKED_ACTIONS} "
                                  "unacknowledged actions",
                    })
                    continue
                self._loop.queue.put(("action", client, msg))
            elif mtype in ("record_control", "replay_control"):
                self._loop.queue.put((mtype, client, msg))
            elif mtype == "hello":
                raise ProtocolViolation("duplicate hello")
            else:
                raise ProtocolViolation(f"unknown message type {mtype!r}")

    def _next_text(self, client: _Client) -> Optional[str]:
        """Next complete text message; None once the peer sent a close frame."""
        fragments: Optional[bytearray] = None
        while True:
            opcode, fin, data = _read_frame(client.reader)
            if opcode == OP_PING:
                client.send_raw(OP_PONG, data)
            elif opcode == OP_PONG:
                pass
            elif opcode == OP_CLOSE:
                client.close(CLOSE_NORMAL)
                return None
            elif opcode == OP_TEXT:
                if fragments is not None:
                    raise ProtocolViolation("new message before the last finished")
                if fin:
                    return data.decode("utf-8")
                fragments = bytearray(data)
            elif opcode == OP_CONT:
                if fragments is None:
                    raise ProtocolViolation("continuation frame without a start")
                fragments += data
                if fin:
                    return bytes(fragments).decode("utf-8")
            elif opcode == OP_BINARY:
                raise ProtocolViolation("binary frames are not part of the protocol")
            else:
                raise ProtocolViolation(f"unsupported opcode {opcode}")

    # -- plain HTTP (console assets) --

    def _read_http_head(self, sock: socket.socket):
        data = bytearray()
        while b"\r\n\r\n" not in data:
            if len(data) > _MAX_HTTP_HEAD:
                raise ProtocolViolation("oversized HTTP request head")
            chunk = sock.recv(4096)
            if not chunk:
                return None
            data += chunk
        head_bytes, remainder = bytes(data).split(b"\r\n\r\n", 1)
        lines = head_bytes.decode("latin-1").split("\r\n")
        parts = lines[0].split()
        if len(parts) != 3:
            raise ProtocolViolation("malformed HTTP request line")
        method, target = parts[0], parts[1]
        headers: dict[str, str] = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
        return method, target, headers, remainder

    def _serve_static(self, sock: socket.socket, method: str, target: str) -> None:
        def respond(status: str, body: bytes, ctype: str = "text/plain") -> None:
            sock.sendall((
                f"HTTP/1.1 {status}\r\n"
                f"Content-Type: {ctype}\r\n"
                f"Content-Length: {len(body)}\r\n"
                "Connection: close\r\n\r\n").encode() + body)

        if method != "GET":
            respond("405 Method Not Allowed", b"this endpoint only serves GET")
            return
        if self.static_dir is None:
            respond("404 Not Found", b"no static assets configured")
            return
        path = unquote(urlsplit(target).path)
        relative = path.lstrip("/") or "index.html"
        candidate = (self.static_dir / relative).resolve()
        if (self.static_dir not in candidate.parents
                and candidate != self.static_dir) or not candidate.is_file():
            respond("404 Not Found", b"not found")
            return
        ctype = mimetypes.guess_type(candidate.name)[0] or "application/octet-stream"
        respond("200 OK", candidate.read_bytes(), ctype)


def serve(task, taxonomy: Taxonomy, port: int = 8765, seed: int = 0,
          host: str = "127.0.0.1", record_to=None, scene=None,
          config: Optional[WorldConfig] = None, static_dir=None) -> BridgeServer:
    """Create a session for ``task`` and return a running server handle.

    The handle is already accepting connections; call ``close()`` (or use it
    as a context manager) to shut down, or ``wait()`` to block until then.
    Raises :class:`PortInUse` when the port is taken.
    """
    session = create_session(task, taxonomy, seed, scene=scene, config=config,
                             record_to=record_to)
    return BridgeServer(session, taxonomy, host=host, port=port,
                        static_dir=static_dir, config=config)
