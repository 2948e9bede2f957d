"""Loopback tests for the WebSocket session server.

A tiny RFC 6455 client (fixed zero mask key, so masked payload bytes equal
the plain bytes) exercises the full wire protocol against a real server on
an ephemeral port: handshake, role rules, action acks, delta folding,
backpressure, reconnect, recording and replay verification.
"""

from __future__ import annotations

import base64
import json
import socket
import struct
import time

import pytest

from oikos.assets import task_path
from oikos.bridge import serve
from oikos.errors import PortInUse
from oikos.policies import POLICIES
from oikos.runtime import (
    Noop,
    create_session,
    encode_action,
    load_task,
    read_log,
    replay,
    step,
)
from oikos.serialize import canonical_json, fold_delta, state_digest


def _client_frame(opcode: int, payload: bytes) -> bytes:
    n = len(payload)
    if n < 126:
        head = struct.pack(">BB", 0x80 | opcode, 0x80 | n)
    elif n < 1 << 16:
        head = struct.pack(">BBH", 0x80 | opcode, 0x80 | 126, n)
    else:
        head = struct.pack(">BBQ", 0x80 | opcode, 0x80 | 127, n)
    return head + b"\x00\x00\x00\x00" + payload


class WsClient:
    """Blocking loopback client; every helper asserts protocol shape."""

    def __init__(self, port: int, host: str = "127.0.0.1", timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self._buf = bytearray()
        key = base64.b64encode(b"0123456789abcdef").decode()
        self.sock.sendall((
            f"GET / HTTP/1.1\r\nHost: {host}:{port}\r\n"
            "Upgrade: websocket\r\nConnection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
        ).encode())
        head = self._read_until(b"\r\n\r\n")
        status = head.split(b"\r\n", 1)[0]
        assert b" 101 " in status, status
        self.seq = 0

    # -- raw transport --

    def _read_until(self, marker: bytes) -> bytes:
        while marker not in self._buf:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ConnectionError("server closed the connection")
            self._buf += chunk
        idx = self._buf.index(marker) + len(marker)
        out = bytes(self._buf[:idx])
        del self._buf[:idx]
        return out

    def _read_exact(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise ConnectionError("server closed the connection")
            self._buf += chunk
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def read_frame(self) -> tuple[int, bytes]:
        head = self._read_exact(2)
        opcode = head[0] & 0x0F
        assert not head[1] & 0x80, "server frames must be unmasked"
        length = head[1] & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", self._read_exact(2))
        elif length == 127:
            (length,) = struct.unpack(">Q", self._read_exact(8))
        return opcode, self._read_exact(length)

    # -- messages --

    def send(self, mtype: str, payload: dict) -> int:
        self.seq += 1
        body = json.dumps({"type": mtype, "seq": self.seq, "payload": payload})
        self.sock.sendall(_client_frame(1, body.encode()))
        return self.seq

    def send_raw_text(self, text: str) -> None:
        self.sock.sendall(_client_frame(1, text.encode()))

    def recv(self) -> dict:
        while True:
            opcode, data = self.read_frame()
            if opcode == 1:
                return json.loads(data.decode())
            if opcode == 8:
                code = struct.unpack(">H", data[:2])[0] if len(data) >= 2 else 1005
                return {"type": "__close__", "seq": -1,
                        "payload": {"code": code}}
            if opcode == 9:
                self.sock.sendall(_client_frame(10, data))

    def recv_until(self, mtype: str, limit: int = 2000) -> tuple[dict, list[dict]]:
        skipped: list[dict] = []
        for _ in range(limit):
            msg = self.recv()
            if msg["type"] == mtype:
                return msg, skipped
            assert msg["type"] != "__close__", f"closed while waiting for {mtype}"
            skipped.append(msg)
        raise AssertionError(f"no {mtype} message within {limit} messages")

    def expect_silence(self, seconds: float = 0.35) -> None:
        self.sock.settimeout(seconds)
        try:
            self.recv()
        except (TimeoutError, socket.timeout):
            return
        finally:
            self.sock.settimeout(10.0)
        raise AssertionError("expected no traffic")

    def drain_until_quiet(self, quiet: float = 0.4) -> list[dict]:
        got: list[dict] = []
        self.sock.settimeout(quiet)
        try:
            while True:
                got.append(self.recv())
        except (TimeoutError, socket.timeout):
            return got
        finally:
            self.sock.settimeout(10.0)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


@pytest.fixture
def bridge(taxonomy):
    servers = []

    def make(task_name: str = "grasping_book", seed: int = 11, **kw):
        task = load_task(task_path(task_name))
        server = serve(task, taxonomy, port=kw.pop("port", 0), seed=seed, **kw)
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.close()


def _connect(server, role: str) -> tuple[WsClient, dict, dict]:
    client = WsClient(server.port)
    client.send("hello", {"protocol": "oikos/1", "role": role})
    attach = client.recv()
    snapshot = client.recv()
    assert attach["type"] == "attach", attach
    assert snapshot["type"] == "snapshot", snapshot
    return client, attach["payload"], snapshot["payload"]


def _reconnect_controller(server, retries: int = 40) -> tuple[WsClient, dict, dict]:
    """Retry until the server has processed the previous controller's death."""
    for _ in range(retries):
        client = WsClient(server.port)
        client.send("hello", {"protocol": "oikos/1", "role": "controller"})
        first = client.recv()
        if first["type"] == "attach":
            snapshot = client.recv()
            assert snapshot["type"] == "snapshot"
            return client, first["payload"], snapshot["payload"]
        client.close()
        time.sleep(0.05)
    raise AssertionError("controller slot never freed")


def _noop_wire() -> dict:
    return {"actions": [encode_action(Noop())]}


# --- handshake and identity -------------------------------------------------------


def test_attach_carries_session_identity(bridge, taxonomy):
    server = bridge(seed=7)
    local = create_session(load_task(task_path("grasping_book")), taxonomy, seed=7)
    client, attach, snap = _connect(server, "controller")
    try:
        assert attach["protocol"] == "oikos/1"
        assert attach["role"] == "controller"
        assert attach["step"] == 0
        assert attach["digest"] == local.initial_digest
        assert attach["scene_digest"] == local.header["scene_digest"]
        assert attach["taxonomy_digest"] == taxonomy.digest
        assert attach["task"]["id"] == "grasping_book"
        assert attach["recording"] is False

        assert snap["step"] == 0
        assert snap["digest"] == local.initial_digest
        assert state_digest(snap["state"]) == snap["digest"]
        assert "book_1" in snap["state"]["objects"]
        assert snap["static"]["rooms"], "static payload must describe rooms"
        models = snap["static"]["models"]
        assert all(o["model"] in models for o in snap["state"]["objects"].values())
    finally:
        client.close()


def test_wrong_protocol_version_is_refused(bridge):
    server = bridge()
    client = WsClient(server.port)
    try:
        client.send("hello", {"protocol": "oikos/2", "role": "controller"})
        msg = client.recv()
        assert msg["type"] == "error"
        assert msg["payload"]["code"] == "ProtocolViolation"
        assert client.recv()["type"] == "__close__"
    finally:
        client.close()


def test_first_message_must_be_hello(bridge):
    server = bridge()
    client = WsClient(server.port)
    try:
        client.send("action", _noop_wire())
        msg = client.recv()
        assert msg["type"] == "error"
        assert msg["payload"]["code"] == "ProtocolViolation"
        assert client.recv()["type"] == "__close__"
    finally:
        client.close()


def test_malformed_frame_closes_the_connection(bridge):
    server = bridge()
    client = WsClient(server.port)
    try:
        client.send_raw_text("this is not json")
        msg = client.recv()
        assert msg["type"] == "error"
        assert msg["payload"]["code"] == "ProtocolViolation"
        assert client.recv()["type"] == "__close__"
    finally:
        client.close()


# --- roles ------------------------------------------------------------------------


def test_observer_action_is_a_protocol_violation(bridge):
    server = bridge()
    controller, _, _ = _connect(server, "controller")
    observer, attach, _ = _connect(server, "observer")
    try:
        assert attach["role"] == "observer"
        observer.send("action", _noop_wire())
        msg, _ = observer.recv_until("error")
        assert msg["payload"]["code"] == "ProtocolViolation"
        assert observer.recv()["type"] == "__close__"

        # the controller is unaffected
        seq = controller.send("action", _noop_wire())
        ack, _ = controller.recv_until("action")
        assert ack["payload"]["ack"] == seq
        assert ack["payload"]["step"] == 1
    finally:
        controller.close()
        observer.close()


def test_observer_record_control_is_a_protocol_violation(bridge, tmp_path):
    server = bridge()
    _controller, _, _ = _connect(server, "controller")
    observer, _, _ = _connect(server, "observer")
    try:
        observer.send("record_control",
                      {"op": "start", "target": str(tmp_path / "x.log")})
        msg, _ = observer.recv_until("error")
        assert msg["payload"]["code"] == "ProtocolViolation"
        assert observer.recv()["type"] == "__close__"
    finally:
        _controller.close()
        observer.close()


def test_second_controller_is_refused_busy(bridge):
    server = bridge()
    first, _, _ = _connect(server, "controller")
    second = WsClient(server.port)
    try:
        second.send("hello", {"protocol": "oikos/1", "role": "controller"})
        err = second.recv()
        assert err["type"] == "error"
        assert err["payload"]["code"] == "Busy"
        bye = second.recv()
        assert bye["type"] == "bye"
        assert second.recv()["type"] == "__close__"

        # the seated controller still drives the session
        seq = first.send("action", _noop_wire())
        ack, _ = first.recv_until("action")
        assert ack["payload"]["ack"] == seq
    finally:
        first.close()
        second.close()


# --- stepping, determinism, events ------------------------------------------------


def test_scripted_policy_mirrors_over_the_wire(bridge, taxonomy):
    server = bridge("grasping_book", seed=3)
    local = create_session(load_task(task_path("grasping_book")), taxonomy, seed=3)
    client, attach, _ = _connect(server, "controller")
    try:
        assert attach["digest"] == local.initial_digest
        policy = POLICIES["grasping_book"](local)
        goal_events = []
        for actions in policy:
            seq = client.send("action", {"actions": [encode_action(a) for a in actions]})
            mine = step(local, actions)
            ack, skipped = client.recv_until("action")
            assert ack["payload"]["ack"] == seq
            assert ack["payload"]["step"] == mine.step_index
            assert ack["payload"]["digest"] == mine.digest
            for msg in skipped:
                if msg["type"] == "predicate_events":
                    goal_events += [e for e in msg["payload"]["events"]
                                    if e["kind"] == "goal"]
            if local.done:
                break
        assert local.success, "mirror session must reach the goal"
        assert ack["payload"]["success"] is True
        assert ack["payload"]["done"] is True
        assert {"kind": "goal", "condition": "InHandOfAgent(book_1)=true",
                "value": True} in goal_events

        seq = client.send("action", _noop_wire())
        err, _ = client.recv_until("error")
        assert err["payload"]["code"] == "SessionFinished"
        assert err["payload"]["ack"] == seq
    finally:
        client.close()


def test_observer_fold_of_deltas_tracks_every_digest(bridge):
    server = bridge("grasping_book", seed=5)
    controller, _, _ = _connect(server, "controller")
    observer, _, snap = _connect(server, "observer")
    try:
        state = snap["state"]
        snapshots = 0
        for step_no in range(1, 126):
            controller.send("action", _noop_wire())
            controller.recv_until("action")
            msg = observer.recv()
            assert msg["payload"]["step"] == step_no
            if msg["type"] == "snapshot":
                snapshots += 1
                assert step_no == 120, "resync anchors arrive every 120th step"
                # The anchor replaces the delta for this step, so the fold is
                # one step behind it; adopting it must keep the chain exact.
                state = msg["payload"]["state"]
            else:
                assert msg["type"] == "delta"
                state = fold_delta(state, msg["payload"]["changes"])
            assert state_digest(state) == msg["payload"]["digest"]
        assert snapshots == 1

        # a fresh observer's join snapshot equals the folded state, byte for byte
        late, _, late_snap = _connect(server, "observer")
        late.close()
        assert late_snap["step"] == 125
        assert canonical_json(late_snap["state"]) == canonical_json(state)
    finally:
        controller.close()
        observer.close()


def test_flooding_actions_hits_busy_backpressure(bridge):
    server = bridge()
    client, _, _ = _connect(server, "controller")
    try:
        sent = [client.send("action", _noop_wire()) for _ in range(40)]
        outcomes: dict[int, str] = {}
        while len(outcomes) < len(sent):
            msg = client.recv()
            if msg["type"] == "action":
                outcomes[msg["payload"]["ack"]] = "ack"
            elif msg["type"] == "error":
                assert msg["payload"]["code"] == "Busy"
                outcomes[msg["payload"]["ack"]] = "busy"
        assert set(outcomes) == set(sent)
        counts = {"ack": 0, "busy": 0}
        for verdict in outcomes.values():
            counts[verdict] += 1
        assert counts["busy"] >= 1, "flood must trip the unacked-action limit"
        assert counts["ack"] >= 1, "some actions must still be served"

        # once the backlog drains, the controller is served again
        seq = client.send("action", _noop_wire())
        ack, _ = client.recv_until("action")
        assert ack["payload"]["ack"] == seq
    finally:
        client.close()


def test_autoplay_advances_and_pauses(bridge):
    server = bridge()
    controller, _, _ = _connect(server, "controller")
    observer, _, _ = _connect(server, "observer")
    try:
        seq = controller.send("action", {"op": "autoplay", "rate": 120})
        ack, _ = controller.recv_until("action")
        assert ack["payload"]["ack"] == seq
        assert ack["payload"]["autoplay"] is True

        first = observer.recv()
        second = observer.recv()
        assert first["type"] in ("delta", "snapshot")
        assert second["payload"]["step"] == first["payload"]["step"] + 1

        controller.send("action", {"op": "autoplay", "rate": 0})
        controller.recv_until("action")
        observer.drain_until_quiet()
        observer.expect_silence()

        # autoplay dies with its controller
        controller.send("action", {"op": "autoplay", "rate": 120})
        controller.recv_until("action")
        assert observer.recv()["type"] in ("delta", "snapshot")
        controller.close()
        observer.drain_until_quiet()
        observer.expect_silence()
    finally:
        controller.close()
        observer.close()


def test_bad_autoplay_rate_is_refused(bridge):
    server = bridge()
    client, _, _ = _connect(server, "controller")
    try:
        seq = client.send("action", {"op": "autoplay", "rate": -3})
        err, _ = client.recv_until("error")
        assert err["payload"]["code"] == "BadRequest"
        assert err["payload"]["ack"] == seq
    finally:
        client.close()


def test_controller_reconnect_resumes_at_the_same_step(bridge):
    server = bridge()
    observer, _, _ = _connect(server, "observer")
    first, _, _ = _connect(server, "controller")
    last_digest = None
    try:
        for _ in range(3):
            first.send("action", _noop_wire())
            ack, _ = first.recv_until("action")
            last_digest = ack["payload"]["digest"]
        first.close()

        second, attach, snap = _reconnect_controller(server)
        try:
            assert attach["step"] == 3
            assert attach["digest"] == last_digest
            assert snap["step"] == 3
            assert state_digest(snap["state"]) == last_digest

            observer.drain_until_quiet(0.2)
            second.send("action", _noop_wire())
            ack, _ = second.recv_until("action")
            assert ack["payload"]["step"] == 4
            watched, _ = observer.recv_until("delta")
            assert watched["payload"]["step"] == 4
        finally:
            second.close()
    finally:
        observer.close()


# --- recording and replay over the wire ---------------------------------------------


def test_record_mark_stop_and_replay_verify(bridge, taxonomy, tmp_path):
    target = tmp_path / "demo.log"
    server = bridge("grasping_book", seed=4)
    client, attach, _ = _connect(server, "controller")
    try:
        assert attach["recording"] is False
        seq = client.send("record_control", {"op": "start", "target": str(target)})
        ack, _ = client.recv_until("record_control")
        assert ack["payload"] == {"ack": seq, "op": "start", "recording": True,
                                  "step": 0, "target": str(target)}

        seq = client.send("record_control", {"op": "mark", "label": "setup done"})
        ack, _ = client.recv_until("record_control")
        assert ack["payload"]["op"] == "mark"
        assert ack["payload"]["step"] == 0

        for _ in range(2):
            client.send("action", _noop_wire())
            ack, _ = client.recv_until("action")
        final_digest = ack["payload"]["digest"]

        seq = client.send("record_control", {"op": "stop"})
        ack, _ = client.recv_until("record_control")
        assert ack["payload"]["recording"] is False
        assert ack["payload"]["final_digest"] == final_digest

        episode = read_log(target)
        assert [s["step"] for s in episode.steps] == [1, 2]
        assert episode.marks == [{"label": "setup done", "step": 0}]
        assert episode.footer["final_digest"] == final_digest
        assert replay(target, taxonomy).final_digest == final_digest

        seq = client.send("replay_control", {"op": "verify", "source": str(target)})
        verdict, _ = client.recv_until("replay_control")
        assert verdict["payload"] == {"ack": seq, "final_digest": final_digest,
                                      "ok": True, "steps": 2, "success": False}

        # recording can only start from the very beginning of an episode
        client.send("record_control",
                    {"op": "start", "target": str(tmp_path / "late.log")})
        err, _ = client.recv_until("error")
        assert err["payload"]["code"] == "BadRequest"
    finally:
        client.close()


def test_replay_verify_reports_divergence(bridge, taxonomy, tmp_path):
    target = tmp_path / "demo.log"
    server = bridge("grasping_book", seed=4)
    client, _, _ = _connect(server, "controller")
    try:
        client.send("record_control", {"op": "start", "target": str(target)})
        client.recv_until("record_control")
        for _ in range(2):
            client.send("action", _noop_wire())
            client.recv_until("action")
        client.send("record_control", {"op": "stop"})
        client.recv_until("record_control")

        raw = bytearray(target.read_bytes())
        needle = raw.index(b'"digest":"') + len(b'"digest":"')
        raw[needle] = ord("f") if raw[needle] != ord("f") else ord("0")
        target.write_bytes(bytes(raw))

        client.send("replay_control", {"op": "verify", "source": str(target)})
        verdict, _ = client.recv_until("replay_control")
        assert verdict["payload"]["ok"] is False
        assert verdict["payload"]["error"]["kind"] == "DigestMismatch"

        client.send("replay_control", {"op": "verify", "source": "no-such.log"})
        err, _ = client.recv_until("error")
        assert err["payload"]["code"] == "BadRequest"
    finally:
        client.close()


# --- server plumbing ----------------------------------------------------------------


def test_port_in_use_is_reported(bridge):
    blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        with pytest.raises(PortInUse) as err:
            bridge(port=port)
        assert err.value.port == port
    finally:
        blocker.close()


def test_static_assets_served_next_to_the_socket(bridge, tmp_path):
    (tmp_path / "index.html").write_text("<title>console</title>")
    (tmp_path / "app.js").write_text("export {};")
    server = bridge(static_dir=tmp_path)

    import http.client

    def get(path):
        conn = http.client.HTTPConnection("127.0.0.1", server.port, timeout=5)
        conn.request("GET", path)
        resp = conn.getresponse()
        body = resp.read()
        conn.close()
        return resp.status, body

    assert get("/") == (200, b"<title>console</title>")
    assert get("/app.js") == (200, b"export {};")
    assert get("/missing.js")[0] == 404
    assert get("/../secrets")[0] == 404

    # the same port still upgrades to the wire protocol
    client, attach, _ = _connect(server, "observer")
    client.close()
    assert attach["protocol"] == "oikos/1"
