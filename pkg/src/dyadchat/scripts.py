"""Scripted dyad sessions driven end-to-end over a live loopback server.

A script is a JSON file: {"seed": int, "users": {"A": id, "B": id},
"steps": [...]}. Steps run in order against a fresh in-process server
with the offline provider, so regression runs need no network and no
browser.
"""

from __future__ import annotations

import json
import socket
import tempfile
import threading
import time
from pathlib import Path
from typing import Any, Callable

import httpx
import uvicorn
from websockets.sync.client import connect as ws_connect

from .config import ServiceConfig
from .gateway import create_app
from .service import DyadChatService

DEFAULT_TIMEOUT = 10.0

_OPS = ("text", "recommend", "select", "narrate", "send", "action_only", "assert")
_CHECKS = (
    "in_top4",
    "not_in_top4",
    "history_count",
    "history_contains",
    "replay_ok",
    "replay_error",
)


class ScriptError(ValueError):
    """Malformed script: wrong shape, unknown op, bad reference."""


class BackgroundServer:
    """uvicorn on a pre-bound loopback socket, running in a thread."""

    def __init__(self, service: DyadChatService, host: str = "127.0.0.1", port: int = 0):
        self.service = service
        self.host = host
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self.port = self._sock.getsockname()[1]
        config = uvicorn.Config(
            create_app(service), host=host, port=self.port, log_level="warning"
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(
            target=self._server.run, kwargs={"sockets": [self._sock]}, daemon=True
        )

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    @property
    def ws_url(self) -> str:
        return f"ws://{self.host}:{self.port}/ws"

    def start(self) -> BackgroundServer:
        self._thread.start()
        deadline = time.monotonic() + 15.0
        while not self._server.started:
            if not self._thread.is_alive():
                raise RuntimeError("server thread exited during startup")
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 15s")
            time.sleep(0.01)
        return self

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=15.0)
        self.service.close()

    def __enter__(self) -> BackgroundServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class WsClient:
    """Synchronous websocket driver speaking the envelope protocol."""

    def __init__(
        self,
        ws_url: str,
        token: str,
        conversation_id: str,
        name: str,
        last_seen: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.name = name
        self.timeout = timeout
        self.inbox: list[dict[str, Any]] = []
        self._counter = 0
        self._ws = ws_connect(ws_url, open_timeout=timeout)
        payload: dict[str, Any] = {"token": token, "conversation_id": conversation_id}
        if last_seen is not None:
            payload["last_seen"] = last_seen
        reply, _ = self.request("auth", payload, request_id=f"{name}-auth")
        if reply["event"] != "ack":
            raise ConnectionError(f"auth rejected: {reply['payload']}")

    def _next_id(self) -> str:
        self._counter += 1
        return f"{self.name}-{self._counter}"

    def send_raw(self, frame: dict[str, Any]) -> None:
        self._ws.send(json.dumps(frame))

    def request(
        self,
        event: str,
        payload: dict[str, Any],
        request_id: str | None = None,
    ) -> tuple[dict[str, Any], list[dict[str, Any]]]:
        """Send one request and wait for its ack or error.

        Returns (terminal frame, other frames carrying the same
        request_id, e.g. a recommend-response). Unrelated frames land in
        the inbox.
        """
        rid = request_id or self._next_id()
        self.send_raw({"event": event, "request_id": rid, "payload": payload})
        related: list[dict[str, Any]] = []
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"no ack for {event} ({rid}) within {self.timeout}s")
            frame = json.loads(self._ws.recv(timeout=remaining))
            if frame.get("request_id") == rid and frame.get("event") in ("ack", "error"):
                return frame, related
            if frame.get("request_id") == rid:
                related.append(frame)
            else:
                self.inbox.append(frame)

    def next_frame(
        self,
        accept: Callable[[dict[str, Any]], bool] = lambda f: True,
        timeout: float | None = None,
    ) -> dict[str, Any]:
        for i, frame in enumerate(self.inbox):
            if accept(frame):
                return self.inbox.pop(i)
        deadline = time.monotonic() + (timeout if timeout is not None else self.timeout)
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("no matching frame arrived")
            frame = json.loads(self._ws.recv(timeout=remaining))
            if accept(frame):
                return frame
            self.inbox.append(frame)

    def close(self) -> None:
        self._ws.close()


class _Runner:
    def __init__(self, script: dict[str, Any], data_dir: str | None, out: Callable[[str], None]):
        self.script = script
        self.out = out
        self.saved: dict[str, Any] = {}
        self.failures = 0
        users = script.get("users", {})
        self.user_ids = {"A": users.get("A", "alice"), "B": users.get("B", "bob")}
        self.seed = int(script.get("seed", 0))
        self.data_dir = data_dir or tempfile.mkdtemp(prefix="dyadchat-script-")
        self.server: BackgroundServer | None = None
        self.http = httpx.Client(timeout=DEFAULT_TIMEOUT)
        self.tokens: dict[str, str] = {}
        self.ws: dict[str, WsClient] = {}
        self.conversation_id = ""

    def _headers(self, actor: str) -> dict[str, str]:
        return {"Authorization": f"Bearer {self.tokens[actor]}"}

    def setup(self) -> None:
        config = ServiceConfig(data_dir=self.data_dir, provider_kind="offline")
        self.server = BackgroundServer(DyadChatService(config)).start()
        base = self.server.base_url
        for actor, user_id in self.user_ids.items():
            reply = self.http.post(base + "/login", json={"user_id": user_id})
            reply.raise_for_status()
            self.tokens[actor] = reply.json()["token"]
        reply = self.http.post(
            base + "/conversations",
            json={"peer_id": self.user_ids["B"]},
            headers=self._headers("A"),
        )
        reply.raise_for_status()
        self.conversation_id = reply.json()["conversation_id"]
        for actor in ("A", "B"):
            self.ws[actor] = WsClient(
                self.server.ws_url, self.tokens[actor], self.conversation_id, actor
            )

    def teardown(self) -> None:
        for client in self.ws.values():
            client.close()
        self.http.close()
        if self.server is not None:
            self.server.stop()

    # -- step execution ------------------------------------------------

    def run(self) -> int:
        steps = self.script.get("steps", [])
        if not isinstance(steps, list):
            raise ScriptError("steps must be a list")
        for index, step in enumerate(steps, start=1):
            if not isinstance(step, dict) or step.get("op") not in _OPS:
                raise ScriptError(f"step {index}: unknown op {step.get('op')!r}")
            actor = step.get("actor", "A")
            if actor not in ("A", "B"):
                raise ScriptError(f"step {index}: actor must be A or B")
            try:
                detail = self._dispatch(actor, step, index)
                self.out(f"ok {index} {actor} {step['op']} {detail}")
            except AssertionError as exc:
                self.failures += 1
                self.out(f"FAIL {index} {actor} {step['op']}: {exc}")
        total = len(steps)
        self.out(f"{total - self.failures}/{total} steps passed")
        return 0 if self.failures == 0 else 1

    def _dispatch(self, actor: str, step: dict[str, Any], index: int) -> str:
        op = step["op"]
        if op == "text":
            reply, _ = self.ws[actor].request("chat-message", {"text": step["text"]})
            assert reply["event"] == "ack", f"text rejected: {reply['payload']}"
            return reply["payload"]["record_id"]
        if op == "recommend":
            payload: dict[str, Any] = {
                "seed": int(step.get("seed", self.seed + index)),
                "no_noise": bool(step.get("no_noise", False)),
            }
            if "draft_text" in step:
                payload["draft_text"] = step["draft_text"]
            reply, related = self.ws[actor].request("recommend-request", payload)
            assert reply["event"] == "ack", f"recommend rejected: {reply['payload']}"
            responses = [f for f in related if f["event"] == "recommend-response"]
            assert responses, "no recommend-response arrived"
            if "save_as" in step:
                self.saved[step["save_as"]] = responses[0]["payload"]
            ids = [a["action_id"] for a in responses[0]["payload"]["actions"]]
            return ",".join(ids)
        if op == "select":
            source = self._saved(step["from"])
            shown = [a["action_id"] for a in source["actions"]]
            reply = self.http.post(
                self.server.base_url + "/recommend/outcome",
                json={"shown": shown, "chosen": step["action"]},
                headers=self._headers(actor),
            )
            assert reply.status_code == 200, f"outcome rejected: {reply.text}"
            return step["action"]
        if op == "narrate":
            body = {"action_id": step["action"], "conversation_id": self.conversation_id}
            if "tags" in step:
                body["tags"] = step["tags"]
            reply = self.http.post(
                self.server.base_url + "/narrate", json=body, headers=self._headers(actor)
            )
            assert reply.status_code == 200, f"narrate rejected: {reply.text}"
            narrative = reply.json()["micronarrative"]
            if "save_as" in step:
                self.saved[step["save_as"]] = narrative
            return narrative["text"]
        if op in ("send", "action_only"):
            persist = op == "send"
            payload = {"action_id": step["action"], "persist": persist}
            if persist:
                if "narrative_from" in step:
                    payload["micronarrative"] = dict(self._saved(step["narrative_from"]))
                elif "caption" in step:
                    payload["micronarrative"] = {
                        "text": step["caption"],
                        "action_id": step["action"],
                        "edited": bool(step.get("edited", False)),
                        "generated_by": "user_edit" if step.get("edited") else "offline_template",
                    }
                else:
                    raise ScriptError("send step needs caption or narrative_from")
            reply, _ = self.ws[actor].request("puppet-action", payload)
            assert reply["event"] == "ack", f"{op} rejected: {reply['payload']}"
            if "save_as" in step:
                self.saved[step["save_as"]] = reply["payload"]["record_id"]
            return reply["payload"]["record_id"]
        if op == "assert":
            return self._check(actor, step)
        raise ScriptError(f"unhandled op {op!r}")

    def _saved(self, name: str) -> Any:
        if name not in self.saved:
            raise ScriptError(f"reference to unsaved result {name!r}")
        return self.saved[name]

    def _history_ids(self, actor: str) -> list[str]:
        reply = self.http.get(
            self.server.base_url + f"/history/{self.conversation_id}",
            params={"page_size": 500},
            headers=self._headers(actor),
        )
        reply.raise_for_status()
        return [r["record_id"] for r in reply.json()["records"]]

    def _check(self, actor: str, step: dict[str, Any]) -> str:
        check = step.get("check")
        if check not in _CHECKS:
            raise ScriptError(f"unknown check {check!r}")
        if check in ("in_top4", "not_in_top4"):
            actions = [a["action_id"] for a in self._saved(step["from"])["actions"]]
            wanted = check == "in_top4"
            assert (step["action"] in actions) == wanted, (
                f"expected {step['action']!r} {'in' if wanted else 'not in'} top-4, got {actions}"
            )
            return f"{step['action']} {'in' if wanted else 'not in'} {actions}"
        if check == "history_count":
            ids = self._history_ids(actor)
            assert len(ids) == step["expected"], (
                f"expected {step['expected']} durable records, got {len(ids)}: {ids}"
            )
            return f"count={len(ids)}"
        if check == "history_contains":
            record_id = self._saved(step["record_from"])
            ids = self._history_ids(actor)
            expected = bool(step.get("expected", True))
            assert (record_id in ids) == expected, (
                f"expected {record_id!r} {'in' if expected else 'absent from'} history, got {ids}"
            )
            return f"{record_id} {'present' if expected else 'absent'}"
        if check == "replay_ok":
            record_id = self._saved(step["record_from"])
            reply = self.http.get(
                self.server.base_url + f"/replay/{record_id}", headers=self._headers(actor)
            )
            assert reply.status_code == 200, (
                f"expected replay to succeed, got {reply.status_code}: {reply.text}"
            )
            return f"replayed {record_id}"
        if check == "replay_error":
            record_id = self._saved(step["record_from"])
            reply = self.http.get(
                self.server.base_url + f"/replay/{record_id}", headers=self._headers(actor)
            )
            assert reply.status_code >= 400, (
                f"expected replay to fail, got {reply.status_code}: {reply.text}"
            )
            needle = step.get("message")
            if needle:
                assert needle in reply.text, (
                    f"expected {needle!r} in error body, got {reply.text}"
                )
            return f"replay of {record_id} rejected ({reply.status_code})"
        raise ScriptError(f"unhandled check {check!r}")


def run_script(
    path: str | Path, data_dir: str | None = None, out: Callable[[str], None] = print
) -> int:
    """Execute a script file. Exit code 0 all passed, 1 assert or step
    failure, 2 unparseable or malformed script."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        out(f"cannot read script: {exc}")
        return 2
    try:
        script = json.loads(text)
    except json.JSONDecodeError as exc:
        out(f"script parse error at line {exc.lineno}: {exc.msg}")
        return 2
    if not isinstance(script, dict):
        out("script must be a JSON object")
        return 2

    runner = _Runner(script, data_dir, out)
    try:
        runner.setup()
    except Exception as exc:
        out(f"failed to start scripted session: {exc}")
        return 1
    try:
        return runner.run()
    except ScriptError as exc:
        out(f"script error: {exc}")
        return 2
    except TimeoutError as exc:
        out(f"step timed out: {exc}")
        return 1
    finally:
        runner.teardown()
