"""Newline-delimited JSON protocol that exposes any ``TextEnv`` over a stream.

Requests::

    {"op": "reset", "variation": 0, "task": "boil-water"}   # task is optional
    {"op": "step", "cmd": "go kitchen"}
    {"op": "grammar"}
    {"op": "golden", "variation": 0}

Responses are ``{"ok": true, ...}`` with ``obs/reward/done/score`` (plus
``task`` after reset, ``grammar`` or ``golden`` for those ops), or
``{"ok": false, "err": "...", "code": "..."}``.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import subprocess
import sys
import threading
from typing import Callable, TextIO

from .base import (
    EnvConnectError,
    EnvError,
    EnvTimeout,
    Grammar,
    ProtocolViolation,
    StepAfterDone,
    StepResult,
    TextEnv,
    UnknownVariation,
)

logger = logging.getLogger(__name__)

EnvFactory = Callable[[str | None], TextEnv]

_CODES = {StepAfterDone: "step_after_done", UnknownVariation: "unknown_variation"}
_ERRORS = {v: k for k, v in _CODES.items()}


class Session:
    """Server side of one connection: owns a single environment."""

    def __init__(self, factory: EnvFactory, task: str | None = None):
        self.factory = factory
        self.task = task
        self.env: TextEnv | None = None

    def _env(self) -> TextEnv:
        if self.env is None:
            self.env = self.factory(self.task)
        return self.env

    def handle(self, line: str) -> dict:
        try:
            req = json.loads(line)
            op = req["op"]
        except (ValueError, KeyError, TypeError):
            return {"ok": False, "err": f"bad request: {line.strip()[:200]}", "code": "bad_request"}
        try:
            if op == "reset":
                if req.get("task") and req["task"] != self.task:
                    self.task = req["task"]
                    self.env = None
                obs, task_text = self._env().reset(int(req.get("variation", 0)))
                env = self._env()
                return {"ok": True, "obs": obs, "task": task_text, "reward": 0, "done": env.done,
                        "score": env.score}
            if op == "step":
                res = self._env().step(str(req["cmd"]))
                return {"ok": True, "obs": res.observation, "reward": res.reward, "done": res.done,
                        "score": res.score}
            if op == "grammar":
                return {"ok": True, "grammar": self._env().action_grammar().templates}
            if op == "golden":
                return {"ok": True, "golden": self._env().golden_trajectory(int(req.get("variation", 0)))}
            return {"ok": False, "err": f"unknown op {op!r}", "code": "bad_request"}
        except EnvError as exc:
            return {"ok": False, "err": str(exc), "code": _CODES.get(type(exc), "env_error")}
        except Exception as exc:  # keep the server alive on handler bugs
            logger.exception("request failed")
            return {"ok": False, "err": f"{type(exc).__name__}: {exc}", "code": "internal"}


def _encode(resp: dict) -> bytes:
    return (json.dumps(resp, ensure_ascii=False) + "\n").encode("utf-8")


class EnvServer(socketserver.ThreadingTCPServer):
    """TCP server; each connection gets its own ``Session``."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, factory: EnvFactory, host: str = "127.0.0.1", port: int = 0, task: str | None = None):
        self.factory = factory
        self.task = task
        super().__init__((host, port), _Handler)

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session(self.server.factory, self.server.task)
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            self.wfile.write(_encode(session.handle(line)))
            self.wfile.flush()


def serve_stdio(factory: EnvFactory, task: str | None = None, stdin: TextIO = sys.stdin,
                stdout: TextIO = sys.stdout) -> None:
    session = Session(factory, task)
    for line in stdin:
        if line.strip():
            stdout.write(json.dumps(session.handle(line), ensure_ascii=False) + "\n")
            stdout.flush()


class RemoteEnv(TextEnv):
    """Client half of the protocol; requests are serialized per connection."""

    def __init__(self, address: str | None = None, task: str | None = None, timeout: float = 10.0,
                 command: list[str] | None = None):
        self.task = task
        self.timeout = timeout
        self.done = True
        self.score = 0
        self._lock = threading.Lock()
        self._grammar: Grammar | None = None
        self._proc = None
        self._sock = None
        if command is not None:
            try:
                self._proc = subprocess.Popen(command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
            except OSError as exc:
                raise EnvConnectError(f"cannot start {command!r}: {exc}") from None
            self._rfile, self._wfile = self._proc.stdout, self._proc.stdin
            return
        if not address or ":" not in address:
            raise EnvConnectError(f"expected host:port, got {address!r}")
        host, port = address.rsplit(":", 1)
        try:
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
        except (OSError, ValueError) as exc:
            raise EnvConnectError(f"cannot connect to {address}: {exc}") from None
        self._rfile = self._sock.makefile("rb")
        self._wfile = self._sock.makefile("wb")

    def _call(self, req: dict) -> dict:
        with self._lock:
            try:
                self._wfile.write(_encode(req))
                self._wfile.flush()
                raw = self._rfile.readline()
            except socket.timeout:
                raise EnvTimeout(f"no reply to {req['op']} within {self.timeout}s") from None
            except OSError as exc:
                raise EnvError(f"connection failed: {exc}") from None
        if not raw:
            raise EnvError("environment closed the connection")
        line = raw.decode("utf-8", errors="replace").rstrip("\n")
        try:
            resp = json.loads(line)
        except ValueError:
            raise ProtocolViolation(line) from None
        if not isinstance(resp, dict) or "ok" not in resp:
            raise ProtocolViolation(line, "response lacks 'ok'")
        if not resp["ok"]:
            cls = _ERRORS.get(resp.get("code"), EnvError)
            raise cls(resp.get("err", "remote error"))
        return resp

    def _fields(self, resp: dict, *names: str) -> list:
        missing = [n for n in names if n not in resp]
        if missing:
            raise ProtocolViolation(json.dumps(resp), f"response lacks {missing}")
        return [resp[n] for n in names]

    def reset(self, variation: int) -> tuple[str, str]:
        req = {"op": "reset", "variation": variation}
        if self.task:
            req["task"] = self.task
        resp = self._call(req)
        obs, task_text = self._fields(resp, "obs", "task")
        self.done = bool(resp.get("done", False))
        self.score = resp.get("score", 0)
        return obs, task_text

    def step(self, command: str) -> StepResult:
        resp = self._call({"op": "step", "cmd": command})
        obs, reward, done, score = self._fields(resp, "obs", "reward", "done", "score")
        self.done, self.score = bool(done), score
        return StepResult(obs, reward, bool(done), score)

    def action_grammar(self) -> Grammar:
        if self._grammar is None:
            self._grammar = Grammar(self._fields(self._call({"op": "grammar"}), "grammar")[0])
        return self._grammar

    def golden_trajectory(self, variation: int) -> list[str]:
        return list(self._fields(self._call({"op": "golden", "variation": variation}), "golden")[0])

    def close(self) -> None:
        for f in (getattr(self, "_wfile", None), getattr(self, "_rfile", None)):
            try:
                if f is not None:
                    f.close()
            except OSError:
                pass
        if self._sock is not None:
            self._sock.close()
        if self._proc is not None:
            self._proc.wait(timeout=5)

