"""Bridge to an external agent process speaking the newline-JSON protocol."""

from __future__ import annotations

import json
import queue
import subprocess
import threading

from ..errors import AgentProtocolError
from ..traces import AgentLog
from .base import Agent, AgentAction, AgentContext, Observation
from .wire import action_doc, context_doc, dumps, observation_doc

HANDSHAKE_TIMEOUT = 10.0  # seconds
STEP_TIMEOUT = 2.0        # seconds per run_step exchange
SHUTDOWN_TIMEOUT = 2.0    # seconds to wait for "bye" and process exit


class ExternalAgent(Agent):
    """Synchronous lockstep bridge; any malformed or late reply is fatal."""

    kind = "external"

    def __init__(self, command: list[str], ctx: AgentContext,
                 step_timeout: float = STEP_TIMEOUT):
        super().__init__(ctx, {})
        self.step_timeout = step_timeout
        self._lines: queue.Queue[str | None] = queue.Queue()
        try:
            self.proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise AgentProtocolError(f"cannot start external agent {command}: {exc}") from exc
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._send({"type": "hello", "context": context_doc(ctx)})
        reply = self._recv(HANDSHAKE_TIMEOUT)
        if reply.get("type") != "ready":
            self._kill()
            raise AgentProtocolError(f"external agent handshake failed: {reply}")

    def _read_loop(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def _send(self, msg: dict) -> None:
        try:
            self.proc.stdin.write(dumps(msg))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._kill()
            raise AgentProtocolError(f"external agent pipe closed: {exc}") from exc

    def _recv(self, timeout: float) -> dict:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            self._kill()
            raise AgentProtocolError(
                f"external agent timed out after {timeout} s") from None
        if line is None:
            self._kill()
            raise AgentProtocolError("external agent closed its stdout")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            self._kill()
            raise AgentProtocolError(f"malformed agent message: {line!r}") from exc
        if not isinstance(msg, dict):
            self._kill()
            raise AgentProtocolError(f"agent message must be an object: {line!r}")
        return msg

    def act(self, obs: Observation) -> tuple[AgentAction, AgentLog]:
        self._send({"type": "observation", "observation": observation_doc(obs)})
        reply = self._recv(self.step_timeout)
        if reply.get("type") != "action":
            self._kill()
            raise AgentProtocolError(f"expected action message, got: {reply}")
        try:
            action = AgentAction(float(reply["accel"]), float(reply["steer"]))
            log = reply.get("log") or {}
            if not isinstance(log, dict):
                raise TypeError("log must be an object")
        except (KeyError, TypeError, ValueError) as exc:
            self._kill()
            raise AgentProtocolError(f"bad action message: {reply}") from exc
        return action, log

    def _kill(self):
        if self.proc.poll() is None:
            self.proc.kill()
        self.proc.wait()

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self._send({"type": "shutdown"})
                self._recv(SHUTDOWN_TIMEOUT)
            except AgentProtocolError:
                pass  # best effort; _kill below reaps regardless
            try:
                self.proc.wait(timeout=SHUTDOWN_TIMEOUT)
            except subprocess.TimeoutExpired:
                pass
        self._kill()


def make_action_reply(action: AgentAction, log: dict) -> str:
    return dumps(action_doc(action, log))
