"""Deterministic mock chat-completion server.

Speaks the same wire shape as a local model server so the gateway, tests and
offline demos run without any model. Replies are a pure function of the
request. Fault-injection behaviors cover the gateway's failure paths:

    ok       structured/prose replies driven by simple keyword rules
    garbage  prose with no structured block
    timeout  sleeps past any sane client timeout before answering
    error    responds 500
    drop     closes the connection without a response
"""

from __future__ import annotations

import json
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

BEHAVIORS = ("ok", "garbage", "timeout", "error", "drop")

# canonical JSON sorts keys, so a located belief's content serializes as
# {"args":["<label>",[x,y]],"predicate":"located"}
_LOCATED_RE = re.compile(r'"args":\["([^"]+)",\[[^\]]*\]\],"predicate":"located"')
_QUERY_WORDS = ("position", "state", "goal", "where are you", "status")
_MOVE_WORDS = ("go", "move", "navigate", "head", "drive")

_FRAME_PROSE = {
    "agentive": "I believe I know what to do next, and I intend to see it through.",
    "teleological": "The goal of this behavior is to fulfill the user's request; "
                    "reporting it serves that objective.",
    "mechanistic": "Executing velocity command. Odometry reading nominal; "
                   "coordinates updated.",
}


def decide_reply(messages: list[dict]) -> str:
    """The mock's brain: deterministic keyword rules over the prompt."""
    system = next((m["content"] for m in messages if m.get("role") == "system"), "")
    user = next((m["content"] for m in reversed(messages) if m.get("role") == "user"), "")

    if "explanatory register" in system:  # reporter profile
        for frame, prose in _FRAME_PROSE.items():
            if f"register: {frame}" in system:
                return prose
        return _FRAME_PROSE["agentive"]

    # commander profile: pick a known label mentioned in the utterance
    labels = _LOCATED_RE.findall(user)
    utterance = user.rsplit("Utterance:", 1)[-1].lower()
    mentioned = None
    for label in labels:
        if re.search(r"\b" + re.escape(label.lower()) + r"\b", utterance):
            mentioned = label
            break
    wants_move = any(re.search(r"\b" + w + r"\b", utterance) for w in _MOVE_WORDS)
    if wants_move and mentioned:
        return json.dumps({"action": "move", "target": mentioned,
                           "utterance": f"I'm heading to the {mentioned} location."})
    if any(w in utterance for w in _QUERY_WORDS):
        return json.dumps({"action": "chat", "target": None,
                           "utterance": "Let me report on that."})
    return json.dumps({"action": "chat", "target": None,
                       "utterance": "Could you name a place I know?"})


class _QuietServer(ThreadingHTTPServer):
    def handle_error(self, request, client_address):  # keep test output quiet
        pass


class _Handler(BaseHTTPRequestHandler):
    server_version = "mockllm/0.1"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def do_POST(self):
        behavior = self.headers.get("x-mock-behavior", self.server.behavior)
        if behavior == "drop":
            self.connection.close()
            return
        if behavior == "timeout":
            time.sleep(self.server.timeout_delay)
        if behavior == "error":
            self.send_response(500)
            self.end_headers()
            self.wfile.write(b'{"error": "induced failure"}')
            return

        length = int(self.headers.get("content-length", 0))
        try:
            request = json.loads(self.rfile.read(length))
            messages = request["messages"]
        except (ValueError, KeyError):
            self.send_response(400)
            self.end_headers()
            return

        if behavior == "garbage":
            content = "Certainly! Here are my thoughts, entirely unstructured."
        else:
            content = decide_reply(messages)

        body = json.dumps({
            "id": "mock-0",
            "object": "chat.completion",
            "created": 0,
            "model": request.get("model", "mock"),
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop",
            }],
            "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
        }).encode("utf-8")
        try:
            self.send_response(200)
            self.send_header("content-type", "application/json")
            self.send_header("content-length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client gave up (its timeout fired first)


class MockLlmServer:
    """In-process mock server; use as a context manager in tests."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 behavior: str = "ok", timeout_delay: float = 2.0):
        if behavior not in BEHAVIORS:
            raise ValueError(f"behavior must be one of {BEHAVIORS}")
        self._server = _QuietServer((host, port), _Handler)
        self._server.behavior = behavior
        self._server.timeout_delay = timeout_delay
        self._thread: Optional[threading.Thread] = None

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    def start(self) -> "MockLlmServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=2)

    def __enter__(self) -> "MockLlmServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def serve_forever(self) -> None:
        self._server.serve_forever()
