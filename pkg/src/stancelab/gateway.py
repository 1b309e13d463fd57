"""Client for a locally served chat-completion endpoint.

Builds belief-conditioned prompts, enforces timeouts and reply caps, and
parses structured decisions. The gateway never mutates session state: it is a
pure request/response adapter, and every failure maps to one
GatewayUnavailable signal so callers can fall back deterministically.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, replace
from importlib import resources
from typing import Optional

import httpx

from .canonical import canonical_json, text_hash
from .model import Action, BeliefBase, State
from .world import WorldSpec, resolve_label

CONTEXT_BYTE_CAP = 4096
REPLY_BYTE_CAP = 16384
RECENT_EVENT_COUNT = 6


class GatewayUnavailable(Exception):
    """Timeout, refused connection or non-2xx — one signal for callers."""

    code = "gateway_unavailable"


@dataclass(frozen=True)
class GatewayConfig:
    endpoint: str = "http://127.0.0.1:8089/v1/chat/completions"
    model: str = "local-chat"
    timeout: float = 10.0
    temperature: float = 0.0
    max_tokens: int = 256

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        cfg = cls(
            endpoint=os.environ.get("STANCELAB_LLM_ENDPOINT", cls.endpoint),
            model=os.environ.get("STANCELAB_LLM_MODEL", cls.model),
            timeout=float(os.environ.get("STANCELAB_LLM_TIMEOUT", cls.timeout)),
            temperature=float(os.environ.get("STANCELAB_LLM_TEMPERATURE", cls.temperature)),
            max_tokens=int(os.environ.get("STANCELAB_LLM_MAX_TOKENS", cls.max_tokens)),
        )
        return replace(cfg, **overrides) if overrides else cfg


@dataclass(frozen=True)
class PromptBundle:
    system: str
    context: str  # canonical JSON snapshot, <= CONTEXT_BYTE_CAP bytes
    user: str
    profile: str  # commander | reporter

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system},
            {"role": "user", "content": f"Context:\n{self.context}\n\nUtterance: {self.user}"},
        ]


@dataclass(frozen=True)
class Completion:
    text: str
    truncated: bool = False


def _prompt_text(name: str) -> str:
    return resources.files("stancelab.data.prompts").joinpath(f"{name}.txt").read_text()


def prompt_hash() -> str:
    """Digest of the bundled prompt profiles, for citing an exact prompt version."""
    return text_hash(_prompt_text("commander") + "\n" + _prompt_text("reporter"))


def _bounded_context(snapshot: dict) -> str:
    events = list(snapshot.get("recent_events", []))
    while True:
        text = canonical_json(snapshot)
        if len(text.encode("utf-8")) <= CONTEXT_BYTE_CAP or not events:
            break
        events.pop(0)
        snapshot = dict(snapshot, recent_events=events)
    if len(text.encode("utf-8")) > CONTEXT_BYTE_CAP:
        text = text.encode("utf-8")[: CONTEXT_BYTE_CAP - 3].decode("utf-8", "ignore") + "..."
    return text


def _snapshot(state: State, base: BeliefBase, extras: Optional[dict] = None) -> dict:
    snapshot = {
        "beliefs": base.to_list(),
        "pose": state.nav.pose.to_list(),
        "goal": state.nav.goal.to_list() if state.nav.goal else None,
        "status": state.robot.status.value,
    }
    if extras:
        snapshot.update(extras)
    return snapshot


def build_decision_bundle(state: State, base: BeliefBase, user_text: str,
                          context_extras: Optional[dict] = None) -> PromptBundle:
    # deliberately frame-free: action selection must not see the frame
    return PromptBundle(
        system=_prompt_text("commander"),
        context=_bounded_context(_snapshot(state, base, context_extras)),
        user=user_text,
        profile="commander",
    )


FRAME_STYLE = {
    "agentive": (
        "Speak in the first person about your own mental states: use verbs like "
        "believe, intend, want, notice or think. Never use the words purpose, "
        "objective or designed, never say 'the goal of' or 'the function of', and "
        "never mention Twist messages, velocity commands or odometry readings."
    ),
    "teleological": (
        "Explain in terms of goals, purposes, functions and objectives (use at "
        "least one of: goal, purpose, function, objective, designed). Never use "
        "first-person mental verbs like 'I believe', 'I intend', 'I want', "
        "'I notice' or 'I think', and never mention Twist messages, velocity "
        "commands or odometry readings."
    ),
    "mechanistic": (
        "Report low-level system operations: odometry readings, published Twist "
        "commands, executed velocity commands, numeric coordinates. Never use "
        "first-person mental verbs like 'I believe' or 'I want', never use the "
        "words purpose, objective or designed, and never say 'the goal of' or "
        "'the function of'."
    ),
}


def build_report_bundle(state: State, base: BeliefBase, user_text: str, frame: str,
                        context_extras: Optional[dict] = None) -> PromptBundle:
    system = _prompt_text("reporter").replace("{frame}", frame)
    system = system.replace("{frame_instruction}", FRAME_STYLE[frame])
    return PromptBundle(
        system=system,
        context=_bounded_context(_snapshot(state, base, context_extras)),
        user=user_text,
        profile="reporter",
    )


class LlmGateway:
    """HTTP client speaking the de-facto local chat-completion wire shape."""

    def __init__(self, config: Optional[GatewayConfig] = None):
        self.config = config or GatewayConfig()

    def complete(self, bundle: PromptBundle) -> Completion:
        payload = {
            "model": self.config.model,
            "messages": bundle.messages(),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        try:
            response = httpx.post(self.config.endpoint, json=payload,
                                  timeout=self.config.timeout)
        except httpx.TimeoutException as exc:
            raise GatewayUnavailable(f"timeout after {self.config.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise GatewayUnavailable(f"transport failure: {exc.__class__.__name__}") from exc
        if response.status_code // 100 != 2:
            raise GatewayUnavailable(f"endpoint returned HTTP {response.status_code}")
        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
            if not isinstance(text, str):
                raise TypeError
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayUnavailable("malformed completion body") from exc
        raw = text.encode("utf-8")
        if len(raw) > REPLY_BYTE_CAP:
            return Completion(raw[:REPLY_BYTE_CAP].decode("utf-8", "ignore"), truncated=True)
        return Completion(text)


class ReplayGateway:
    """Replays recorded gateway outcomes instead of hitting the network."""

    def __init__(self, decision_outcomes: list, report_outcomes: list):
        self._queues = {"commander": list(decision_outcomes),
                        "reporter": list(report_outcomes)}

    def complete(self, bundle: PromptBundle) -> Completion:
        queue = self._queues[bundle.profile]
        if not queue:
            raise GatewayUnavailable("no recorded outcome left for replay")
        kind, value = queue.pop(0)
        if kind == "unavailable":
            raise GatewayUnavailable(value)
        return Completion(value)


# ---------------------------------------------------------------------------
# Structured decision parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LlmDecision:
    action: Action
    target_label: Optional[str]
    utterance: str


@dataclass(frozen=True)
class ParsedDecision:
    decision: Optional[LlmDecision] = None
    failure: Optional[str] = None


_FENCE_RE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)


def _extract_block(raw: str) -> Optional[str]:
    fenced = _FENCE_RE.search(raw)
    if fenced:
        return fenced.group(1)
    start = raw.find("{")
    if start < 0:
        return None
    depth = 0
    for i in range(start, len(raw)):
        if raw[i] == "{":
            depth += 1
        elif raw[i] == "}":
            depth -= 1
            if depth == 0:
                return raw[start:i + 1]
    return None


def parse_decision(raw: str, world: WorldSpec) -> ParsedDecision:
    """Extract and validate the structured block from a completion."""
    block = _extract_block(raw)
    if block is None:
        return ParsedDecision(failure="malformed: no structured block found")
    try:
        data = json.loads(block)
    except json.JSONDecodeError as exc:
        return ParsedDecision(failure=f"malformed: structured block is not JSON ({exc.msg})")
    if not isinstance(data, dict):
        return ParsedDecision(failure="malformed: structured block is not an object")

    action_name = data.get("action")
    if action_name not in (Action.MOVE.value, Action.CHAT.value):
        return ParsedDecision(failure=f"unknown action {action_name!r}")
    utterance = data.get("utterance", "")
    if not isinstance(utterance, str):
        return ParsedDecision(failure="malformed: utterance must be a string")

    target = data.get("target", data.get("target_label"))
    if action_name == Action.MOVE.value:
        if not isinstance(target, str) or not target:
            return ParsedDecision(failure="move decision lacks a target label")
        label = resolve_label(world, target)
        if label is None:
            return ParsedDecision(failure=f"unresolvable target label {target!r}")
        target = label

    return ParsedDecision(decision=LlmDecision(
        action=Action(action_name),
        target_label=target if action_name == Action.MOVE.value else None,
        utterance=utterance,
    ))
