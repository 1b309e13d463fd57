"""Action policy: utterance parsing and move/chat selection.

Two engines share one contract: a deterministic rule cascade, and an LLM-backed
variant that validates the model's structured decision and falls back to the
rules on any failure. Neither engine sees the active explanation frame — the
frame shapes language only, never behavior.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    Action,
    BeliefBase,
    Category,
    ChatParams,
    Event,
    EventKind,
    Intent,
    IntentKind,
    MoveParams,
    Pose,
    State,
)
from .transition import query_topic
from .world import WorldSpec, normalize_text, resolve_label, scan_for_label


@dataclass(frozen=True)
class ActionDecision:
    action: Action
    params: "MoveParams | ChatParams"
    rationale_tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.action is Action.MOVE and not isinstance(self.params, MoveParams):
            raise ValueError("move decisions must carry a concrete move target")

    @property
    def primary_tag(self) -> str:
        return self.rationale_tags[0] if self.rationale_tags else "unknown"

    def to_dict(self) -> dict:
        return {
            "kind": self.action.value,
            "params": self.params.to_dict(),
            "rationale_tags": list(self.rationale_tags),
        }


@dataclass(frozen=True)
class PolicyResult:
    """A decision plus any error-event payloads the engine produced on the way."""

    decision: ActionDecision
    errors: tuple[dict, ...] = ()
    gateway_raw: Optional[str] = None  # raw completion behind an accepted LLM decision


# ---------------------------------------------------------------------------
# Command parsing
# ---------------------------------------------------------------------------

_FREE_CHOICE_PHRASES = (
    "random place", "random spot", "somewhere random", "your choice", "you choose",
    "you pick", "your pick", "anywhere you like", "wherever you want",
)
_GOAL_PHRASES = (
    "what is your goal", "your goal", "where are you going", "where are you heading",
    "your destination", "your target", "current goal",
)
_POSITION_PHRASES = (
    "what is your position", "your position", "your location", "where are you",
    "where you are", "your coordinates",
)
_STATE_PHRASES = ("what is your state", "your state", "your status", "how are you doing")
_SMALLTALK_PHRASES = ("hello", "hi there", "good morning", "good evening", "thanks",
                      "thank you", "hey")

_GOTO_RE = re.compile(
    r"\b(?:go|move|navigate|head|drive|come)\s+(?:to|toward|towards|into|over to)\s+(.+)"
)
_MOVE_VERB_RE = re.compile(r"\b(?:go|move|navigate|head|drive)\b")
_ARTICLE_RE = re.compile(r"^(?:the|a|an)\s+")


def _strip_articles(text: str) -> str:
    return _ARTICLE_RE.sub("", text).strip()


def parse_command(text: str, world: WorldSpec) -> Intent:
    """Deterministic parse cascade; unknown is a value, never an error."""
    norm = normalize_text(text)
    if not norm:
        return Intent(kind=IntentKind.UNKNOWN, raw=text)

    if any(p in norm for p in _FREE_CHOICE_PHRASES):
        return Intent(kind=IntentKind.FREE_CHOICE, raw=text)

    for phrases, query in ((_GOAL_PHRASES, "goal"), (_POSITION_PHRASES, "position"),
                           (_STATE_PHRASES, "state")):
        if any(p in norm for p in phrases):
            return Intent(kind=IntentKind.QUERY, raw=text, query=query)

    goto = _GOTO_RE.search(norm)
    captured = _strip_articles(goto.group(1)) if goto else None
    if captured:
        label = resolve_label(world, captured)
        if label is not None:
            return Intent(kind=IntentKind.GOTO, raw=text, label=label, resolved=True)

    if _MOVE_VERB_RE.search(norm):
        label = scan_for_label(world, norm)
        if label is not None:
            return Intent(kind=IntentKind.GOTO, raw=text, label=label, resolved=True)
        if captured:
            return Intent(kind=IntentKind.GOTO, raw=text, label=captured, resolved=False)

    if any(norm == p or norm.startswith(p + " ") for p in _SMALLTALK_PHRASES):
        return Intent(kind=IntentKind.SMALLTALK, raw=text)

    return Intent(kind=IntentKind.UNKNOWN, raw=text)


def free_choice_label(world: WorldSpec, seed: int, turn_key: str) -> str:
    """Seeded uniform draw over waypoint labels; stable across processes."""
    rng = random.Random(f"{seed}:{turn_key}:free_choice")
    return rng.choice(sorted(world.labels))


# ---------------------------------------------------------------------------
# Decision engines
# ---------------------------------------------------------------------------


def _move_decision(world: WorldSpec, base: BeliefBase, label: str,
                   tag: str) -> Optional[ActionDecision]:
    belief = base.get(Category.LOCATIONS, label)
    if belief is None:
        return None
    x, y = belief.content.args[1]
    facing = None
    wp = world.env().get(label)
    if wp is not None and wp.facing is not None:
        facing = wp.facing
    target = Pose(float(x), float(y), facing if facing is not None else 0.0)
    return ActionDecision(Action.MOVE, MoveParams(target, label), (tag,))


def _intent_from_event(event: Event, world: WorldSpec) -> Intent:
    if event.kind is EventKind.COMMAND_PARSED:
        return Intent.from_dict(event.payload["intent"])
    if event.kind is EventKind.USER_UTTERANCE:
        return parse_command(event.payload["text"], world)
    raise ValueError(f"no intent derivable from event kind {event.kind.value}")


@dataclass(frozen=True)
class RulesEngine:
    """Deterministic baseline policy: a pure function of (state, base, e, seed)."""

    world: WorldSpec
    seed: int = 0
    name: str = field(default="rules", init=False)

    def decide(self, state: State, base: BeliefBase, event: Event) -> PolicyResult:
        if event.kind is EventKind.NAV_GOAL_REACHED:
            return PolicyResult(ActionDecision(
                Action.CHAT, ChatParams(topic="arrival_report"), ("arrival_report",)))
        if event.kind is EventKind.SESSION_START:
            return PolicyResult(ActionDecision(
                Action.CHAT, ChatParams(topic="smalltalk"), ("smalltalk",)))

        intent = _intent_from_event(event, self.world)

        if intent.kind is IntentKind.FREE_CHOICE:
            label = intent.label or free_choice_label(
                self.world, self.seed, f"{event.t!r}:{normalize_text(intent.raw)}")
            decision = _move_decision(self.world, base, label, "free_choice")
            if decision is not None:
                return PolicyResult(decision)
            intent = Intent(kind=IntentKind.GOTO, raw=intent.raw, label=label)

        if intent.kind is IntentKind.GOTO:
            if intent.label:
                decision = _move_decision(self.world, base, intent.label, "user_request")
                if decision is not None:
                    return PolicyResult(decision)
            return PolicyResult(ActionDecision(
                Action.CHAT, ChatParams(topic="clarification", subject=intent.label),
                ("clarification",)))

        if intent.kind is IntentKind.QUERY and intent.query:
            topic = query_topic(intent.query, state)
            return PolicyResult(ActionDecision(Action.CHAT, ChatParams(topic=topic), (topic,)))

        if intent.kind is IntentKind.SMALLTALK:
            return PolicyResult(ActionDecision(
                Action.CHAT, ChatParams(topic="smalltalk"), ("smalltalk",)))

        return PolicyResult(ActionDecision(
            Action.CHAT, ChatParams(topic="clarification", subject=None), ("clarification",)))


class LlmEngine:
    """LLM-backed policy behind the rules contract.

    Asks the gateway for a structured decision; any transport or validation
    failure degrades to the rules engine and is reported as an error payload.
    """

    name = "llm"

    def __init__(self, world: WorldSpec, seed: int, gateway, context_provider=None):
        self.world = world
        self.seed = seed
        self.gateway = gateway
        self.rules = RulesEngine(world=world, seed=seed)
        # callable returning dict context (desires, intention, recent events)
        self.context_provider = context_provider or (lambda: {})

    def decide(self, state: State, base: BeliefBase, event: Event) -> PolicyResult:
        from .gateway import GatewayUnavailable, build_decision_bundle, parse_decision

        fallback = self.rules.decide(state, base, event)
        try:
            intent = _intent_from_event(event, self.world)
        except ValueError:
            return fallback

        bundle = build_decision_bundle(state, base, intent.raw, self.context_provider())
        try:
            raw = self.gateway.complete(bundle).text
        except GatewayUnavailable as exc:
            error = {"code": "gateway_unavailable", "message": str(exc), "stage": "decision"}
            return PolicyResult(fallback.decision, errors=(error,))

        parsed = parse_decision(raw, self.world)
        if parsed.failure is not None:
            error = {"code": "invalid_llm_decision", "message": parsed.failure,
                     "stage": "decision", "raw": raw[:2000]}
            return PolicyResult(fallback.decision, errors=(error,))

        llm = parsed.decision
        if llm.action is Action.MOVE:
            decision = _move_decision(self.world, base, llm.target_label, "user_request")
            if decision is None:
                error = {"code": "invalid_llm_decision", "stage": "decision",
                         "message": f"no location belief for {llm.target_label!r}",
                         "raw": raw[:2000]}
                return PolicyResult(fallback.decision, errors=(error,))
            if intent.kind is IntentKind.FREE_CHOICE:
                decision = ActionDecision(decision.action, decision.params, ("free_choice",))
            return PolicyResult(decision, gateway_raw=raw)

        # chat: topic/tag derivation stays rule-determined so decision types
        # remain comparable across engines
        if fallback.decision.action is Action.CHAT:
            return PolicyResult(fallback.decision, gateway_raw=raw)
        topic = ChatParams(topic="clarification", subject=None)
        return PolicyResult(ActionDecision(Action.CHAT, topic, ("clarification",)),
                            gateway_raw=raw)


Engine = "RulesEngine | LlmEngine"


def decide(state: State, base: BeliefBase, event: Event,
           engine: "RulesEngine | LlmEngine") -> ActionDecision:
    """Policy entry point; see PolicyResult-returning engine.decide for details."""
    return engine.decide(state, base, event).decision
