"""Explanation frames: one fixed decision + state snapshot rendered in the
agentive, teleological or mechanistic idiom.

Rendering is a deterministic template expansion keyed by (frame, action,
rationale tag). It takes a *completed* decision as input and has no back
channel into the policy, so transcripts can differ across frames while the
behavior trace cannot.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional

from .model import Action, BeliefBase, Category, Event, EventKind, State
from .policy import ActionDecision
from .sim import NavConfig, pursuit_command
from .transition import nearest_waypoint_label


class FrameError(Exception):
    code = "invalid_frame"


class TemplateCoverageError(Exception):
    code = "template_missing"


class Frame(str, Enum):
    AGENTIVE = "agentive"
    TELEOLOGICAL = "teleological"
    MECHANISTIC = "mechanistic"


def parse_frame(name: str) -> Frame:
    try:
        return Frame(name)
    except ValueError:
        raise FrameError(f"unknown frame {name!r}; expected one of "
                         f"{[f.value for f in Frame]}") from None


class Provenance(str, Enum):
    TEMPLATE = "template"
    LLM = "llm"


@dataclass(frozen=True)
class Utterance:
    text: str
    frame: Frame
    topic: str
    provenance: Provenance = Provenance.TEMPLATE

    def __post_init__(self) -> None:
        if not self.text:
            raise FrameError("utterance text must be nonempty")

    def to_dict(self) -> dict:
        return {"text": self.text, "frame": self.frame.value, "topic": self.topic,
                "provenance": self.provenance.value}


# ---------------------------------------------------------------------------
# Frame selection
# ---------------------------------------------------------------------------


def select_frame(current: Frame, event: Event) -> Frame:
    """frame_switch events set the frame; session_start applies the configured
    default; every other event leaves it unchanged."""
    if event.kind is EventKind.FRAME_SWITCH:
        return parse_frame(event.payload["frame"])
    if event.kind is EventKind.SESSION_START:
        return parse_frame(event.payload["default_frame"])
    return current


# ---------------------------------------------------------------------------
# Lexicon
# ---------------------------------------------------------------------------

AGENTIVE_MARKERS = frozenset({"believe", "intend", "want", "notice", "think"})
TELEOLOGICAL_MARKERS = frozenset({"goal", "purpose", "function", "objective", "designed"})
MECHANISTIC_MARKERS = frozenset({
    "odometry reading", "publishing twist", "executing velocity command", "coordinates",
})

# Forbidden sets are the union of the *other* frames' mental/mechanical
# markers; first-person mental verbs and the multiword mechanical surface
# strings are what actually distinguish the idioms, so those are the
# cross-frame contraband. ("coordinates" appears in the agentive dialogues
# too, so it is required-only, never forbidden.)
_MENTAL_PHRASES = frozenset({"i believe", "i intend", "i want", "i notice", "i think"})
_TELEO_PHRASES = frozenset({"the goal of", "purpose", "the function of", "objective",
                            "designed"})
_MECH_PHRASES = frozenset({"odometry reading", "publishing twist",
                           "executing velocity command"})


@dataclass(frozen=True)
class LexiconSpec:
    required: dict[Frame, tuple[frozenset[str], ...]]
    forbidden: dict[Frame, frozenset[str]]


DEFAULT_LEXICON = LexiconSpec(
    required={
        Frame.AGENTIVE: (AGENTIVE_MARKERS,),
        Frame.TELEOLOGICAL: (TELEOLOGICAL_MARKERS,),
        Frame.MECHANISTIC: (MECHANISTIC_MARKERS,),
    },
    forbidden={
        Frame.AGENTIVE: _TELEO_PHRASES | _MECH_PHRASES,
        Frame.TELEOLOGICAL: _MENTAL_PHRASES | _MECH_PHRASES,
        Frame.MECHANISTIC: _MENTAL_PHRASES | _TELEO_PHRASES,
    },
)


@dataclass(frozen=True)
class LexiconViolation:
    kind: str  # missing_marker | forbidden_marker
    frame: Frame
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}[{self.frame.value}]: {self.detail}"


def _marker_present(text: str, marker: str) -> bool:
    pattern = r"\b" + re.escape(marker).replace(r"\ ", r"\s+") + r"\b"
    return re.search(pattern, text, re.IGNORECASE) is not None


def check_lexicon(utterance: Utterance, spec: LexiconSpec = DEFAULT_LEXICON
                  ) -> list[LexiconViolation]:
    """Every required-marker absence and forbidden-marker presence; empty = compliant."""
    violations: list[LexiconViolation] = []
    text = utterance.text
    for marker_set in spec.required.get(utterance.frame, ()):
        if not any(_marker_present(text, m) for m in marker_set):
            violations.append(LexiconViolation(
                "missing_marker", utterance.frame,
                f"none of {sorted(marker_set)} present"))
    for marker in sorted(spec.forbidden.get(utterance.frame, ())):
        if _marker_present(text, marker):
            violations.append(LexiconViolation("forbidden_marker", utterance.frame, marker))
    return violations


# ---------------------------------------------------------------------------
# Template rendering
# ---------------------------------------------------------------------------

# Every reachable (action, primary rationale tag) pair; coverage is enforced
# per frame at load time and exhaustively in tests.
TEMPLATE_KEYS: tuple[str, ...] = (
    "move.user_request",
    "move.free_choice",
    "chat.position_report",
    "chat.state_report",
    "chat.arrival_report",
    "chat.idle_report",
    "chat.goal_report",
    "chat.clarification",
    "chat.smalltalk",
)


class TemplateLibrary:
    """Per-frame template packs loaded from data files; reload() for dev mode."""

    def __init__(self, directory: Optional[Path] = None):
        self.directory = directory
        self._packs: dict[Frame, dict[str, str]] = {}
        self.reload()

    def reload(self) -> None:
        packs: dict[Frame, dict[str, str]] = {}
        for frame in Frame:
            if self.directory is not None:
                text = (self.directory / f"{frame.value}.json").read_text()
            else:
                text = resources.files("stancelab.data.templates").joinpath(
                    f"{frame.value}.json").read_text()
            pack = json.loads(text)
            missing = [k for k in TEMPLATE_KEYS if k not in pack]
            if missing:
                raise TemplateCoverageError(
                    f"{frame.value} template pack missing keys {missing}")
            packs[frame] = pack
        self._packs = packs

    def get(self, frame: Frame, key: str) -> str:
        pack = self._packs[frame]
        if key not in pack:
            raise TemplateCoverageError(f"no {frame.value} template for {key!r}")
        return pack[key]


_default_library: Optional[TemplateLibrary] = None


def default_templates() -> TemplateLibrary:
    global _default_library
    if _default_library is None:
        _default_library = TemplateLibrary()
    return _default_library


def fmt2(value: float) -> str:
    v = 0.0 if abs(value) < 0.005 else value
    return f"{v:.2f}"


def _target_label(state: State, base: BeliefBase) -> Optional[str]:
    goal = state.nav.goal
    if goal is None:
        return None
    for belief in base.by_category(Category.LOCATIONS):
        x, y = belief.content.args[1]
        if abs(x - goal.x) < 1e-6 and abs(y - goal.y) < 1e-6:
            return belief.content.args[0]
    return None


def render_context(decision: ActionDecision, state: State, base: BeliefBase,
                   nav_config: NavConfig = NavConfig()) -> dict[str, str]:
    """All values any template may interpolate, formatted to two decimals."""
    pose = state.nav.pose
    position = base.get(Category.POSITION, "robot")
    conf = position.confidence if position is not None else 1.0

    if decision.action is Action.MOVE:
        target = decision.params.target
        label = decision.params.label
        subject = label
    else:
        target = state.nav.goal or pose
        label = (_target_label(state, base)
                 or nearest_waypoint_label(state)
                 or "target")
        subject = decision.params.subject or "that place"

    v, omega = pursuit_command(pose, (target.x, target.y), nav_config)
    progress = state.nav.progress if state.nav.progress is not None else 0.0
    return {
        "x": fmt2(pose.x),
        "y": fmt2(pose.y),
        "theta": fmt2(pose.theta),
        "conf_pct": str(int(round(conf * 100))),
        "label": str(label),
        "subject": str(subject),
        "gx": fmt2(target.x),
        "gy": fmt2(target.y),
        "progress_pct": str(int(round(progress * 100))),
        "lin_x": fmt2(v),
        "ang_z": fmt2(omega),
        "dist_goal": fmt2(pose.distance_to(target)),
    }


def render(decision: ActionDecision, state: State, base: BeliefBase, frame: Frame,
           templates: Optional[TemplateLibrary] = None,
           nav_config: NavConfig = NavConfig()) -> Utterance:
    """Deterministic template expansion of one decision in one frame."""
    library = templates or default_templates()
    key = f"{decision.action.value}.{decision.primary_tag}"
    template = library.get(frame, key)
    text = template.format(**render_context(decision, state, base, nav_config))
    topic = (decision.params.topic if decision.action is Action.CHAT
             else decision.primary_tag)
    return Utterance(text=text, frame=frame, topic=topic, provenance=Provenance.TEMPLATE)
