"""Core agent model: state snapshot, propositions, beliefs, desires, intentions, events.

Everything in this module is an immutable value. Updates return new objects,
so a session can snapshot its whole agent state at every transition and the
same event sequence always reproduces the same snapshots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Optional

TWO_PI = 2.0 * math.pi


class ModelError(Exception):
    """Base class for model-level violations."""

    code = "model_error"


class RegistryError(ModelError):
    code = "unknown_predicate"


class NotEvaluableError(RegistryError):
    """Predicate is registered for goal expressions only."""

    code = "predicate_not_evaluable"


class BeliefDomainError(ModelError):
    code = "belief_domain"


class BeliefSchemaError(ModelError):
    code = "belief_schema"


class EventError(ModelError):
    code = "event_invalid"


class EventOrderError(EventError):
    code = "event_order"


def normalize_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    t = math.fmod(theta, TWO_PI)
    if t <= -math.pi:
        t += TWO_PI
    elif t > math.pi:
        t -= TWO_PI
    return t


@dataclass(frozen=True)
class Pose:
    """Planar pose; theta is always kept in (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ModelError("pose coordinates must be finite")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, other: "Pose | tuple[float, float]") -> float:
        ox, oy = (other.x, other.y) if isinstance(other, Pose) else other
        return math.hypot(self.x - ox, self.y - oy)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.theta]

    @classmethod
    def from_list(cls, values: Iterable[float]) -> "Pose":
        vals = list(values)
        if len(vals) == 2:
            return cls(vals[0], vals[1], 0.0)
        return cls(vals[0], vals[1], vals[2])


# ---------------------------------------------------------------------------
# Propositions and the predicate registry
# ---------------------------------------------------------------------------

Term = Any  # labels (str), numbers, or (x, y) pairs


@dataclass(frozen=True)
class PredicateSpec:
    name: str
    min_arity: int
    max_arity: int
    # Which term distinguishes beliefs of the same category; None keys on the
    # predicate name itself (singleton per category).
    key_index: Optional[int]
    evaluable: bool


# Closed registry. at/2 takes an optional third tolerance term; goto and
# respond are goal-only predicates used in desires, never evaluated by holds().
PREDICATES: dict[str, PredicateSpec] = {
    "at": PredicateSpec("at", 2, 3, key_index=0, evaluable=True),
    "located": PredicateSpec("located", 2, 2, key_index=0, evaluable=True),
    "status": PredicateSpec("status", 1, 1, key_index=None, evaluable=True),
    "intends_user": PredicateSpec("intends_user", 1, 1, key_index=None, evaluable=True),
    "capability": PredicateSpec("capability", 1, 1, key_index=0, evaluable=True),
    "identity": PredicateSpec("identity", 1, 1, key_index=None, evaluable=True),
    "goto": PredicateSpec("goto", 1, 1, key_index=0, evaluable=False),
    "respond": PredicateSpec("respond", 1, 1, key_index=0, evaluable=False),
}


def _freeze_term(term: Term) -> Term:
    if isinstance(term, list):
        return tuple(_freeze_term(t) for t in term)
    if isinstance(term, tuple):
        return tuple(_freeze_term(t) for t in term)
    return term


@dataclass(frozen=True)
class Proposition:
    predicate: str
    args: tuple = ()

    def __post_init__(self) -> None:
        spec = PREDICATES.get(self.predicate)
        if spec is None:
            raise RegistryError(f"unknown predicate {self.predicate!r}")
        object.__setattr__(self, "args", _freeze_term(tuple(self.args)))
        if not (spec.min_arity <= len(self.args) <= spec.max_arity):
            raise RegistryError(
                f"predicate {self.predicate!r} takes {spec.min_arity}..{spec.max_arity} "
                f"terms, got {len(self.args)}"
            )

    @property
    def key_term(self) -> Term:
        spec = PREDICATES[self.predicate]
        if spec.key_index is None:
            return self.predicate
        return self.args[spec.key_index]

    def to_dict(self) -> dict:
        return {"predicate": self.predicate, "args": _to_jsonable(self.args)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Proposition":
        return cls(data["predicate"], _freeze_term(tuple(data["args"])))


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    return value


def prop(predicate: str, *args: Term) -> Proposition:
    return Proposition(predicate, tuple(args))


# ---------------------------------------------------------------------------
# State snapshot
# ---------------------------------------------------------------------------


class RobotStatus(str, Enum):
    IDLE = "idle"
    NAVIGATING = "navigating"
    ERROR = "error"


class IntentKind(str, Enum):
    GOTO = "goto"
    QUERY = "query"
    FREE_CHOICE = "free_choice"
    SMALLTALK = "smalltalk"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Intent:
    """Parsed communicative intent behind a user utterance."""

    kind: IntentKind
    raw: str
    label: Optional[str] = None  # goto/free_choice target (resolved or not)
    resolved: bool = False
    query: Optional[str] = None  # position | state | goal

    def __post_init__(self) -> None:
        if self.kind is IntentKind.GOTO and not self.label:
            raise ModelError("goto intent requires a label, resolved or not")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "raw": self.raw,
            "label": self.label,
            "resolved": self.resolved,
            "query": self.query,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Intent":
        return cls(
            kind=IntentKind(data["kind"]),
            raw=data["raw"],
            label=data.get("label"),
            resolved=bool(data.get("resolved", False)),
            query=data.get("query"),
        )


@dataclass(frozen=True)
class RobotSelf:
    identity: str = "rover"
    capabilities: tuple[str, ...] = ("move", "chat")
    status: RobotStatus = RobotStatus.IDLE


@dataclass(frozen=True)
class UserModel:
    last_utterance: Optional[str] = None
    intent: Optional[Intent] = None


@dataclass(frozen=True)
class NavState:
    pose: Pose
    goal: Optional[Pose] = None
    progress: Optional[float] = None
    engaged: bool = False

    def __post_init__(self) -> None:
        if (self.goal is None) != (self.progress is None):
            raise ModelError("nav progress must be present exactly when a goal is")
        if self.progress is not None and not (0.0 <= self.progress <= 1.0):
            raise ModelError("nav progress must lie in [0, 1]")


@dataclass(frozen=True)
class State:
    """One structured snapshot: environment x robot x user x navigation."""

    env: Mapping[str, "WaypointLike"]
    robot: RobotSelf
    user: UserModel
    nav: NavState


class WaypointLike:
    """Anything with .label, .position (x, y) and optional .facing."""

    label: str
    position: tuple[float, float]


# ---------------------------------------------------------------------------
# Beliefs
# ---------------------------------------------------------------------------


class Category(str, Enum):
    IDENTITY = "identity"
    CAPABILITY = "capability"
    POSITION = "position"
    LOCATIONS = "locations"
    NAVIGATION = "navigation"
    USER_INTENT = "user_intent"


class Source(str, Enum):
    SYSTEM = "system"
    CONFIGURATION = "configuration"
    ODOMETRY = "odometry"
    NAVIGATION = "navigation"
    USER_INPUT = "user_input"


CATEGORY_PREDICATES: dict[Category, str] = {
    Category.IDENTITY: "identity",
    Category.CAPABILITY: "capability",
    Category.POSITION: "at",
    Category.LOCATIONS: "located",
    Category.NAVIGATION: "status",
    Category.USER_INTENT: "intends_user",
}


@dataclass(frozen=True)
class Belief:
    category: Category
    content: Proposition
    confidence: float
    source: Source

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise BeliefDomainError(f"confidence {self.confidence} outside [0, 1]")
        expected = CATEGORY_PREDICATES[self.category]
        if self.content.predicate != expected:
            raise BeliefSchemaError(
                f"category {self.category.value} requires predicate {expected!r}, "
                f"got {self.content.predicate!r}"
            )

    @property
    def key(self) -> tuple[str, Term]:
        return (self.category.value, self.content.key_term)

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "content": self.content.to_dict(),
            "confidence": self.confidence,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Belief":
        return cls(
            category=Category(data["category"]),
            content=Proposition.from_dict(data["content"]),
            confidence=data["confidence"],
            source=Source(data["source"]),
        )


@dataclass(frozen=True)
class BeliefBase:
    """Upsert-keyed belief set: one belief per (category, key term)."""

    _items: tuple[Belief, ...] = ()

    def upsert(self, belief: Belief) -> "BeliefBase":
        key = belief.key
        items = tuple(b for b in self._items if b.key != key) + (belief,)
        return BeliefBase(items)

    def get(self, category: Category, key_term: Term) -> Optional[Belief]:
        for b in self._items:
            if b.key == (category.value, key_term):
                return b
        return None

    def by_category(self, category: Category) -> list[Belief]:
        return [b for b in self._items if b.category is category]

    def sorted(self) -> list[Belief]:
        return sorted(self._items, key=lambda b: (b.category.value, str(b.content.key_term)))

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def to_list(self) -> list[dict]:
        return [b.to_dict() for b in self.sorted()]

    @classmethod
    def from_list(cls, data: Iterable[Mapping]) -> "BeliefBase":
        base = cls()
        for item in data:
            base = base.upsert(Belief.from_dict(item))
        return base


def upsert_belief(base: BeliefBase, belief: Belief) -> BeliefBase:
    """Insert or replace the belief at its key; returns a new base."""
    return base.upsert(belief)


# ---------------------------------------------------------------------------
# Desires and intentions
# ---------------------------------------------------------------------------


class DesireOrigin(str, Enum):
    USER_COMMAND = "user_command"
    INTERNAL = "internal"


USER_COMMAND_PRIORITY = 0.5
INTERNAL_PRIORITY = 0.1


@dataclass(frozen=True)
class Desire:
    id: str
    goal: Proposition
    priority: float
    origin: DesireOrigin

    def __post_init__(self) -> None:
        if not (0.0 <= self.priority <= 1.0):
            raise ModelError(f"desire priority {self.priority} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "goal": self.goal.to_dict(),
            "priority": self.priority,
            "origin": self.origin.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Desire":
        return cls(
            id=data["id"],
            goal=Proposition.from_dict(data["goal"]),
            priority=data["priority"],
            origin=DesireOrigin(data["origin"]),
        )


class Action(str, Enum):
    MOVE = "move"
    CHAT = "chat"


class IntentionStatus(str, Enum):
    PENDING = "pending"
    ACTIVE = "active"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    CANCELLED = "cancelled"


@dataclass(frozen=True)
class MoveParams:
    target: Pose
    label: str

    def to_dict(self) -> dict:
        return {"target": self.target.to_list(), "label": self.label}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MoveParams":
        return cls(target=Pose.from_list(data["target"]), label=data["label"])


@dataclass(frozen=True)
class ChatParams:
    topic: str
    addressee: str = "user"
    subject: Optional[str] = None

    def to_dict(self) -> dict:
        return {"topic": self.topic, "addressee": self.addressee, "subject": self.subject}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChatParams":
        return cls(topic=data["topic"], addressee=data.get("addressee", "user"),
                   subject=data.get("subject"))


def params_from_dict(action: Action, data: Mapping) -> "MoveParams | ChatParams":
    return MoveParams.from_dict(data) if action is Action.MOVE else ChatParams.from_dict(data)


@dataclass(frozen=True)
class Intention:
    action: Action
    params: "MoveParams | ChatParams"
    status: IntentionStatus = IntentionStatus.PENDING

    def with_status(self, status: IntentionStatus) -> "Intention":
        return replace(self, status=status)

    def to_dict(self) -> dict:
        return {
            "action": self.action.value,
            "params": self.params.to_dict(),
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Intention":
        action = Action(data["action"])
        return cls(
            action=action,
            params=params_from_dict(action, data["params"]),
            status=IntentionStatus(data["status"]),
        )


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


class EventKind(str, Enum):
    SESSION_START = "session_start"
    USER_UTTERANCE = "user_utterance"
    COMMAND_PARSED = "command_parsed"
    NAV_GOAL_SET = "nav_goal_set"
    NAV_PROGRESS = "nav_progress"
    NAV_GOAL_REACHED = "nav_goal_reached"
    FRAME_SWITCH = "frame_switch"
    LLM_RESPONSE = "llm_response"
    TICK = "tick"
    ERROR = "error"


# Required payload keys per kind; extra keys are allowed.
EVENT_PAYLOAD_KEYS: dict[EventKind, tuple[str, ...]] = {
    EventKind.SESSION_START: ("world", "engine", "seed", "default_frame"),
    EventKind.USER_UTTERANCE: ("text",),
    EventKind.COMMAND_PARSED: ("intent", "desire_id"),
    EventKind.NAV_GOAL_SET: ("label", "target", "path"),
    EventKind.NAV_PROGRESS: ("pose", "progress", "confidence"),
    EventKind.NAV_GOAL_REACHED: ("label", "pose"),
    EventKind.FRAME_SWITCH: ("frame",),
    EventKind.LLM_RESPONSE: ("text", "frame", "topic", "provenance"),
    EventKind.TICK: ("pose", "confidence"),
    EventKind.ERROR: ("code", "message"),
}


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.t) or self.t < 0.0:
            raise EventError(f"event time {self.t} must be finite and >= 0")
        missing = [k for k in EVENT_PAYLOAD_KEYS[self.kind] if k not in self.payload]
        if missing:
            raise EventError(f"{self.kind.value} payload missing keys {missing}")

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind.value, "payload": dict(self.payload)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Event":
        return cls(t=data["t"], kind=EventKind(data["kind"]), payload=dict(data["payload"]))


# ---------------------------------------------------------------------------
# holds: evaluate a proposition against a state snapshot
# ---------------------------------------------------------------------------

DEFAULT_AT_TOLERANCE = 1e-9
_POSITION_EPS = 1e-9


def _as_xy(term: Term) -> tuple[float, float]:
    if not (isinstance(term, tuple) and len(term) == 2):
        raise RegistryError(f"expected an (x, y) pair, got {term!r}")
    return (float(term[0]), float(term[1]))


def holds(state: State, phi: Proposition) -> bool:
    """Evaluate phi against the state snapshot. Pure; raises for goal-only predicates."""
    spec = PREDICATES.get(phi.predicate)
    if spec is None:
        raise RegistryError(f"unknown predicate {phi.predicate!r}")
    if not spec.evaluable:
        raise NotEvaluableError(f"predicate {phi.predicate!r} is goal-only")

    if phi.predicate == "at":
        entity = phi.args[0]
        if entity != "robot":
            return False
        target = _as_xy(phi.args[1])
        tol = float(phi.args[2]) if len(phi.args) > 2 else DEFAULT_AT_TOLERANCE
        return state.nav.pose.distance_to(target) <= tol

    if phi.predicate == "located":
        label = phi.args[0]
        wp = state.env.get(label)
        if wp is None:
            return False
        target = _as_xy(phi.args[1])
        return math.hypot(wp.position[0] - target[0], wp.position[1] - target[1]) <= _POSITION_EPS

    if phi.predicate == "status":
        return state.robot.status.value == phi.args[0]

    if phi.predicate == "intends_user":
        return state.user.intent is not None and state.user.intent.kind.value == phi.args[0]

    if phi.predicate == "capability":
        return phi.args[0] in state.robot.capabilities

    if phi.predicate == "identity":
        return state.robot.identity == phi.args[0]

    raise RegistryError(f"no evaluator for predicate {phi.predicate!r}")
