"""Pure update rules: desire promotion and event-driven state transitions.

Both functions are deterministic and total over well-formed inputs; replaying
the same event list from the same initial snapshot reproduces the same final
(state, beliefs, intentions) exactly.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

from .model import (
    Action,
    Belief,
    BeliefBase,
    Category,
    ChatParams,
    Desire,
    DesireOrigin,
    Event,
    EventKind,
    EventOrderError,
    Intent,
    IntentKind,
    Intention,
    IntentionStatus,
    MoveParams,
    NavState,
    Pose,
    RobotStatus,
    Source,
    State,
    USER_COMMAND_PRIORITY,
    prop,
)


def _move_target_from_belief(belief: Belief) -> Pose:
    x, y = belief.content.args[1]
    return Pose(float(x), float(y))


def promote(desires: Sequence[Desire], base: BeliefBase) -> list[Intention]:
    """Convert desires directly into intentions when a suitable action exists.

    Desires are visited in descending priority (ties by id); at most one move
    intention is emitted per call, chat intentions are unbounded. A goto desire
    with no matching locations belief degrades to a clarification chat.
    """
    ordered = sorted(desires, key=lambda d: (-d.priority, d.id))
    intentions: list[Intention] = []
    move_taken = False
    for d in ordered:
        goal = d.goal
        if goal.predicate == "goto":
            label = goal.args[0]
            belief = base.get(Category.LOCATIONS, label)
            if belief is None:
                intentions.append(
                    Intention(Action.CHAT, ChatParams(topic="clarification", subject=label))
                )
            elif not move_taken:
                intentions.append(
                    Intention(Action.MOVE, MoveParams(_move_target_from_belief(belief), label))
                )
                move_taken = True
            # a lower-priority goto with a known target stays queued as a desire
        elif goal.predicate == "respond":
            intentions.append(Intention(Action.CHAT, ChatParams(topic=goal.args[0])))
    return intentions


ARRIVAL_NEARNESS = 0.20  # idle within this of a waypoint counts as "arrived there"


def nearest_waypoint_label(state: State, tolerance: float = ARRIVAL_NEARNESS) -> Optional[str]:
    best: Optional[tuple[float, str]] = None
    for label, wp in state.env.items():
        d = state.nav.pose.distance_to(wp.position)
        if d <= tolerance and (best is None or d < best[0]):
            best = (d, label)
    return best[1] if best else None


def query_topic(query: str, state: State) -> str:
    """Refine a query into the report topic the renderer keys on."""
    if query == "position":
        return "position_report"
    if query == "state":
        if state.nav.engaged:
            return "state_report"
        if nearest_waypoint_label(state) is not None:
            return "arrival_report"
        return "idle_report"
    if query == "goal":
        return "goal_report" if state.nav.goal is not None else "idle_report"
    raise ValueError(f"unknown query {query!r}")


def desire_from_intent(intent: Intent, desire_id: str, state: State) -> Desire:
    """The desire a parsed command gives rise to."""
    if intent.kind in (IntentKind.GOTO, IntentKind.FREE_CHOICE) and intent.label:
        goal = prop("goto", intent.label)
    elif intent.kind is IntentKind.QUERY and intent.query:
        goal = prop("respond", query_topic(intent.query, state))
    elif intent.kind is IntentKind.SMALLTALK:
        goal = prop("respond", "smalltalk")
    else:
        goal = prop("respond", "clarification")
    return Desire(id=desire_id, goal=goal, priority=USER_COMMAND_PRIORITY,
                  origin=DesireOrigin.USER_COMMAND)


def _position_belief(pose: Pose, confidence: float) -> Belief:
    return Belief(
        category=Category.POSITION,
        content=prop("at", "robot", (pose.x, pose.y)),
        confidence=confidence,
        source=Source.ODOMETRY,
    )


def _navigation_belief(status: RobotStatus) -> Belief:
    return Belief(
        category=Category.NAVIGATION,
        content=prop("status", status.value),
        confidence=1.0,
        source=Source.NAVIGATION,
    )


def apply_event(
    state: State,
    base: BeliefBase,
    event: Event,
    intentions: Sequence[Intention] = (),
    last_t: Optional[float] = None,
) -> tuple[State, BeliefBase, list[Desire], tuple[Intention, ...]]:
    """Apply one event to the agent snapshot.

    Returns the updated state, belief base, any newly generated desires, and
    the (possibly status-updated) intention tuple. Raises EventOrderError on
    time regression.
    """
    if last_t is not None and event.t < last_t:
        raise EventOrderError(f"event at t={event.t} precedes last t={last_t}")

    kind = event.kind
    payload = event.payload
    new_desires: list[Desire] = []
    intentions = tuple(intentions)

    if kind in (EventKind.TICK, EventKind.NAV_PROGRESS):
        pose = Pose.from_list(payload["pose"])
        base = base.upsert(_position_belief(pose, float(payload["confidence"])))
        if kind is EventKind.NAV_PROGRESS:
            progress = min(1.0, max(0.0, float(payload["progress"])))
            if state.nav.goal is not None:
                nav = replace(state.nav, pose=pose, progress=progress)
            else:
                nav = replace(state.nav, pose=pose)
        else:
            nav = replace(state.nav, pose=pose)
        state = replace(state, nav=nav)

    elif kind is EventKind.USER_UTTERANCE:
        state = replace(state, user=replace(state.user, last_utterance=payload["text"]))

    elif kind is EventKind.COMMAND_PARSED:
        intent = Intent.from_dict(payload["intent"])
        state = replace(state, user=replace(state.user, intent=intent))
        base = base.upsert(Belief(
            category=Category.USER_INTENT,
            content=prop("intends_user", intent.kind.value),
            confidence=0.9,
            source=Source.USER_INPUT,
        ))
        new_desires.append(desire_from_intent(intent, payload["desire_id"], state))

    elif kind is EventKind.NAV_GOAL_SET:
        target = Pose.from_list(payload["target"])
        label = payload["label"]
        nav = NavState(pose=state.nav.pose, goal=target, progress=0.0, engaged=True)
        state = replace(state, nav=nav, robot=replace(state.robot, status=RobotStatus.NAVIGATING))
        base = base.upsert(_navigation_belief(RobotStatus.NAVIGATING))
        updated = []
        activated = False
        for i in intentions:
            if (not activated and i.action is Action.MOVE
                    and i.status is IntentionStatus.PENDING and i.params.label == label):
                updated.append(i.with_status(IntentionStatus.ACTIVE))
                activated = True
            else:
                updated.append(i)
        intentions = tuple(updated)

    elif kind is EventKind.NAV_GOAL_REACHED:
        pose = Pose.from_list(payload["pose"])
        nav = NavState(pose=pose, goal=None, progress=None, engaged=False)
        state = replace(state, nav=nav, robot=replace(state.robot, status=RobotStatus.IDLE))
        base = base.upsert(_navigation_belief(RobotStatus.IDLE))
        intentions = tuple(
            i.with_status(IntentionStatus.SUCCEEDED)
            if i.action is Action.MOVE and i.status is IntentionStatus.ACTIVE else i
            for i in intentions
        )

    elif kind is EventKind.LLM_RESPONSE:
        topic = payload["topic"]
        updated = []
        completed = False
        for i in intentions:
            if (not completed and i.action is Action.CHAT
                    and i.status is IntentionStatus.PENDING and i.params.topic == topic):
                updated.append(i.with_status(IntentionStatus.SUCCEEDED))
                completed = True
            else:
                updated.append(i)
        intentions = tuple(updated)

    elif kind in (EventKind.SESSION_START, EventKind.FRAME_SWITCH, EventKind.ERROR):
        pass  # no effect on state, beliefs or desires

    return state, base, new_desires, intentions
