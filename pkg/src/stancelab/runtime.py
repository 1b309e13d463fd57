"""Session runtime: one robot, one world, one event-sourced log.

Drives the full loop — parse, desire, promote, decide, execute, render — in
simulated time (integer ticks of dt seconds). Nothing here reads the wall
clock, so a session is a pure function of (world, config, stimuli schedule),
which is what makes replay and cross-frame trace comparison exact.
"""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import sim
from .frames import (
    Frame,
    Provenance,
    TemplateLibrary,
    Utterance,
    check_lexicon,
    default_templates,
    parse_frame,
    render,
    select_frame,
)
from .gateway import (
    GatewayConfig,
    GatewayUnavailable,
    LlmGateway,
    ReplayGateway,
    build_report_bundle,
)
from .model import (
    Action,
    Belief,
    BeliefBase,
    Category,
    ChatParams,
    Desire,
    Event,
    EventKind,
    IntentKind,
    Intention,
    IntentionStatus,
    NavState,
    RobotSelf,
    RobotStatus,
    Source,
    State,
    UserModel,
    prop,
)
from .policy import ActionDecision, LlmEngine, PolicyResult, RulesEngine, free_choice_label, parse_command
from .sessionlog import LogRecord, SessionLog, SessionLogError
from .sim import KinematicState, NavConfig, PlanExecution
from .transition import apply_event, promote
from .world import WorldSpec, normalize_text


class RuntimeError_(Exception):
    code = "runtime_error"


@dataclass(frozen=True)
class RuntimeConfig:
    engine: str = "rules"  # rules | llm
    seed: int = 0
    default_frame: Frame = Frame.AGENTIVE
    identity: str = "rover"
    nav: NavConfig = NavConfig()
    fsync: bool = False


def initial_state(world: WorldSpec, identity: str = "rover") -> State:
    return State(
        env=world.env(),
        robot=RobotSelf(identity=identity, capabilities=("move", "chat"),
                        status=RobotStatus.IDLE),
        user=UserModel(),
        nav=NavState(pose=world.spawn),
    )


def initial_beliefs(world: WorldSpec, identity: str = "rover") -> BeliefBase:
    base = BeliefBase()
    base = base.upsert(Belief(Category.IDENTITY, prop("identity", identity),
                              1.0, Source.SYSTEM))
    for capability in ("move", "chat"):
        base = base.upsert(Belief(Category.CAPABILITY, prop("capability", capability),
                                  1.0, Source.CONFIGURATION))
    for wp in world.waypoints:
        base = base.upsert(Belief(
            Category.LOCATIONS,
            prop("located", wp.label, (wp.position[0], wp.position[1])),
            1.0, Source.CONFIGURATION))
    base = base.upsert(Belief(
        Category.POSITION, prop("at", "robot", (world.spawn.x, world.spawn.y)),
        world.defaults.position_confidence, Source.ODOMETRY))
    base = base.upsert(Belief(Category.NAVIGATION, prop("status", "idle"),
                              1.0, Source.NAVIGATION))
    return base


class SessionRuntime:
    """Single-session engine; all mutation happens on one logical thread."""

    def __init__(self, world: WorldSpec, config: RuntimeConfig = RuntimeConfig(),
                 log_path: Optional[Path] = None,
                 gateway=None,
                 templates: Optional[TemplateLibrary] = None):
        self.world = world
        self.config = config
        self.nav_config = replace(config.nav,
                                  arrival_tolerance=world.defaults.arrival_tolerance)
        self.grid = sim.planning_grid(world, self.nav_config)
        self.templates = templates or default_templates()

        self.state = initial_state(world, config.identity)
        self.beliefs = initial_beliefs(world, config.identity)
        self.desires: list[Desire] = []
        self.intentions: list[Intention] = []
        self._intent_desires: list[Optional[str]] = []
        self._display_intention: Optional[Intention] = None

        self.frame = config.default_frame
        self.kin = KinematicState(pose=world.spawn)
        self.exec: Optional[PlanExecution] = None
        self._active_label: Optional[str] = None

        self.log = SessionLog(log_path, fsync=config.fsync)
        self.listeners: list[Callable[[LogRecord], None]] = []
        self._ticks = 0
        self._seq = 0
        self._turns = 0
        self._last_t: Optional[float] = None
        self._recent_events: deque[dict] = deque(maxlen=6)
        self.closed = False

        if config.engine == "llm":
            self.gateway = gateway if gateway is not None else LlmGateway(GatewayConfig.from_env())
            self.engine = LlmEngine(world, config.seed, self.gateway,
                                    context_provider=self._prompt_context)
        else:
            self.gateway = None
            self.engine = RulesEngine(world=world, seed=config.seed)

    # -- time ---------------------------------------------------------------

    @property
    def t(self) -> float:
        return self._ticks * self.nav_config.dt

    @property
    def seq(self) -> int:
        return self._seq

    @property
    def idle(self) -> bool:
        return self.exec is None

    # -- internals ----------------------------------------------------------

    def _prompt_context(self) -> dict:
        return {
            "desires": [d.to_dict() for d in self.desires],
            "intention": self._display_intention.to_dict() if self._display_intention else None,
            "recent_events": list(self._recent_events),
        }

    def _current_intention(self) -> Optional[Intention]:
        for i in self.intentions:
            if i.action is Action.MOVE and i.status is IntentionStatus.ACTIVE:
                return i
        if self.intentions:
            return self.intentions[-1]
        return self._display_intention

    def _emit(self, kind: EventKind, payload: dict,
              action: Optional[ActionDecision] = None) -> Event:
        if self.closed:
            raise SessionLogError("session is closed")
        event = Event(t=self.t, kind=kind, payload=payload)
        state, beliefs, new_desires, intentions = apply_event(
            self.state, self.beliefs, event, tuple(self.intentions), self._last_t)
        self.state, self.beliefs = state, beliefs
        self._last_t = event.t
        self.frame = select_frame(self.frame, event)

        # fold status changes back in and retire completed intentions
        retired: Optional[Intention] = None
        live: list[Intention] = []
        live_desires: list[Optional[str]] = []
        for idx, intention in enumerate(intentions):
            if intention.status in (IntentionStatus.SUCCEEDED, IntentionStatus.FAILED,
                                    IntentionStatus.CANCELLED):
                retired = intention
                did = self._intent_desires[idx]
                if did is not None:
                    self.desires = [d for d in self.desires if d.id != did]
            else:
                live.append(intention)
                live_desires.append(self._intent_desires[idx])
        self.intentions = live
        self._intent_desires = live_desires
        self.desires.extend(new_desires)
        if retired is not None:
            self._display_intention = retired

        snapshot_intention = retired or self._current_intention()
        record = LogRecord(
            seq=self._seq,
            event=event,
            beliefs=self.beliefs,
            desires=tuple(self.desires),
            intention=snapshot_intention,
            action=action.to_dict() if action is not None else None,
        )
        self.log.append(record)
        self._seq += 1
        self._recent_events.append({"t": event.t, "kind": kind.value})
        for listener in self.listeners:
            listener(record)
        return event

    def _adopt(self, intentions: Sequence[Intention], desire_id: Optional[str]) -> None:
        for intention in intentions:
            self.intentions.append(intention)
            self._intent_desires.append(desire_id)
        if intentions:
            self._display_intention = intentions[0]

    def _cancel_active_move(self) -> None:
        for idx, intention in enumerate(self.intentions):
            if intention.action is Action.MOVE and intention.status in (
                    IntentionStatus.PENDING, IntentionStatus.ACTIVE):
                cancelled = intention.with_status(IntentionStatus.CANCELLED)
                did = self._intent_desires[idx]
                self.intentions.pop(idx)
                self._intent_desires.pop(idx)
                if did is not None:
                    self.desires = [d for d in self.desires if d.id != did]
                self._display_intention = cancelled
                self.exec = None
                self._active_label = None
                return

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        payload = {
            "world": self.world.to_dict(),
            "engine": self.config.engine,
            "seed": self.config.seed,
            "default_frame": self.config.default_frame.value,
            "identity": self.config.identity,
            "nav_config": dataclasses.asdict(self.nav_config),
            "log_version": 1,
        }
        self._emit(EventKind.SESSION_START, payload)

    def close(self) -> None:
        self.log.close()
        self.closed = True

    # -- commands -----------------------------------------------------------

    def switch_frame(self, frame_name: str) -> Frame:
        frame = parse_frame(frame_name)
        self._emit(EventKind.FRAME_SWITCH, {"frame": frame.value})
        return frame

    def handle_message(self, text: str) -> Utterance:
        """One user turn: log, parse, decide, execute, reply in the active frame."""
        if not text or not text.strip():
            raise RuntimeError_("message text must be nonempty")
        self._emit(EventKind.USER_UTTERANCE, {"text": text})

        intent = parse_command(text, self.world)
        if intent.kind is IntentKind.FREE_CHOICE and intent.label is None:
            label = free_choice_label(self.world, self.config.seed,
                                      f"{self.t!r}:{normalize_text(text)}")
            intent = replace(intent, label=label, resolved=True)
        self._turns += 1
        desire_id = f"d{self._turns:04d}"
        cmd_event = self._emit(EventKind.COMMAND_PARSED,
                               {"intent": intent.to_dict(), "desire_id": desire_id})

        promoted = promote([d for d in self.desires if d.id == desire_id], self.beliefs)

        result: PolicyResult = self.engine.decide(self.state, self.beliefs, cmd_event)
        for error in result.errors:
            self._emit(EventKind.ERROR, dict(error))
        decision = result.decision

        if decision.action is Action.MOVE:
            decision = self._execute_move(decision, promoted, desire_id)
        else:
            self._adopt(promoted, desire_id)

        return self._reply(decision, result)

    def _execute_move(self, decision: ActionDecision, promoted: Sequence[Intention],
                      desire_id: Optional[str]) -> ActionDecision:
        """Plan and commit a move; on an unreachable goal degrade to clarification."""
        target = decision.params.target
        try:
            nav_plan = sim.plan(self.grid, self.kin.pose, target,
                                self.nav_config.arrival_tolerance)
        except sim.SimError as exc:
            failed = [i.with_status(IntentionStatus.FAILED)
                      if i.action is Action.MOVE else i for i in promoted]
            if failed:
                self._display_intention = failed[0]
            self.desires = [d for d in self.desires if d.id != desire_id]
            self._emit(EventKind.ERROR, {
                "code": getattr(exc, "code", "sim_error"),
                "message": str(exc),
                "stage": "execution",
            })
            return ActionDecision(Action.CHAT,
                                  ChatParams(topic="clarification",
                                             subject=decision.params.label),
                                  ("clarification",))

        self._cancel_active_move()
        self._adopt(promoted, desire_id)
        self.exec = PlanExecution.start(nav_plan)
        self._active_label = decision.params.label
        self._emit(EventKind.NAV_GOAL_SET, {
            "label": decision.params.label,
            "target": target.to_list(),
            "path": [[x, y] for x, y in nav_plan.path],
        }, action=decision)
        return decision

    def _reply(self, decision: ActionDecision, result: PolicyResult) -> Utterance:
        utterance = render(decision, self.state, self.beliefs, self.frame,
                           self.templates, self.nav_config)
        gateway_meta: dict = {}
        if result.gateway_raw is not None:
            gateway_meta["decision_raw"] = result.gateway_raw

        if self.config.engine == "llm" and self.gateway is not None \
                and result.gateway_raw is not None:
            overlay = self._llm_overlay(decision, utterance)
            if overlay is not None:
                utterance, report_raw = overlay
                gateway_meta["report_raw"] = report_raw

        payload = dict(utterance.to_dict())
        if gateway_meta:
            payload["gateway"] = gateway_meta
        self._emit(EventKind.LLM_RESPONSE, payload,
                   action=decision if decision.action is Action.CHAT else None)
        return utterance

    def _llm_overlay(self, decision: ActionDecision,
                     template_utterance: Utterance) -> Optional[tuple[Utterance, str]]:
        """Ask the reporter profile for prose; keep it only if lexicon-compliant."""
        bundle = build_report_bundle(self.state, self.beliefs,
                                     self.state.user.last_utterance or "",
                                     self.frame.value, self._prompt_context())
        try:
            completion = self.gateway.complete(bundle)
        except GatewayUnavailable as exc:
            self._emit(EventKind.ERROR, {"code": "gateway_unavailable",
                                         "message": str(exc), "stage": "report"})
            return None
        candidate_text = completion.text.strip()
        if not candidate_text:
            self._emit(EventKind.ERROR, {"code": "lexicon_violation",
                                         "message": "empty report",
                                         "stage": "report", "raw": completion.text})
            return None
        candidate = Utterance(text=candidate_text, frame=self.frame,
                              topic=template_utterance.topic, provenance=Provenance.LLM)
        violations = check_lexicon(candidate)
        if violations:
            self._emit(EventKind.ERROR, {
                "code": "lexicon_violation",
                "message": "; ".join(str(v) for v in violations),
                "stage": "report",
                "raw": completion.text,
            })
            return None
        return candidate, completion.text

    # -- simulated time -----------------------------------------------------

    def tick(self) -> None:
        """Advance one dt of simulated time, emitting exactly one nav event."""
        self._ticks += 1
        noise_seed = None
        if self.nav_config.odometry_noise:
            noise_seed = (self.config.seed * 1_000_003 + self._ticks) & 0x7FFFFFFF

        if self.exec is not None:
            self.exec, self.kin, progress, reached = sim.step(
                self.exec, self.kin, self.nav_config.dt, self.nav_config)
            pose = sim.odometry(self.kin, noise_seed, self.nav_config)
            if reached:
                label = self._active_label or "target"
                self.exec = None
                self._active_label = None
                self._emit(EventKind.NAV_GOAL_REACHED, {
                    "label": label, "pose": pose.to_list(), "progress": 1.0})
            else:
                self._emit(EventKind.NAV_PROGRESS, {
                    "pose": pose.to_list(), "progress": progress,
                    "confidence": self.world.defaults.position_confidence})
        else:
            pose = sim.odometry(self.kin, noise_seed, self.nav_config)
            self._emit(EventKind.TICK, {
                "pose": pose.to_list(),
                "confidence": self.world.defaults.position_confidence})

    def advance_seconds(self, seconds: float) -> None:
        for _ in range(int(round(seconds / self.nav_config.dt))):
            self.tick()

    def advance_to(self, t: float) -> None:
        while (self._ticks + 1) * self.nav_config.dt <= t + 1e-9:
            self.tick()

    def advance_until_idle(self, cap_seconds: float = 180.0) -> bool:
        deadline = self.t + cap_seconds
        while self.exec is not None and self.t < deadline - 1e-9:
            self.tick()
        return self.exec is None


# ---------------------------------------------------------------------------
# Rebuild-from-log (replay driver)
# ---------------------------------------------------------------------------


def _gateway_outcomes(stored: list[dict]) -> tuple[list, list]:
    decision_q: list = []
    report_q: list = []
    for rec in stored:
        event = rec["event"]
        payload = event["payload"]
        if event["kind"] == "error":
            stage = payload.get("stage")
            if stage == "decision":
                if payload.get("code") == "gateway_unavailable":
                    decision_q.append(("unavailable", payload.get("message", "")))
                else:
                    decision_q.append(("reply", payload.get("raw", "")))
            elif stage == "report":
                if payload.get("code") == "gateway_unavailable":
                    report_q.append(("unavailable", payload.get("message", "")))
                else:
                    report_q.append(("reply", payload.get("raw", "")))
        elif event["kind"] == "llm_response":
            meta = payload.get("gateway") or {}
            if meta.get("decision_raw") is not None:
                decision_q.append(("reply", meta["decision_raw"]))
            if meta.get("report_raw") is not None:
                report_q.append(("reply", meta["report_raw"]))
    return decision_q, report_q


def rebuild_from_log(stored: list[dict]) -> SessionRuntime:
    """Re-run a logged session from its header config and recorded stimuli."""
    first = stored[0]["event"]
    if first["kind"] != EventKind.SESSION_START.value:
        raise SessionLogError("log does not begin with a session_start record")
    header = first["payload"]

    world = WorldSpec.from_dict(header["world"])
    nav_kwargs = dict(header.get("nav_config", {}))
    config = RuntimeConfig(
        engine=header["engine"],
        seed=header["seed"],
        default_frame=parse_frame(header["default_frame"]),
        identity=header.get("identity", "rover"),
        nav=NavConfig(**nav_kwargs) if nav_kwargs else NavConfig(),
    )

    gateway = None
    if config.engine == "llm":
        gateway = ReplayGateway(*_gateway_outcomes(stored))

    runtime = SessionRuntime(world, config, log_path=None, gateway=gateway)
    runtime.start()
    for rec in stored:
        event = rec["event"]
        kind = event["kind"]
        if kind == EventKind.USER_UTTERANCE.value:
            runtime.advance_to(event["t"])
            runtime.handle_message(event["payload"]["text"])
        elif kind == EventKind.FRAME_SWITCH.value:
            runtime.advance_to(event["t"])
            runtime.switch_frame(event["payload"]["frame"])
    runtime.advance_to(stored[-1]["event"]["t"])
    return runtime
