"""Session-oriented HTTP service.

REST for commands, one WebSocket stream per session for live records. Each
session runs on its own worker thread that owns all mutation; REST handlers
and stream readers only post commands or consume fan-out queues, so a slow
consumer can never delay the simulation loop.

Endpoints (wire examples in docs/service-api.md):
    POST   /sessions                     create a session
    GET    /sessions/{id}/state          current pose, frame, beliefs, desires, intention
    GET    /sessions/{id}/world          world geometry for renderers
    GET    /sessions/{id}/log            all records so far
    POST   /sessions/{id}/message        one user turn -> rendered utterance
    POST   /sessions/{id}/frame          switch the explanation frame
    POST   /sessions/{id}/advance        advance sim time (manual time-scale only)
    POST   /sessions/{id}/close          close the session
    WS     /sessions/{id}/stream?from_seq=k   ordered record feed with resume
"""

from __future__ import annotations

import asyncio
import queue
import threading
import time
import uuid
from collections import deque
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from .frames import FrameError, parse_frame
from .gateway import GatewayConfig
from .runtime import RuntimeConfig, RuntimeError_, SessionRuntime
from .sessionlog import LogRecord
from .world import WorldError, load_world

DROPPABLE_KINDS = ("tick", "nav_progress")


@dataclass
class ServiceConfig:
    time_scale: float = 1.0  # sim seconds per wall second; overridable per session
    idle_timeout: float = 900.0
    subscriber_buffer: int = 1024
    max_catchup_ticks: int = 400  # per scheduler pass, bounds a stalled worker
    llm: GatewayConfig = field(default_factory=GatewayConfig.from_env)


class _Subscriber:
    """Bounded fan-out buffer; ticks are droppable, everything else is not."""

    def __init__(self, maxlen: int):
        self.maxlen = maxlen
        self.buffer: deque[dict] = deque()
        self.lock = threading.Lock()
        self.overflowed = False

    def offer(self, item: dict) -> None:
        with self.lock:
            if len(self.buffer) >= self.maxlen:
                for i, queued in enumerate(self.buffer):
                    kind = queued.get("record", {}).get("event", {}).get("kind")
                    if kind in DROPPABLE_KINDS:
                        del self.buffer[i]
                        break
                else:
                    self.overflowed = True  # only undroppables left: evict reader
                    return
            self.buffer.append(item)

    def drain(self) -> list[dict]:
        with self.lock:
            items = list(self.buffer)
            self.buffer.clear()
            return items


@dataclass
class _Command:
    kind: str
    payload: dict
    reply: "queue.Queue[tuple[Optional[Any], Optional[Exception]]]" = field(
        default_factory=lambda: queue.Queue(maxsize=1))


class SessionWorker:
    """Owns one SessionRuntime; the only thread that mutates it."""

    def __init__(self, session_id: str, runtime: SessionRuntime,
                 time_scale: Optional[float], config: ServiceConfig):
        self.id = session_id
        self.runtime = runtime
        self.time_scale = time_scale  # None = manual
        self.config = config
        self.commands: "queue.Queue[_Command]" = queue.Queue()
        self.subscribers: list[_Subscriber] = []
        self._sub_lock = threading.Lock()
        self.status = "live"
        self._last_activity = time.monotonic()
        self._sim_ahead = 0.0
        runtime.listeners.append(self._on_record)
        self.thread = threading.Thread(target=self._run, name=f"session-{session_id}",
                                       daemon=True)

    # -- fan-out ------------------------------------------------------------

    def _on_record(self, record: LogRecord) -> None:
        message = {"type": "record", "record": record.to_dict()}
        with self._sub_lock:
            subscribers = list(self.subscribers)
        for sub in subscribers:
            sub.offer(message)

    def subscribe(self) -> _Subscriber:
        sub = _Subscriber(self.config.subscriber_buffer)
        with self._sub_lock:
            self.subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self._sub_lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    # -- command plane --------------------------------------------------------

    def post(self, kind: str, **payload) -> Any:
        if self.status != "live":
            raise SessionClosed(self.id)
        command = _Command(kind, payload)
        self.commands.put(command)
        result, error = command.reply.get()
        if error is not None:
            raise error
        return result

    def start(self) -> None:
        self.thread.start()

    # -- worker loop ----------------------------------------------------------

    def _run(self) -> None:
        self.runtime.start()
        last_wall = time.monotonic()
        while self.status == "live":
            timeout = 0.02 if self.time_scale is not None else 0.1
            try:
                command = self.commands.get(timeout=timeout)
            except queue.Empty:
                command = None
            if command is not None:
                self._execute(command)
                self._last_activity = time.monotonic()
                if self.status != "live":
                    break

            now = time.monotonic()
            if self.time_scale is not None:
                self._sim_ahead += (now - last_wall) * self.time_scale
                budget = self.config.max_catchup_ticks
                dt = self.runtime.nav_config.dt
                while self._sim_ahead >= dt and budget > 0:
                    self.runtime.tick()
                    self._sim_ahead -= dt
                    budget -= 1
                if budget == 0:
                    self._sim_ahead = 0.0  # fell behind; drop the debt
            last_wall = now

            if now - self._last_activity > self.config.idle_timeout:
                self._close()
        self._broadcast_closed()

    def _execute(self, command: _Command) -> None:
        try:
            result = self._dispatch(command.kind, command.payload)
            command.reply.put((result, None))
        except Exception as exc:  # surfaced to the HTTP layer
            command.reply.put((None, exc))

    def _dispatch(self, kind: str, payload: dict) -> Any:
        runtime = self.runtime
        if kind == "message":
            at = payload.get("at")
            if at is not None:
                if self.time_scale is not None:
                    raise RuntimeError_("scheduled messages require manual time-scale")
                runtime.advance_to(float(at))
            utterance = runtime.handle_message(payload["text"])
            return {"utterance": utterance.to_dict(), "seq": runtime.seq - 1,
                    "t": runtime.t}
        if kind == "frame":
            frame = runtime.switch_frame(payload["frame"])
            return {"frame": frame.value, "seq": runtime.seq - 1}
        if kind == "advance":
            if self.time_scale is not None:
                raise RuntimeError_("advance requires manual time-scale")
            runtime.advance_to(float(payload["to"]))
            return {"t": runtime.t, "seq": runtime.seq}
        if kind == "state":
            return self._state_snapshot()
        if kind == "log":
            return [r.to_dict() for r in runtime.log.records]
        if kind == "close":
            self._close()
            return {"status": self.status}
        raise RuntimeError_(f"unknown command {kind!r}")

    def _state_snapshot(self) -> dict:
        runtime = self.runtime
        nav = runtime.state.nav
        return {
            "id": self.id,
            "status": self.status,
            "t": runtime.t,
            "seq": runtime.seq,
            "frame": runtime.frame.value,
            "engine": runtime.config.engine,
            "seed": runtime.config.seed,
            "robot_status": runtime.state.robot.status.value,
            "pose": nav.pose.to_list(),
            "goal": nav.goal.to_list() if nav.goal else None,
            "progress": nav.progress,
            "beliefs": runtime.beliefs.to_list(),
            "desires": [d.to_dict() for d in runtime.desires],
            "intention": (runtime.intentions[-1].to_dict() if runtime.intentions
                          else None),
        }

    def _close(self) -> None:
        if self.status == "live":
            self.status = "closed"
            self.runtime.close()

    def _broadcast_closed(self) -> None:
        with self._sub_lock:
            subscribers = list(self.subscribers)
        for sub in subscribers:
            sub.offer({"type": "closed"})

    def stop(self) -> None:
        if self.status == "live":
            try:
                self.post("close")
            except SessionClosed:
                pass
        self.thread.join(timeout=5)


class SessionClosed(Exception):
    def __init__(self, session_id: str):
        super().__init__(f"session {session_id} is closed")


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class CreateSessionRequest(BaseModel):
    world: str = "bookstore"
    engine: str = Field(default="rules", pattern="^(rules|llm)$")
    seed: int = 0
    default_frame: str = "agentive"
    time_scale: Optional[float] = None  # None -> service default; 0 or "manual" via flag
    manual: bool = False


class MessageRequest(BaseModel):
    text: str
    at: Optional[float] = None


class FrameRequest(BaseModel):
    frame: str


class AdvanceRequest(BaseModel):
    to: float


def _http_error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    workers: dict[str, SessionWorker] = {}

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        for worker in list(workers.values()):
            worker.stop()

    app = FastAPI(title="stancelab service", version="0.1.0", lifespan=lifespan)
    app.state.workers = workers
    app.state.config = config

    def worker_or_404(session_id: str) -> SessionWorker:
        worker = workers.get(session_id)
        if worker is None:
            raise _http_error(404, "unknown_session", f"no session {session_id!r}")
        return worker

    def run_command(worker: SessionWorker, kind: str, **payload) -> Any:
        try:
            return worker.post(kind, **payload)
        except SessionClosed:
            raise _http_error(409, "closed_session", f"session {worker.id} is closed")
        except FrameError as exc:
            raise _http_error(422, exc.code, str(exc))
        except RuntimeError_ as exc:
            raise _http_error(422, exc.code, str(exc))

    @app.get("/worlds")
    def list_worlds() -> dict:
        from .world import bundled_world_names
        return {"worlds": bundled_world_names()}

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> dict:
        try:
            world = load_world(request.world)
        except WorldError as exc:
            raise _http_error(404, "unknown_world", str(exc))
        try:
            frame = parse_frame(request.default_frame)
        except FrameError as exc:
            raise _http_error(422, exc.code, str(exc))
        session_id = uuid.uuid4().hex[:12]
        runtime_config = RuntimeConfig(engine=request.engine, seed=request.seed,
                                       default_frame=frame)
        gateway = None
        if request.engine == "llm":
            from .gateway import LlmGateway
            gateway = LlmGateway(config.llm)
        runtime = SessionRuntime(world, runtime_config, gateway=gateway)
        time_scale = None if request.manual else (
            request.time_scale if request.time_scale is not None else config.time_scale)
        worker = SessionWorker(session_id, runtime, time_scale, config)
        workers[session_id] = worker
        worker.start()
        return {
            "id": session_id,
            "world": world.to_dict(),
            "engine": request.engine,
            "seed": request.seed,
            "frame": frame.value,
            "time_scale": time_scale,
            "status": "live",
        }

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str) -> dict:
        worker = worker_or_404(session_id)
        if worker.status != "live":
            raise _http_error(409, "closed_session", f"session {session_id} is closed")
        return run_command(worker, "state")

    @app.get("/sessions/{session_id}/world")
    def get_world(session_id: str) -> dict:
        worker = worker_or_404(session_id)
        return worker.runtime.world.to_dict()

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str) -> dict:
        worker = worker_or_404(session_id)
        if worker.status == "live":
            records = run_command(worker, "log")
        else:  # closed sessions are safe for concurrent reads
            records = [r.to_dict() for r in worker.runtime.log.records]
        return {"records": records}

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, request: MessageRequest) -> dict:
        if not request.text or not request.text.strip():
            raise _http_error(422, "empty_text", "message text must be nonempty")
        worker = worker_or_404(session_id)
        return run_command(worker, "message", text=request.text, at=request.at)

    @app.post("/sessions/{session_id}/frame")
    def post_frame(session_id: str, request: FrameRequest) -> dict:
        try:
            parse_frame(request.frame)
        except FrameError as exc:
            raise _http_error(422, exc.code, str(exc))
        worker = worker_or_404(session_id)
        return run_command(worker, "frame", frame=request.frame)

    @app.post("/sessions/{session_id}/advance")
    def post_advance(session_id: str, request: AdvanceRequest) -> dict:
        worker = worker_or_404(session_id)
        return run_command(worker, "advance", to=request.to)

    @app.post("/sessions/{session_id}/close")
    def post_close(session_id: str) -> dict:
        worker = worker_or_404(session_id)
        try:
            return worker.post("close")
        except SessionClosed:
            return {"status": "closed"}

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str, from_seq: int = 0) -> None:
        worker = workers.get(session_id)
        await websocket.accept()
        if worker is None:
            await websocket.send_json({"type": "error", "code": "unknown_session"})
            await websocket.close()
            return

        subscriber = worker.subscribe()
        try:
            snapshot = [r.to_dict() for r in worker.runtime.log.records]
            next_seq = from_seq
            for record in snapshot:
                if record["seq"] >= next_seq:
                    await websocket.send_json({"type": "record", "record": record})
                    next_seq = record["seq"] + 1
            if worker.status != "live":
                await websocket.send_json({"type": "closed"})
                await websocket.close()
                return
            while True:
                items = subscriber.drain()
                if subscriber.overflowed:
                    await websocket.send_json({"type": "error", "code": "slow_consumer"})
                    break
                for item in items:
                    if item.get("type") == "record":
                        seq = item["record"]["seq"]
                        if seq < next_seq:
                            continue  # already sent from the snapshot
                        next_seq = seq + 1
                    await websocket.send_json(item)
                    if item.get("type") == "closed":
                        await websocket.close()
                        return
                await asyncio.sleep(0.01)
        except WebSocketDisconnect:
            pass
        finally:
            worker.unsubscribe(subscriber)

    return app
