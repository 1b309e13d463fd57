"""Scenario scripts: ordered user turns with waits and frame switches.

One directive per line, ``#`` starts a comment:

    say Go to wellness bookshelf.
    wait 2
    say What is your state?
    await idle
    switch-frame mechanistic
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .frames import Frame, parse_frame
from .runtime import RuntimeConfig, SessionRuntime
from .sessionlog import (
    BehaviorTrace,
    FRAME_NAMES,
    LogRecord,
    StimulusItem,
    export_stimuli,
    write_stimulus_bundle,
)
from .world import WorldSpec, load_world


class ScenarioError(Exception):
    code = "scenario_error"


@dataclass(frozen=True)
class Directive:
    kind: str  # say | wait | await_idle | switch_frame
    text: str = ""
    seconds: float = 0.0
    frame: str = ""


def parse_script(text: str) -> list[Directive]:
    directives: list[Directive] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "say":
            if not rest:
                raise ScenarioError(f"line {lineno}: say requires text")
            directives.append(Directive("say", text=rest))
        elif head == "wait":
            try:
                seconds = float(rest)
            except ValueError:
                raise ScenarioError(f"line {lineno}: wait requires a number of seconds")
            if seconds < 0:
                raise ScenarioError(f"line {lineno}: wait must be nonnegative")
            directives.append(Directive("wait", seconds=seconds))
        elif head == "await":
            if rest != "idle":
                raise ScenarioError(f"line {lineno}: only 'await idle' is supported")
            directives.append(Directive("await_idle"))
        elif head == "switch-frame":
            directives.append(Directive("switch_frame", frame=parse_frame(rest).value))
        else:
            raise ScenarioError(f"line {lineno}: unknown directive {head!r}")
    if not directives:
        raise ScenarioError("script has no directives")
    return directives


def load_script(path: "str | Path") -> list[Directive]:
    p = Path(path)
    if not p.suffix and not p.exists():
        return load_bundled_script(str(path))
    return parse_script(p.read_text())


def load_bundled_script(name: str) -> list[Directive]:
    ref = resources.files("stancelab.data.scripts").joinpath(f"{name}.script")
    if not ref.is_file():
        raise ScenarioError(f"unknown bundled script {name!r} (have: {bundled_script_names()})")
    return parse_script(ref.read_text())


def bundled_script_names() -> list[str]:
    root = resources.files("stancelab.data.scripts")
    return sorted(p.name[: -len(".script")] for p in root.iterdir()
                  if p.name.endswith(".script"))


@dataclass(frozen=True)
class RunResult:
    world: str
    frame: str
    records: tuple[LogRecord, ...]
    trace: BehaviorTrace
    log_path: Optional[Path]
    replies: tuple[str, ...]

    @property
    def trace_hash(self) -> str:
        return self.trace.hash


IDLE_CAP_SECONDS = 150.0


def run_scenario(world: "WorldSpec | str", directives: list[Directive],
                 engine: str = "rules", frame: "Frame | str" = Frame.AGENTIVE,
                 seed: int = 0, log_path: Optional[Path] = None,
                 gateway=None) -> RunResult:
    """Execute a script headless at max sim speed; returns records and trace."""
    spec = world if isinstance(world, WorldSpec) else load_world(world)
    frame = parse_frame(frame) if isinstance(frame, str) else frame
    config = RuntimeConfig(engine=engine, seed=seed, default_frame=frame)
    runtime = SessionRuntime(spec, config, log_path=log_path, gateway=gateway)
    runtime.start()
    replies: list[str] = []
    for directive in directives:
        if directive.kind == "say":
            replies.append(runtime.handle_message(directive.text).text)
        elif directive.kind == "wait":
            runtime.advance_seconds(directive.seconds)
        elif directive.kind == "await_idle":
            if not runtime.advance_until_idle(IDLE_CAP_SECONDS):
                runtime.close()
                raise ScenarioError(
                    f"robot still navigating after {IDLE_CAP_SECONDS}s cap")
        elif directive.kind == "switch_frame":
            runtime.switch_frame(directive.frame)
    records = tuple(runtime.log.records)
    runtime.close()
    return RunResult(
        world=spec.name,
        frame=frame.value,
        records=records,
        trace=BehaviorTrace.from_records(records),
        log_path=log_path,
        replies=tuple(replies),
    )


def run_all_frames(world: "WorldSpec | str", directives: list[Directive],
                   engine: str = "rules", seed: int = 0,
                   out_dir: Optional[Path] = None, gateway=None,
                   scenario_id: str = "scenario") -> tuple[StimulusItem, dict[str, RunResult]]:
    """Run the same script once per frame with one seed and export the bundle.

    Raises InvarianceViolationError if the three behavior traces differ.
    """
    spec = world if isinstance(world, WorldSpec) else load_world(world)
    results: dict[str, RunResult] = {}
    for frame in FRAME_NAMES:
        log_path = (Path(out_dir) / f"{scenario_id}.{frame}.jsonl") if out_dir else None
        results[frame] = run_scenario(spec, directives, engine=engine, frame=frame,
                                      seed=seed, log_path=log_path, gateway=gateway)
    item = export_stimuli({f: list(r.records) for f, r in results.items()},
                          scenario_id=scenario_id)
    if out_dir is not None:
        write_stimulus_bundle(item, Path(out_dir) / scenario_id)
    return item, results
