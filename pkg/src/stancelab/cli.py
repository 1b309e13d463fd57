"""Headless driver: scripted runs, stimulus export, replay, mock LLM, world checks."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .frames import Frame
from .gateway import GatewayConfig, LlmGateway
from .scenario import (
    ScenarioError,
    load_script,
    run_all_frames,
    run_scenario,
)
from .sessionlog import (
    ReplayDivergenceError,
    SessionLogError,
    export_stimuli,
    read_log,
    replay,
    write_stimulus_bundle,
)
from .world import WorldError, load_world

FRAME_CHOICES = [f.value for f in Frame] + ["all"]


@click.group()
def main() -> None:
    """Simulated robot with frame-varied self-explanations."""


def _gateway(engine: str, llm_endpoint: str | None):
    if engine != "llm":
        return None
    config = GatewayConfig.from_env(**({"endpoint": llm_endpoint} if llm_endpoint else {}))
    return LlmGateway(config)


@main.command()
@click.option("--script", "script_ref", required=True,
              help="Script path or bundled script name.")
@click.option("--world", "world_ref", required=True, help="World path or bundled name.")
@click.option("--engine", type=click.Choice(["rules", "llm"]), default="rules")
@click.option("--frame", type=click.Choice(FRAME_CHOICES), default="agentive",
              help="'all' runs the three frames with one seed and exports stimuli.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("runs"),
              help="Directory for logs and stimulus bundles.")
@click.option("--llm-endpoint", default=None, help="Chat-completion endpoint URL.")
@click.option("--scenario-id", default=None, help="Bundle name; defaults to the script name.")
def run(script_ref: str, world_ref: str, engine: str, frame: str, seed: int,
        out_dir: Path, llm_endpoint: str | None, scenario_id: str | None) -> None:
    """Run a scenario script headless at max simulation speed."""
    try:
        directives = load_script(script_ref)
        world = load_world(world_ref)
    except (ScenarioError, WorldError) as exc:
        raise click.ClickException(str(exc))
    scenario_id = scenario_id or Path(script_ref).stem
    out_dir.mkdir(parents=True, exist_ok=True)
    gateway = _gateway(engine, llm_endpoint)

    try:
        if frame == "all":
            item, results = run_all_frames(world, directives, engine=engine, seed=seed,
                                           out_dir=out_dir, gateway=gateway,
                                           scenario_id=scenario_id)
            click.echo(f"trace hash: {item.trace_hash}")
            for name, result in results.items():
                click.echo(f"  {name}: {result.log_path} ({len(result.records)} records)")
            click.echo(f"stimulus bundle: {out_dir / scenario_id}")
        else:
            log_path = out_dir / f"{scenario_id}.{frame}.jsonl"
            result = run_scenario(world, directives, engine=engine, frame=frame,
                                  seed=seed, log_path=log_path, gateway=gateway)
            click.echo(f"log: {log_path} ({len(result.records)} records)")
            click.echo(f"trace hash: {result.trace_hash}")
    except (ScenarioError, SessionLogError) as exc:
        raise click.ClickException(str(exc))


@main.command("replay")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True, path_type=Path))
def replay_cmd(log_path: Path) -> None:
    """Re-execute a session log and verify every record bit-exact."""
    try:
        result = replay(log_path)
    except ReplayDivergenceError as exc:
        click.echo(f"replay diverged at seq={exc.seq} field={exc.field}", err=True)
        sys.exit(1)
    except SessionLogError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"replay identical ({len(result.records)} records, "
               f"trace hash {result.trace.hash})")


@main.command()
@click.argument("logs", nargs=3, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--scenario-id", default="scenario")
def export(logs: tuple[Path, ...], out_dir: Path, scenario_id: str) -> None:
    """Bundle three per-frame logs of one script into a stimulus item."""
    by_frame = {}
    try:
        for path in logs:
            records = read_log(path)
            frame = records[0].event.payload["default_frame"]
            by_frame[frame] = records
        item = export_stimuli(by_frame, scenario_id=scenario_id)
    except SessionLogError as exc:
        raise click.ClickException(str(exc))
    bundle = write_stimulus_bundle(item, out_dir)
    click.echo(f"stimulus bundle: {bundle} (trace hash {item.trace_hash})")


@main.command("mock-llm")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8089)
@click.option("--behavior", type=click.Choice(["ok", "garbage", "timeout", "error", "drop"]),
              default="ok")
def mock_llm(host: str, port: int, behavior: str) -> None:
    """Serve the deterministic mock chat-completion endpoint."""
    from .mockllm import MockLlmServer

    server = MockLlmServer(host=host, port=port, behavior=behavior)
    click.echo(f"mock llm listening on {server.endpoint} (behavior={behavior})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass


@main.command("validate-world")
@click.argument("world_ref")
def validate_world_cmd(world_ref: str) -> None:
    """Parse and validate a world file (or bundled world name)."""
    try:
        world = load_world(world_ref)
    except WorldError as exc:
        click.echo(f"invalid: {exc}", err=True)
        sys.exit(1)
    click.echo(f"ok: {world.name} — {len(world.waypoints)} waypoints, "
               f"{len(world.obstacles)} obstacles, bounds {world.bounds.as_list()}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--time-scale", type=float, default=1.0,
              help="Sim seconds per wall second for live sessions.")
def serve(host: str, port: int, time_scale: float) -> None:
    """Run the session HTTP service (REST + WebSocket streams)."""
    import uvicorn

    from .service import ServiceConfig, create_app

    app = create_app(ServiceConfig(time_scale=time_scale))
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
