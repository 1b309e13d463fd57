"""stancelab: a simulated non-humanoid robot that holds behavior constant while
varying the linguistic frame of its self-explanations."""

__version__ = "0.1.0"

from .frames import Frame, Utterance, check_lexicon, render, select_frame
from .model import (
    Action,
    Belief,
    BeliefBase,
    Category,
    Desire,
    Event,
    EventKind,
    Intent,
    IntentKind,
    Intention,
    Pose,
    Proposition,
    Source,
    State,
    holds,
    upsert_belief,
)
from .policy import ActionDecision, LlmEngine, RulesEngine, decide, parse_command
from .runtime import RuntimeConfig, SessionRuntime
from .scenario import load_script, parse_script, run_all_frames, run_scenario
from .sessionlog import BehaviorTrace, LogRecord, SessionLog, export_stimuli, replay
from .sim import KinematicState, NavConfig, NavPlan, odometry, plan, step
from .transition import apply_event, promote
from .world import OccupancyGrid, WorldSpec, Waypoint, load_world, rasterize, resolve_label
