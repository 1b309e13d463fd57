"""Semantic environments: labeled waypoints, rectangular obstacles, occupancy queries.

World files are TOML (grammar in docs/world-format.md). Two fixtures ship with
the package: ``bookstore`` and ``small_house``.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import Pose


class WorldError(Exception):
    code = "world_error"


class WorldParseError(WorldError):
    code = "world_parse"


class WorldValidationError(WorldError):
    code = "world_invalid"


DEFAULT_RESOLUTION = 0.10
DEFAULT_ROBOT_RADIUS = 0.22
DEFAULT_POSITION_CONFIDENCE = 0.95
DEFAULT_ARRIVAL_TOLERANCE = 0.15


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle (xmin, ymin, xmax, ymax)."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise WorldValidationError(f"degenerate rectangle {self.as_list()}")

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]

    def contains(self, x: float, y: float, *, strict: bool = False) -> bool:
        if strict:
            return self.xmin < x < self.xmax and self.ymin < y < self.ymax
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def distance_to(self, x: float, y: float) -> float:
        dx = max(self.xmin - x, 0.0, x - self.xmax)
        dy = max(self.ymin - y, 0.0, y - self.ymax)
        return math.hypot(dx, dy)


@dataclass(frozen=True)
class Waypoint:
    label: str
    position: tuple[float, float]
    facing: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.label:
            raise WorldValidationError("waypoint label must be nonempty")


@dataclass(frozen=True)
class WorldDefaults:
    position_confidence: float = DEFAULT_POSITION_CONFIDENCE
    arrival_tolerance: float = DEFAULT_ARRIVAL_TOLERANCE


@dataclass(frozen=True)
class WorldSpec:
    name: str
    bounds: Rect
    spawn: Pose
    obstacles: tuple[Rect, ...] = ()
    waypoints: tuple[Waypoint, ...] = ()
    aliases: dict[str, str] = field(default_factory=dict)
    defaults: WorldDefaults = field(default_factory=WorldDefaults)

    def waypoint(self, label: str) -> Waypoint:
        for wp in self.waypoints:
            if wp.label == label:
                return wp
        raise KeyError(label)

    @property
    def labels(self) -> list[str]:
        return [wp.label for wp in self.waypoints]

    def env(self) -> dict[str, Waypoint]:
        return {wp.label: wp for wp in self.waypoints}

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bounds": self.bounds.as_list(),
            "spawn": self.spawn.to_list(),
            "obstacles": [r.as_list() for r in self.obstacles],
            "waypoints": [
                {"label": w.label, "position": list(w.position), "facing": w.facing}
                for w in self.waypoints
            ],
            "aliases": dict(self.aliases),
            "defaults": {
                "position_confidence": self.defaults.position_confidence,
                "arrival_tolerance": self.defaults.arrival_tolerance,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorldSpec":
        # TOML worlds use [[obstacles]] tables with a "rect" key; the log
        # format embeds plain rect lists. Accept both.
        obstacles = data.get("obstacles", [])
        if obstacles and isinstance(obstacles[0], dict):
            obstacles = [o["rect"] for o in obstacles]
        spec = cls(
            name=data["name"],
            bounds=Rect(*data["bounds"]),
            spawn=Pose.from_list(data.get("spawn", [0.0, 0.0, 0.0])),
            obstacles=tuple(Rect(*r) for r in obstacles),
            waypoints=tuple(
                Waypoint(w["label"], tuple(w["position"]), w.get("facing"))
                for w in data.get("waypoints", [])
            ),
            aliases={str(k): str(v) for k, v in data.get("aliases", {}).items()},
            defaults=WorldDefaults(
                position_confidence=data.get("defaults", {}).get(
                    "position_confidence", DEFAULT_POSITION_CONFIDENCE
                ),
                arrival_tolerance=data.get("defaults", {}).get(
                    "arrival_tolerance", DEFAULT_ARRIVAL_TOLERANCE
                ),
            ),
        )
        validate_world(spec)
        return spec


def validate_world(spec: WorldSpec) -> None:
    b = spec.bounds
    if not (0.0 < spec.defaults.position_confidence <= 1.0):
        raise WorldValidationError("defaults.position_confidence must lie in (0, 1]")
    if spec.defaults.arrival_tolerance <= 0:
        raise WorldValidationError("defaults.arrival_tolerance must be positive")
    if not b.contains(spec.spawn.x, spec.spawn.y):
        raise WorldValidationError(f"spawn {spec.spawn.to_list()[:2]} outside bounds")
    seen: set[str] = set()
    for wp in spec.waypoints:
        if wp.label in seen:
            raise WorldValidationError(f"duplicate waypoint label {wp.label!r}")
        seen.add(wp.label)
        x, y = wp.position
        if not b.contains(x, y):
            raise WorldValidationError(f"waypoint {wp.label!r} at ({x}, {y}) outside bounds")
    for i, obs in enumerate(spec.obstacles):
        if not (b.contains(obs.xmin, obs.ymin) and b.contains(obs.xmax, obs.ymax)):
            raise WorldValidationError(f"obstacle #{i} {obs.as_list()} outside bounds")
        for wp in spec.waypoints:
            if obs.contains(*wp.position, strict=True):
                raise WorldValidationError(
                    f"waypoint {wp.label!r} lies inside obstacle #{i}"
                )
    for alias, target in spec.aliases.items():
        if target not in seen:
            raise WorldValidationError(f"alias {alias!r} points to unknown label {target!r}")


# ---------------------------------------------------------------------------
# Loading / serializing
# ---------------------------------------------------------------------------


def load_world_text(text: str) -> WorldSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:  # message carries line/column info
        raise WorldParseError(f"world file does not parse: {exc}") from exc
    try:
        return WorldSpec.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise WorldValidationError(f"world document missing or malformed field: {exc}") from exc


def load_world(path: "str | Path") -> WorldSpec:
    """Load a world from a TOML file path or a bundled world name."""
    p = Path(path)
    if not p.suffix and not p.exists():
        return load_bundled_world(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise WorldError(f"cannot read world file {path}: {exc}") from exc
    return load_world_text(text)


def load_bundled_world(name: str) -> WorldSpec:
    ref = resources.files("stancelab.data.worlds").joinpath(f"{name}.toml")
    if not ref.is_file():
        raise WorldError(f"unknown bundled world {name!r} (have: {bundled_world_names()})")
    return load_world_text(ref.read_text())


def bundled_world_names() -> list[str]:
    root = resources.files("stancelab.data.worlds")
    return sorted(p.name[: -len(".toml")] for p in root.iterdir() if p.name.endswith(".toml"))


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _toml_floats(values) -> str:
    return "[" + ", ".join(repr(float(v)) for v in values) + "]"


def serialize_world(spec: WorldSpec) -> str:
    """Emit a TOML document such that load_world_text(serialize_world(w)) == w."""
    out = [
        f"name = {_toml_str(spec.name)}",
        f"bounds = {_toml_floats(spec.bounds.as_list())}",
        f"spawn = {_toml_floats(spec.spawn.to_list())}",
        "",
        "[defaults]",
        f"position_confidence = {spec.defaults.position_confidence!r}",
        f"arrival_tolerance = {spec.defaults.arrival_tolerance!r}",
        "",
    ]
    for obs in spec.obstacles:
        out += ["[[obstacles]]", f"rect = {_toml_floats(obs.as_list())}", ""]
    for wp in spec.waypoints:
        out += ["[[waypoints]]", f"label = {_toml_str(wp.label)}",
                f"position = {_toml_floats(wp.position)}"]
        if wp.facing is not None:
            out += [f"facing = {wp.facing!r}"]
        out += [""]
    if spec.aliases:
        out += ["[aliases]"]
        out += [f"{_toml_str(a)} = {_toml_str(t)}" for a, t in spec.aliases.items()]
        out += [""]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Label resolution
# ---------------------------------------------------------------------------

_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)


def normalize_text(text: str) -> str:
    return " ".join(_PUNCT_RE.sub(" ", text.lower()).split())


def resolve_label(spec: WorldSpec, text: str) -> Optional[str]:
    """Resolve free text to a waypoint label: exact label, then alias; else None."""
    norm = normalize_text(text)
    if not norm:
        return None
    for wp in spec.waypoints:
        if normalize_text(wp.label) == norm:
            return wp.label
    for alias, target in spec.aliases.items():
        if normalize_text(alias) == norm:
            return target
    return None


def scan_for_label(spec: WorldSpec, text: str) -> Optional[str]:
    """First waypoint label or alias mentioned anywhere in the text, by word position."""
    words = normalize_text(text).split()
    if not words:
        return None
    joined = " " + " ".join(words) + " "
    best: tuple[int, str] | None = None
    candidates = [(wp.label, wp.label) for wp in spec.waypoints]
    candidates += [(alias, target) for alias, target in spec.aliases.items()]
    for name, target in candidates:
        needle = " " + normalize_text(name) + " "
        pos = joined.find(needle)
        if pos >= 0 and (best is None or pos < best[0]):
            best = (pos, target)
    return best[1] if best else None


# ---------------------------------------------------------------------------
# Occupancy grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OccupancyGrid:
    resolution: float
    x0: float
    y0: float
    nx: int
    ny: int
    occupied: np.ndarray  # bool, shape (ny, nx)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ix = int(math.floor((x - self.x0) / self.resolution))
        iy = int(math.floor((y - self.y0) / self.resolution))
        return ix, iy

    def in_grid(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.nx and 0 <= iy < self.ny

    def center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.x0 + (ix + 0.5) * self.resolution, self.y0 + (iy + 0.5) * self.resolution)

    def is_occupied_cell(self, ix: int, iy: int) -> bool:
        return bool(self.occupied[iy, ix])

    def is_occupied_xy(self, x: float, y: float) -> bool:
        ix, iy = self.cell_of(x, y)
        if not self.in_grid(ix, iy):
            return True  # outside the map counts as blocked
        return bool(self.occupied[iy, ix])

    @property
    def free_count(self) -> int:
        return int(self.nx * self.ny - np.count_nonzero(self.occupied))


def rasterize(spec: WorldSpec, robot_radius: float = DEFAULT_ROBOT_RADIUS,
              resolution: float = DEFAULT_RESOLUTION) -> OccupancyGrid:
    """Occupancy over the world bounds: a cell is occupied iff its center lies
    within Euclidean distance robot_radius of some obstacle rectangle."""
    if robot_radius < 0:
        raise WorldError("robot_radius must be >= 0")
    b = spec.bounds
    nx = int(math.ceil((b.xmax - b.xmin) / resolution - 1e-9))
    ny = int(math.ceil((b.ymax - b.ymin) / resolution - 1e-9))
    xs = b.xmin + (np.arange(nx) + 0.5) * resolution
    ys = b.ymin + (np.arange(ny) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    occ = np.zeros((ny, nx), dtype=bool)
    r2 = robot_radius * robot_radius
    for obs in spec.obstacles:
        dx = np.maximum(np.maximum(obs.xmin - gx, gx - obs.xmax), 0.0)
        dy = np.maximum(np.maximum(obs.ymin - gy, gy - obs.ymax), 0.0)
        occ |= (dx * dx + dy * dy) <= r2
    return OccupancyGrid(resolution=resolution, x0=b.xmin, y0=b.ymin, nx=nx, ny=ny, occupied=occ)


def clearance(spec: WorldSpec, x: float, y: float) -> float:
    """Distance from a point to the nearest obstacle (inf when there are none)."""
    if not spec.obstacles:
        return math.inf
    return min(obs.distance_to(x, y) for obs in spec.obstacles)
