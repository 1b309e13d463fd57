from __future__ import annotations

import pytest

from stancelab.model import Pose
from stancelab.world import Rect, Waypoint, WorldDefaults, WorldSpec, load_world


@pytest.fixture(scope="session")
def bookstore() -> WorldSpec:
    return load_world("bookstore")


@pytest.fixture(scope="session")
def small_house() -> WorldSpec:
    return load_world("small_house")


@pytest.fixture(scope="session")
def empty_world() -> WorldSpec:
    return WorldSpec(
        name="empty",
        bounds=Rect(-5.0, -5.0, 5.0, 5.0),
        spawn=Pose(0.0, 0.0, 0.0),
        obstacles=(),
        waypoints=(Waypoint("origin", (0.0, 0.0)), Waypoint("east", (3.0, 0.0))),
        aliases={},
        defaults=WorldDefaults(),
    )
